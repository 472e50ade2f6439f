#include "metapot/trace_collapse.hpp"

#include "metapot/error.hpp"
#include "metapot/linalg.hpp"
#include "metapot/potential.hpp"

#include <algorithm>
#include <cmath>

namespace metapot {

namespace {

void require_subset_of(const StateSet& s, const StateSet& f) {
  if (!is_subset(s, f)) throw Error(ErrorCode::SetsNotInF, "sets must be contained in F");
}

// Dense trace rates on F (zero diagonal), rows/cols indexed like `f`.
DenseMatrix trace_rates(const ChainModel& chain, const StateSet& f) {
  const auto n = chain.size();
  const SparseMatrix& off = chain.rates().off_diagonal();
  const StateSet c = complement(f, n);

  DenseMatrix rf = DenseMatrix(linalg::restrict(off, f, f));
  if (!c.empty()) {
    const ColSparseMatrix lcc = linalg::restrict(chain.generator(), c, c);
    const DenseMatrix rcf = DenseMatrix(linalg::restrict(off, c, f));
    // h_y(z) = P_z[H_F = H_y] for z outside F
    const DenseMatrix h = linalg::solve(lcc, DenseMatrix(-rcf)).cwiseMax(0.0);
    const ColSparseMatrix rfc = linalg::restrict(off, f, c);
    rf += rfc * h;
  }
  rf.diagonal().setZero();
  return rf;
}

StateSpace sub_space(const StateSpace& space, const StateSet& states) {
  std::vector<std::string> labels;
  labels.reserve(states.size());
  for (auto s : states) labels.push_back(space.label(s));
  return StateSpace(std::move(labels));
}

RateMatrix dense_to_rates(const DenseMatrix& r) {
  SparseMatrix off = r.sparseView();
  return RateMatrix::from_off_diagonal(std::move(off));
}

}  // namespace

StateSet TraceChain::local(const StateSet& base_set) const {
  StateSet out;
  out.reserve(base_set.size());
  for (auto s : base_set) {
    const auto it = std::lower_bound(states.begin(), states.end(), s);
    if (it == states.end() || *it != s) throw Error(ErrorCode::SetsNotInF, "state outside F");
    out.push_back(static_cast<StateIndex>(it - states.begin()));
  }
  return out;
}

TraceChain trace(const ChainModel& chain, const StateSet& f) {
  if (f.empty()) throw Error(ErrorCode::EmptyF, "trace set F is empty");
  if (f.back() >= chain.size()) throw Error(ErrorCode::InvalidArgument, "state index out of range");
  if (f.size() == chain.size()) throw Error(ErrorCode::FullF, "trace set F is the whole space");
  if (f.size() < 2) throw Error(ErrorCode::InvalidArgument, "trace on a single state has no dynamics");

  Vector mu(static_cast<Eigen::Index>(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) mu[static_cast<Eigen::Index>(i)] = chain.stationary()[static_cast<Eigen::Index>(f[i])];
  mu /= mu.sum();

  return TraceChain{ChainModel::with_stationary(sub_space(chain.space(), f), dense_to_rates(trace_rates(chain, f)), mu),
                    f};
}

std::string collapsed_label(const StateSpace& space) {
  std::string label = "#collapsed";
  for (int k = 1; space.find(label); ++k) label = "#collapsed" + std::to_string(k);
  return label;
}

StateIndex CollapsedChain::map(StateIndex base) const {
  const auto it = std::lower_bound(kept.begin(), kept.end(), base);
  if (it != kept.end() && *it == base) return static_cast<StateIndex>(it - kept.begin());
  if (contains(collapsed, base)) return dagger;
  throw Error(ErrorCode::InvalidArgument, "state index out of range");
}

Vector CollapsedChain::project(const Vector& base_values) const {
  Vector out(static_cast<Eigen::Index>(kept.size() + 1));
  for (std::size_t i = 0; i < kept.size(); ++i) out[static_cast<Eigen::Index>(i)] = base_values[static_cast<Eigen::Index>(kept[i])];
  out[static_cast<Eigen::Index>(dagger)] = base_values[static_cast<Eigen::Index>(collapsed.front())];
  return out;
}

CollapsedChain collapse(const ChainModel& chain, const StateSet& b) {
  const auto n = chain.size();
  if (b.empty()) throw Error(ErrorCode::EmptyB, "collapsed set B is empty");
  if (b.back() >= n) throw Error(ErrorCode::InvalidArgument, "state index out of range");
  if (b.size() == n) throw Error(ErrorCode::FullB, "collapsed set B is the whole space");

  CollapsedChain out{chain, b, complement(b, n), 0};
  out.dagger = out.kept.size();
  const auto in_b = membership(b, n);
  std::vector<StateIndex> index(n, out.dagger);
  for (std::size_t i = 0; i < out.kept.size(); ++i) index[out.kept[i]] = i;

  const Vector& mu = chain.stationary();
  const double mass_b = chain.mass(b);
  std::vector<Triplet> trips;
  const SparseMatrix& off = chain.rates().off_diagonal();
  for (Eigen::Index x = 0; x < off.outerSize(); ++x) {
    for (SparseMatrix::InnerIterator it(off, x); it; ++it) {
      const auto from = static_cast<StateIndex>(x);
      const auto to = static_cast<StateIndex>(it.col());
      if (in_b[from] && in_b[to]) continue;
      // out of B: mu-weighted average over the starting point
      const double w = in_b[from] ? mu[x] / mass_b : 1.0;
      trips.emplace_back(static_cast<int>(index[from]), static_cast<int>(index[to]), w * it.value());
    }
  }
  const auto m = static_cast<Eigen::Index>(out.kept.size() + 1);
  SparseMatrix rc(m, m);
  rc.setFromTriplets(trips.begin(), trips.end());

  std::vector<std::string> labels;
  labels.reserve(out.kept.size() + 1);
  for (auto s : out.kept) labels.push_back(chain.space().label(s));
  labels.push_back(collapsed_label(chain.space()));

  Vector mu_c(m);
  for (std::size_t i = 0; i < out.kept.size(); ++i) mu_c[static_cast<Eigen::Index>(i)] = mu[static_cast<Eigen::Index>(out.kept[i])];
  mu_c[m - 1] = mass_b;

  out.chain = ChainModel::with_stationary(StateSpace(std::move(labels)), RateMatrix::from_off_diagonal(std::move(rc)),
                                          std::move(mu_c));
  return out;
}

MeanSetRate mean_set_rate(const ChainModel& chain, const StateSet& f, const StateSet& a, const StateSet& b) {
  if (f.empty()) throw Error(ErrorCode::EmptyF, "F is empty");
  if (f.back() >= chain.size()) throw Error(ErrorCode::InvalidArgument, "state index out of range");
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySet, "A and B must be nonempty");
  require_subset_of(a, f);
  require_subset_of(b, f);
  if (!disjoint(a, b)) throw Error(ErrorCode::Overlap, "A and B overlap");

  MeanSetRate out;
  const Vector& mu = chain.stationary();
  const double mass_a = chain.mass(a);

  {
    const DenseMatrix rf = f.size() == chain.size() ? DenseMatrix(chain.rates().off_diagonal()) : trace_rates(chain, f);
    std::vector<StateIndex> pos(chain.size(), 0);
    for (std::size_t i = 0; i < f.size(); ++i) pos[f[i]] = i;
    double flux = 0.0;
    for (auto x : a) {
      double row = 0.0;
      for (auto y : b) row += rf(static_cast<Eigen::Index>(pos[x]), static_cast<Eigen::Index>(pos[y]));
      flux += mu[static_cast<Eigen::Index>(x)] * row;
    }
    out.via_trace = flux / mass_a;
  }

  {
    // h = P_.[H_F = H_B]: 1 on B, 0 on F \ B, harmonic off F
    const Vector h = committor(chain, b, set_difference(f, b)).values;
    const SparseMatrix& off = chain.rates().off_diagonal();
    double flux = 0.0;
    for (auto x : a) {
      double row = 0.0;
      for (SparseMatrix::InnerIterator it(off, static_cast<Eigen::Index>(x)); it; ++it) row += it.value() * h[it.col()];
      flux += mu[static_cast<Eigen::Index>(x)] * row;
    }
    out.via_return = flux / mass_a;
  }
  return out;
}

DenseMatrix mean_set_rate_matrix(const ChainModel& chain, const std::vector<StateSet>& blocks) {
  StateSet f;
  for (const auto& blk : blocks) {
    if (blk.empty()) throw Error(ErrorCode::EmptySet, "empty block");
    if (!disjoint(f, blk)) throw Error(ErrorCode::Overlap, "blocks overlap");
    f = set_union(f, blk);
  }
  if (f.empty() || f.back() >= chain.size()) throw Error(ErrorCode::InvalidArgument, "invalid blocks");

  const DenseMatrix rf = f.size() == chain.size() ? DenseMatrix(chain.rates().off_diagonal()) : trace_rates(chain, f);
  std::vector<StateIndex> pos(chain.size(), 0);
  for (std::size_t i = 0; i < f.size(); ++i) pos[f[i]] = i;

  const auto k = static_cast<Eigen::Index>(blocks.size());
  DenseMatrix out = DenseMatrix::Zero(k, k);
  const Vector& mu = chain.stationary();
  for (Eigen::Index x = 0; x < k; ++x) {
    const auto& bx = blocks[static_cast<std::size_t>(x)];
    for (Eigen::Index y = 0; y < k; ++y) {
      if (x == y) continue;
      double flux = 0.0;
      for (auto s : bx) {
        double row = 0.0;
        for (auto t : blocks[static_cast<std::size_t>(y)]) {
          row += rf(static_cast<Eigen::Index>(pos[s]), static_cast<Eigen::Index>(pos[t]));
        }
        flux += mu[static_cast<Eigen::Index>(s)] * row;
      }
      out(x, y) = flux / chain.mass(bx);
    }
  }
  return out;
}

double verify_trace_collapse_commute(const ChainModel& chain, const StateSet& f, const StateSet& b) {
  if (b.empty()) throw Error(ErrorCode::EmptyB, "B is empty");
  require_subset_of(b, f);
  if (b.size() == f.size()) throw Error(ErrorCode::InvalidArgument, "B must be a proper subset of F");
  if (f.size() == chain.size()) throw Error(ErrorCode::FullF, "F must be a proper subset of E");

  const TraceChain t = trace(chain, f);
  const CollapsedChain trace_then_collapse = collapse(t.chain, t.local(b));

  const CollapsedChain c = collapse(chain, b);
  StateSet g;
  for (auto s : set_difference(f, b)) g.push_back(c.map(s));
  g.push_back(c.dagger);
  g = make_set(std::move(g));
  const TraceChain collapse_then_trace = trace(c.chain, g);

  const DenseMatrix lhs = DenseMatrix(trace_then_collapse.chain.rates().off_diagonal());
  const DenseMatrix rhs = DenseMatrix(collapse_then_trace.chain.rates().off_diagonal());
  return (lhs - rhs).cwiseAbs().maxCoeff();
}

}  // namespace metapot
