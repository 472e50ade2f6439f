#include "metapot/potential.hpp"

#include "metapot/error.hpp"
#include "metapot/kernels.hpp"
#include "metapot/linalg.hpp"
#include "metapot/trace_collapse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace metapot {

namespace {

void check_in_range(const ChainModel& chain, const StateSet& s) {
  for (auto x : s) {
    if (x >= chain.size()) throw Error(ErrorCode::InvalidArgument, "state index out of range");
  }
}

void check_pair(const ChainModel& chain, const StateSet& a, const StateSet& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySet, "source and sink sets must be nonempty");
  check_in_range(chain, a);
  check_in_range(chain, b);
  if (!disjoint(a, b)) throw Error(ErrorCode::Overlap, "source and sink sets overlap");
}

Vector committor_values(const SparseMatrix& generator, const StateSet& a, const StateSet& b) {
  const auto n = static_cast<std::size_t>(generator.rows());
  const StateSet interior = complement(set_union(a, b), n);
  const Vector boundary = indicator(a, n);
  Vector f = linalg::solve_dirichlet(generator, interior, boundary, Vector::Zero(static_cast<Eigen::Index>(n)));
  // clip rounding noise; the exact solution lies in [0, 1]
  return f.cwiseMax(0.0).cwiseMin(1.0);
}

// sum_y R(x,y) h(y) over off-diagonal entries of row x
double row_dot(const SparseMatrix& off, StateIndex x, const Vector& h) {
  double acc = 0.0;
  for (SparseMatrix::InnerIterator it(off, static_cast<Eigen::Index>(x)); it; ++it) acc += it.value() * h[it.col()];
  return acc;
}

Vector escape_from_chain(const ChainModel& chain, const StateSet& a, const StateSet& b) {
  const Vector h = committor_values(chain.generator(), b, a);
  const SparseMatrix& off = chain.rates().off_diagonal();
  Vector out(static_cast<Eigen::Index>(a.size()));
  for (std::size_t k = 0; k < a.size(); ++k) {
    out[static_cast<Eigen::Index>(k)] = row_dot(off, a[k], h) / chain.holding()[static_cast<Eigen::Index>(a[k])];
  }
  return out.cwiseMin(1.0);
}

double weighted_escape(const ChainModel& chain, const StateSet& a, const Vector& escape) {
  double cap = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    cap += chain.jump_measure()[static_cast<Eigen::Index>(a[k])] * escape[static_cast<Eigen::Index>(k)];
  }
  return cap;
}

}  // namespace

Committor committor(const ChainModel& chain, const StateSet& a, const StateSet& b, ChainKind kind) {
  check_pair(chain, a, b);
  Committor c;
  c.source = a;
  c.sink = b;
  c.kind = kind;
  if (kind == ChainKind::Forward) {
    c.values = committor_values(chain.generator(), a, b);
  } else {
    c.values = committor_values(adjoint(chain).generator(), a, b);
  }
  return c;
}

double harmonic_residual(const ChainModel& chain, const Committor& c) {
  const SparseMatrix generator = c.kind == ChainKind::Forward ? chain.generator() : adjoint(chain).generator();
  const StateSet interior = complement(set_union(c.source, c.sink), chain.size());
  double worst = 0.0;
  for (auto x : interior) {
    double lf = 0.0;
    for (SparseMatrix::InnerIterator it(generator, static_cast<Eigen::Index>(x)); it; ++it) {
      lf += it.value() * c.values[it.col()];
    }
    worst = std::max(worst, std::abs(lf) / chain.holding()[static_cast<Eigen::Index>(x)]);
  }
  return worst;
}

double escape_probability(const ChainModel& chain, StateIndex x, const StateSet& a, const StateSet& b) {
  check_pair(chain, a, b);
  const auto pos = std::lower_bound(a.begin(), a.end(), x);
  if (pos == a.end() || *pos != x) throw Error(ErrorCode::StateNotInA, "state " + chain.space().label(x) + " is not in A");
  return escape_from_chain(chain, a, b)[pos - a.begin()];
}

Vector escape_probabilities(const ChainModel& chain, const StateSet& a, const StateSet& b) {
  check_pair(chain, a, b);
  return escape_from_chain(chain, a, b);
}

CapacityReport capacity(const ChainModel& chain, const StateSet& a, const StateSet& b) {
  check_pair(chain, a, b);
  CapacityReport r;
  r.a = a;
  r.b = b;
  r.escape_probs = escape_from_chain(chain, a, b);
  r.value = weighted_escape(chain, a, r.escape_probs);

  const ChainModel star = adjoint(chain);
  const Vector escape_star = escape_from_chain(star, a, b);
  r.adjoint_value = weighted_escape(star, a, escape_star);

  r.harmonic_measure.resize(static_cast<Eigen::Index>(a.size()));
  r.adjoint_harmonic_measure.resize(static_cast<Eigen::Index>(a.size()));
  for (std::size_t k = 0; k < a.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double m = chain.jump_measure()[static_cast<Eigen::Index>(a[k])];
    r.harmonic_measure[i] = m * r.escape_probs[i] / r.value;
    r.adjoint_harmonic_measure[i] = m * escape_star[i] / r.adjoint_value;
  }
  return r;
}

double capacity_value(const ChainModel& chain, const StateSet& a, const StateSet& b) {
  check_pair(chain, a, b);
  return weighted_escape(chain, a, escape_from_chain(chain, a, b));
}

CapacityIdentities capacity_identities(const ChainModel& chain, const StateSet& a, const StateSet& b) {
  CapacityIdentities out;
  out.cap = capacity_value(chain, a, b);
  out.cap_reversed = capacity_value(chain, b, a);
  out.cap_adjoint = capacity_value(adjoint(chain), a, b);
  out.cap_symmetric = capacity_value(symmetric_part(chain), a, b);
  return out;
}

ThreeSetIdentity three_set_identity(const ChainModel& chain, const StateSet& a, const StateSet& b,
                                    const StateSet& c) {
  if (a.empty() || b.empty() || c.empty()) throw Error(ErrorCode::EmptySet, "three-set identity needs nonempty sets");
  if (!disjoint(a, b) || !disjoint(a, c) || !disjoint(b, c)) {
    throw Error(ErrorCode::Overlap, "three-set identity needs disjoint sets");
  }
  const ChainModel sym = symmetric_part(chain);
  ThreeSetIdentity out;
  const double terms[] = {
      capacity_value(chain, a, set_union(b, c)), capacity_value(chain, b, set_union(a, c)),
      capacity_value(chain, c, set_union(a, b)), capacity_value(sym, a, set_union(b, c)),
      capacity_value(sym, b, set_union(a, c)),   capacity_value(sym, c, set_union(a, b)),
  };
  out.forward = terms[0] + terms[1] - terms[2];
  out.symmetric = terms[3] + terms[4] - terms[5];
  out.scale = *std::max_element(std::begin(terms), std::end(terms));

  const StateSet f = set_union(set_union(a, b), c);
  out.covers_space = f.size() == chain.size();
  if (out.covers_space) {
    out.trace_symmetric = out.symmetric;
    return out;
  }
  const TraceChain t = trace(chain, f);
  const ChainModel tsym = symmetric_part(t.chain);
  const StateSet la = t.local(a), lb = t.local(b), lc = t.local(c);
  out.trace_symmetric = chain.mass(f) * (capacity_value(tsym, la, set_union(lb, lc)) +
                                         capacity_value(tsym, lb, set_union(la, lc)) -
                                         capacity_value(tsym, lc, set_union(la, lb)));
  return out;
}

Vector expected_time_integrals(const ChainModel& chain, const StateSet& b, const Vector& g) {
  if (b.empty()) throw Error(ErrorCode::EmptySet, "target set must be nonempty");
  check_in_range(chain, b);
  if (g.size() != static_cast<Eigen::Index>(chain.size())) {
    throw Error(ErrorCode::InvalidArgument, "g must be defined on every state");
  }
  const auto n = chain.size();
  return linalg::solve_dirichlet(chain.generator(), complement(b, n), Vector::Zero(static_cast<Eigen::Index>(n)), g);
}

DualValue expected_time_integral(const ChainModel& chain, StateIndex x, const StateSet& b, const Vector& g) {
  if (contains(b, x)) throw Error(ErrorCode::StateInB, "start state " + chain.space().label(x) + " lies in B");
  DualValue out;
  out.direct = expected_time_integrals(chain, b, g)[static_cast<Eigen::Index>(x)];
  const StateSet a{x};
  const Committor fstar = committor(chain, a, b, ChainKind::Adjoint);
  out.formula = inner(g, fstar.values, chain.stationary()) / capacity_value(chain, a, b);
  return out;
}

DualValue equilibrium_expectation(const ChainModel& chain, const StateSet& a, const StateSet& b, const Vector& g) {
  const CapacityReport cap = capacity(chain, a, b);
  const Vector u = expected_time_integrals(chain, b, g);
  DualValue out;
  for (std::size_t k = 0; k < a.size(); ++k) {
    out.direct += cap.adjoint_harmonic_measure[static_cast<Eigen::Index>(k)] * u[static_cast<Eigen::Index>(a[k])];
  }
  const Committor fstar = committor(chain, a, b, ChainKind::Adjoint);
  out.formula = inner(g, fstar.values, chain.stationary()) / cap.value;
  return out;
}

double point_capacity(const ChainModel& chain, const StateSet& block, StateIndex xi) {
  if (!contains(block, xi)) throw Error(ErrorCode::InvalidArgument, "metapoint must belong to its block");
  const StateSet others = set_difference(block, StateSet{xi});
  if (others.empty()) return std::numeric_limits<double>::infinity();
  const auto caps = kernels::omp::map_indices(
      others.size(), [&](std::size_t k) { return capacity_value(chain, StateSet{others[k]}, StateSet{xi}); });
  return *std::min_element(caps.begin(), caps.end());
}

Vector conditional_expectation(const ChainModel& chain, const std::vector<StateSet>& blocks, const Vector& g) {
  Vector out = Vector::Zero(g.size());
  const Vector& mu = chain.stationary();
  for (const auto& block : blocks) {
    double num = 0.0;
    for (auto x : block) num += g[static_cast<Eigen::Index>(x)] * mu[static_cast<Eigen::Index>(x)];
    const double avg = num / chain.mass(block);
    for (auto x : block) out[static_cast<Eigen::Index>(x)] = avg;
  }
  return out;
}

ThermalizationBound thermalization_bound(const ChainModel& chain, const std::vector<StateSet>& blocks,
                                         const std::vector<StateIndex>& metapoints, const Vector& g, double t) {
  const auto n = chain.size();
  std::vector<int> owner(n, -1);
  for (std::size_t x = 0; x < blocks.size(); ++x) {
    if (blocks[x].empty()) throw Error(ErrorCode::NotAPartition, "empty block");
    for (auto s : blocks[x]) {
      if (s >= n || owner[s] != -1) throw Error(ErrorCode::NotAPartition, "blocks overlap or leave the space");
      owner[s] = static_cast<int>(x);
    }
  }
  if (std::find(owner.begin(), owner.end(), -1) != owner.end()) {
    throw Error(ErrorCode::NotAPartition, "blocks do not cover the state space");
  }
  if (metapoints.size() != blocks.size()) throw Error(ErrorCode::InvalidArgument, "one metapoint per block");
  if (!(t > 0.0)) throw Error(ErrorCode::InvalidArgument, "t must be positive");

  const Vector phi = g - conditional_expectation(chain, blocks, g);
  ThermalizationBound out;
  out.lhs = kernels::omp::time_integral(chain.generator(), phi, t).cwiseAbs().maxCoeff();

  const Vector& mu = chain.stationary();
  for (std::size_t x = 0; x < blocks.size(); ++x) {
    const double cap = point_capacity(chain, blocks[x], metapoints[x]);
    if (std::isinf(cap)) continue;
    double mass = 0.0;
    for (auto s : blocks[x]) mass += std::abs(g[static_cast<Eigen::Index>(s)]) * mu[static_cast<Eigen::Index>(s)];
    out.rhs += 4.0 * mass / cap;
  }
  return out;
}

}  // namespace metapot
