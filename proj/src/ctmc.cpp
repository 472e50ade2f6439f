#include "metapot/ctmc.hpp"

#include "metapot/error.hpp"
#include "metapot/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace metapot {

// ---------------------------------------------------------------------------
// state sets

StateSet make_set(std::vector<StateIndex> states) {
  std::sort(states.begin(), states.end());
  states.erase(std::unique(states.begin(), states.end()), states.end());
  return states;
}

StateSet set_union(const StateSet& a, const StateSet& b) {
  StateSet out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

StateSet set_difference(const StateSet& a, const StateSet& b) {
  StateSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

StateSet complement(const StateSet& a, std::size_t n) {
  StateSet all(n);
  std::iota(all.begin(), all.end(), StateIndex{0});
  return set_difference(all, a);
}

bool disjoint(const StateSet& a, const StateSet& b) {
  StateSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out.empty();
}

bool contains(const StateSet& a, StateIndex s) { return std::binary_search(a.begin(), a.end(), s); }

bool is_subset(const StateSet& a, const StateSet& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

std::vector<char> membership(const StateSet& a, std::size_t n) {
  std::vector<char> mask(n, 0);
  for (auto s : a) mask.at(s) = 1;
  return mask;
}

Vector indicator(const StateSet& a, std::size_t n) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(n));
  for (auto s : a) v[static_cast<Eigen::Index>(s)] = 1.0;
  return v;
}

// ---------------------------------------------------------------------------
// StateSpace

StateSpace::StateSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "a state space needs at least two states");
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (!index_.emplace(labels_[i], i).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate state label '" + labels_[i] + "'");
    }
  }
}

StateSpace StateSpace::numbered(std::size_t n) {
  std::vector<std::string> labels;
  labels.reserve(n);
  for (std::size_t i = 1; i <= n; ++i) labels.push_back(std::to_string(i));
  return StateSpace(std::move(labels));
}

std::optional<StateIndex> StateSpace::find(std::string_view label) const {
  const auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

StateIndex StateSpace::index_of(std::string_view label) const {
  if (auto i = find(label)) return *i;
  throw Error(ErrorCode::UnknownLabel, "unknown state label '" + std::string(label) + "'");
}

StateSet StateSpace::resolve(const std::vector<std::string>& labels) const {
  std::vector<StateIndex> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(index_of(l));
  return make_set(std::move(out));
}

// ---------------------------------------------------------------------------
// RateMatrix

RateMatrix::RateMatrix(std::size_t n, const std::vector<RateEntry>& entries)
    : off_(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)), diagonal_(n) {
  std::vector<Triplet> trips;
  trips.reserve(entries.size());
  for (const auto& e : entries) {
    if (e.from >= n || e.to >= n) {
      throw Error(ErrorCode::InvalidArgument, "rate entry refers to a state outside the space");
    }
    if (e.from == e.to) {
      diagonal_[e.from] = diagonal_[e.from].value_or(0.0) + e.rate;
    } else {
      trips.emplace_back(static_cast<int>(e.from), static_cast<int>(e.to), e.rate);
    }
  }
  off_.setFromTriplets(trips.begin(), trips.end());
  off_.prune(0.0);
  off_.makeCompressed();
}

RateMatrix RateMatrix::from_off_diagonal(SparseMatrix off) {
  RateMatrix r;
  off.prune(0.0);
  for (Eigen::Index i = 0; i < off.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(off, i); it; ++it) {
      if (it.row() == it.col()) it.valueRef() = 0.0;
    }
  }
  off.prune(0.0);
  off.makeCompressed();
  r.off_ = std::move(off);
  r.diagonal_.assign(static_cast<std::size_t>(r.off_.rows()), std::nullopt);
  return r;
}

double RateMatrix::exit_rate(StateIndex from) const {
  double s = 0.0;
  for (SparseMatrix::InnerIterator it(off_, static_cast<Eigen::Index>(from)); it; ++it) s += it.value();
  return s;
}

double RateMatrix::rate(StateIndex from, StateIndex to) const {
  if (from == to) return diagonal_.at(from).value_or(-exit_rate(from));
  return off_.coeff(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(to));
}

std::optional<double> RateMatrix::explicit_diagonal(StateIndex i) const { return diagonal_.at(i); }

SparseMatrix RateMatrix::generator() const {
  SparseMatrix l = off_;
  SparseMatrix diag(off_.rows(), off_.cols());
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(off_.rows()));
  for (Eigen::Index i = 0; i < off_.rows(); ++i) {
    trips.emplace_back(static_cast<int>(i), static_cast<int>(i), -exit_rate(static_cast<StateIndex>(i)));
  }
  diag.setFromTriplets(trips.begin(), trips.end());
  l += diag;
  l.makeCompressed();
  return l;
}

std::vector<RateEntry> RateMatrix::entries() const {
  std::vector<RateEntry> out;
  out.reserve(static_cast<std::size_t>(off_.nonZeros()));
  for (Eigen::Index i = 0; i < off_.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(off_, i); it; ++it) {
      out.push_back({static_cast<StateIndex>(it.row()), static_cast<StateIndex>(it.col()), it.value()});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// validation

namespace {

std::vector<char> reachable(const SparseMatrix& adj, bool transpose) {
  const auto n = static_cast<std::size_t>(adj.rows());
  std::vector<std::vector<StateIndex>> nbrs(n);
  for (Eigen::Index i = 0; i < adj.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(adj, i); it; ++it) {
      if (it.value() <= 0.0) continue;
      const auto from = static_cast<StateIndex>(it.row());
      const auto to = static_cast<StateIndex>(it.col());
      if (transpose) {
        nbrs[to].push_back(from);
      } else {
        nbrs[from].push_back(to);
      }
    }
  }
  std::vector<char> seen(n, 0);
  std::vector<StateIndex> stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    const auto s = stack.back();
    stack.pop_back();
    for (auto t : nbrs[s]) {
      if (!seen[t]) {
        seen[t] = 1;
        stack.push_back(t);
      }
    }
  }
  return seen;
}

std::string pair_label(const StateSpace& space, StateIndex a, StateIndex b) {
  return "(" + space.label(a) + "," + space.label(b) + ")";
}

}  // namespace

std::vector<Violation> validate_generator(const RateMatrix& rates, const StateSpace& space) {
  std::vector<Violation> out;
  if (rates.size() != space.size()) {
    out.push_back({ViolationKind::SizeMismatch, 0, 0,
                   "rate matrix has " + std::to_string(rates.size()) + " states, space has " +
                       std::to_string(space.size())});
    return out;
  }
  for (const auto& e : rates.entries()) {
    if (e.rate < 0.0 || !std::isfinite(e.rate)) {
      out.push_back({ViolationKind::NegativeRate, e.from, e.to,
                     "negative off-diagonal at " + pair_label(space, e.from, e.to)});
    }
  }
  for (StateIndex i = 0; i < rates.size(); ++i) {
    const double exit = rates.exit_rate(i);
    if (auto d = rates.explicit_diagonal(i)) {
      const double sum = *d + exit;
      if (std::abs(sum) > 1e-14 * std::max(1.0, std::abs(exit))) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "nonzero row sum " << sum << " at " << space.label(i);
        out.push_back({ViolationKind::NonzeroRowSum, i, i, msg.str()});
      }
    }
    if (!(exit > 0.0) || !std::isfinite(exit)) {
      out.push_back({ViolationKind::ZeroHoldingRate, i, i, "zero holding rate at " + space.label(i)});
    }
  }
  const auto fwd = reachable(rates.off_diagonal(), false);
  const auto bwd = reachable(rates.off_diagonal(), true);
  const bool strongly_connected =
      std::all_of(fwd.begin(), fwd.end(), [](char c) { return c != 0; }) &&
      std::all_of(bwd.begin(), bwd.end(), [](char c) { return c != 0; });
  if (!strongly_connected) out.push_back({ViolationKind::Reducible, 0, 0, "reducible"});
  return out;
}

// ---------------------------------------------------------------------------
// stationary measure

double stationarity_residual(const SparseMatrix& generator, const Vector& mu) {
  const Vector r = generator.transpose() * mu;
  double scale = 0.0;
  for (Eigen::Index i = 0; i < generator.rows(); ++i) {
    scale = std::max(scale, -generator.coeff(i, i) * mu[i]);
  }
  return r.cwiseAbs().maxCoeff() / std::max(scale, std::numeric_limits<double>::min());
}

namespace {

Vector solve_stationary(const SparseMatrix& generator) {
  const auto n = generator.rows();
  // L^T mu = 0 with the last equation replaced by sum(mu) = 1.
  ColSparseMatrix lt = ColSparseMatrix(generator.transpose());
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(lt.nonZeros() + n));
  for (Eigen::Index j = 0; j < lt.outerSize(); ++j) {
    for (ColSparseMatrix::InnerIterator it(lt, j); it; ++it) {
      if (it.row() != n - 1) trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    }
  }
  for (Eigen::Index j = 0; j < n; ++j) trips.emplace_back(static_cast<int>(n - 1), static_cast<int>(j), 1.0);
  ColSparseMatrix a(n, n);
  a.setFromTriplets(trips.begin(), trips.end());
  a.makeCompressed();

  Vector rhs = Vector::Zero(n);
  rhs[n - 1] = 1.0;
  Vector mu = linalg::solve(a, rhs);
  // a couple of refinement sweeps; cheap relative to the factorization
  for (int sweep = 0; sweep < 2 && stationarity_residual(generator, mu) > 1e-14; ++sweep) {
    const Vector r = rhs - a * mu;
    mu += linalg::solve(a, r);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (mu[i] < 0.0) {
      if (mu[i] < -1e-13) throw Error(ErrorCode::SingularSystem, "stationary solve produced negative mass");
      mu[i] = 0.0;
    }
  }
  mu /= mu.sum();
  if (stationarity_residual(generator, mu) > 1e-10) {
    throw Error(ErrorCode::SingularSystem, "stationary residual above 1e-10");
  }
  return mu;
}

[[noreturn]] void throw_violations(const std::vector<Violation>& v) {
  std::string msg;
  for (const auto& x : v) {
    if (!msg.empty()) msg += "; ";
    msg += x.message;
  }
  throw Error(ErrorCode::InvalidGenerator, msg);
}

}  // namespace

Vector stationary_measure(const RateMatrix& rates, const StateSpace& space) {
  const auto violations = validate_generator(rates, space);
  for (const auto& v : violations) {
    if (v.kind == ViolationKind::Reducible) throw Error(ErrorCode::SingularSystem, "generator is reducible");
  }
  if (!violations.empty()) throw_violations(violations);
  return solve_stationary(rates.generator());
}

// ---------------------------------------------------------------------------
// ChainModel

ChainModel::ChainModel(StateSpace space, RateMatrix rates, Vector stationary)
    : space_(std::move(space)),
      rates_(std::move(rates)),
      generator_(rates_.generator()),
      stationary_(std::move(stationary)) {
  holding_ = -generator_.diagonal();
  jump_measure_ = holding_.cwiseProduct(stationary_);
}

ChainModel ChainModel::create(StateSpace space, RateMatrix rates) {
  const auto violations = validate_generator(rates, space);
  if (!violations.empty()) throw_violations(violations);
  Vector mu = solve_stationary(rates.generator());
  // implied diagonal only; an explicit one has been checked above
  RateMatrix clean = RateMatrix::from_off_diagonal(rates.off_diagonal());
  return ChainModel(std::move(space), std::move(clean), std::move(mu));
}

ChainModel ChainModel::with_stationary(StateSpace space, RateMatrix rates, Vector stationary) {
  const auto violations = validate_generator(rates, space);
  if (!violations.empty()) throw_violations(violations);
  if (stationary.size() != static_cast<Eigen::Index>(space.size()) || (stationary.array() < 0.0).any() ||
      std::abs(stationary.sum() - 1.0) > 1e-12) {
    throw Error(ErrorCode::InvalidArgument, "supplied stationary measure is not a probability vector");
  }
  RateMatrix clean = RateMatrix::from_off_diagonal(rates.off_diagonal());
  if (stationarity_residual(clean.generator(), stationary) > 1e-10) {
    throw Error(ErrorCode::InvalidArgument, "supplied measure is not stationary (residual > 1e-10)");
  }
  return ChainModel(std::move(space), std::move(clean), std::move(stationary));
}

double ChainModel::jump_probability(StateIndex from, StateIndex to) const {
  if (from == to) return 0.0;
  return rates_.rate(from, to) / holding_[static_cast<Eigen::Index>(from)];
}

SparseMatrix ChainModel::jump_matrix() const {
  SparseMatrix p = rates_.off_diagonal();
  for (Eigen::Index i = 0; i < p.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(p, i); it; ++it) it.valueRef() /= holding_[i];
  }
  return p;
}

double ChainModel::mass(const StateSet& set) const {
  double m = 0.0;
  for (auto s : set) m += stationary_[static_cast<Eigen::Index>(s)];
  return m;
}

// ---------------------------------------------------------------------------
// adjoint / symmetric part

namespace {

SparseMatrix adjoint_off_diagonal(const ChainModel& chain) {
  const Vector& mu = chain.stationary();
  SparseMatrix t = SparseMatrix(chain.rates().off_diagonal().transpose());
  for (Eigen::Index i = 0; i < t.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(t, i); it; ++it) {
      it.valueRef() = mu[it.col()] * it.value() / mu[it.row()];
    }
  }
  return t;
}

}  // namespace

ChainModel adjoint(const ChainModel& chain) {
  return ChainModel::with_stationary(chain.space(), RateMatrix::from_off_diagonal(adjoint_off_diagonal(chain)),
                                     chain.stationary());
}

ChainModel symmetric_part(const ChainModel& chain) {
  SparseMatrix s = 0.5 * (SparseMatrix(chain.rates().off_diagonal()) + adjoint_off_diagonal(chain));
  return ChainModel::with_stationary(chain.space(), RateMatrix::from_off_diagonal(std::move(s)),
                                     chain.stationary());
}

Vector apply_generator(const ChainModel& chain, const Vector& g) {
  const SparseMatrix& off = chain.rates().off_diagonal();
  Vector out(g.size());
  for (Eigen::Index i = 0; i < off.outerSize(); ++i) {
    double acc = 0.0;
    for (SparseMatrix::InnerIterator it(off, i); it; ++it) acc += it.value() * (g[it.col()] - g[i]);
    out[i] = acc;
  }
  return out;
}

double bilinear_form(const ChainModel& chain, const Vector& f, const Vector& g, FormKind kind) {
  const auto n = static_cast<Eigen::Index>(chain.size());
  if (f.size() != n || (kind == FormKind::Generator && g.size() != n)) {
    throw Error(ErrorCode::InvalidArgument, "function length does not match the state space");
  }
  switch (kind) {
    case FormKind::Generator:
      return inner(f, apply_generator(chain, g), chain.stationary());
    case FormKind::Dirichlet:
      return -inner(f, apply_generator(chain, f), chain.stationary());
  }
  return 0.0;
}

}  // namespace metapot
