#pragma once

// Finite-state continuous-time Markov chains: generators, stationary
// measures, jump chains, adjoint and symmetrized dynamics.

#include "metapot/types.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace metapot {

class StateSpace {
 public:
  /// Labels must be unique and there must be at least two of them.
  explicit StateSpace(std::vector<std::string> labels);

  /// States labelled "1", "2", ..., "n".
  static StateSpace numbered(std::size_t n);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::string& label(StateIndex i) const { return labels_.at(i); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  std::optional<StateIndex> find(std::string_view label) const;

  /// Throws UnknownLabel naming the missing label.
  StateIndex index_of(std::string_view label) const;
  StateSet resolve(const std::vector<std::string>& labels) const;

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, StateIndex> index_;
};

struct RateEntry {
  StateIndex from;
  StateIndex to;
  double rate;
};

// Off-diagonal jump rates stored row-major. The diagonal is implied as the
// negative row sum unless an explicit value was supplied (kept only so that
// validation can report inconsistent input).
class RateMatrix {
 public:
  RateMatrix() = default;

  /// Duplicate (from, to) pairs are summed. Entries with from == to are
  /// recorded as explicit diagonal values.
  RateMatrix(std::size_t n, const std::vector<RateEntry>& entries);

  static RateMatrix from_off_diagonal(SparseMatrix off);

  std::size_t size() const noexcept { return static_cast<std::size_t>(off_.rows()); }
  const SparseMatrix& off_diagonal() const noexcept { return off_; }

  /// Off-diagonal rate, or the (explicit or implied) diagonal when from == to.
  double rate(StateIndex from, StateIndex to) const;

  /// Sum of off-diagonal rates out of a state.
  double exit_rate(StateIndex from) const;

  std::optional<double> explicit_diagonal(StateIndex i) const;

  /// L with diagonal equal to minus the off-diagonal row sum.
  SparseMatrix generator() const;

  /// Nonzero off-diagonal entries in row-major order.
  std::vector<RateEntry> entries() const;

 private:
  SparseMatrix off_;
  std::vector<std::optional<double>> diagonal_;
};

enum class ViolationKind { NegativeRate, NonzeroRowSum, ZeroHoldingRate, Reducible, SizeMismatch };

struct Violation {
  ViolationKind kind;
  StateIndex from = 0;
  StateIndex to = 0;
  std::string message;
};

/// Empty result means the generator is valid.
std::vector<Violation> validate_generator(const RateMatrix& rates, const StateSpace& space);

/// Stationary probability vector of a valid irreducible generator.
/// Throws SingularSystem if the system cannot be solved to a residual of 1e-10.
Vector stationary_measure(const RateMatrix& rates, const StateSpace& space);

class ChainModel {
 public:
  /// Validates the generator and computes the stationary measure.
  /// Throws InvalidGenerator listing the violations.
  static ChainModel create(StateSpace space, RateMatrix rates);

  /// As create(), but with a known stationary measure; its residual is
  /// checked instead of solving for it.
  static ChainModel with_stationary(StateSpace space, RateMatrix rates, Vector stationary);

  const StateSpace& space() const noexcept { return space_; }
  std::size_t size() const noexcept { return space_.size(); }
  const RateMatrix& rates() const noexcept { return rates_; }

  /// Generator L with (Lf)(x) = sum_y R(x,y) (f(y) - f(x)).
  const SparseMatrix& generator() const noexcept { return generator_; }

  const Vector& stationary() const noexcept { return stationary_; }
  const Vector& holding() const noexcept { return holding_; }

  /// M(x) = lambda(x) mu(x), invariant for the jump chain.
  const Vector& jump_measure() const noexcept { return jump_measure_; }

  double rate(StateIndex from, StateIndex to) const { return rates_.rate(from, to); }
  double jump_probability(StateIndex from, StateIndex to) const;
  SparseMatrix jump_matrix() const;

  double mass(const StateSet& set) const;

 private:
  ChainModel(StateSpace space, RateMatrix rates, Vector stationary);

  StateSpace space_;
  RateMatrix rates_;
  SparseMatrix generator_;
  Vector stationary_;
  Vector holding_;
  Vector jump_measure_;
};

/// max_x |(mu^T L)(x)| relative to max_x M(x).
double stationarity_residual(const SparseMatrix& generator, const Vector& mu);

/// Time reversal with respect to mu: mu(x) R*(x,y) = mu(y) R(y,x).
ChainModel adjoint(const ChainModel& chain);

/// R^s = (R + R*) / 2, reversible with respect to mu.
ChainModel symmetric_part(const ChainModel& chain);

Vector apply_generator(const ChainModel& chain, const Vector& g);

enum class FormKind {
  Generator,  // <f, L g>_mu
  Dirichlet,  // <f, (-L) f>_mu, g ignored
};

double bilinear_form(const ChainModel& chain, const Vector& f, const Vector& g, FormKind kind);

inline double inner(const Vector& f, const Vector& g, const Vector& mu) {
  return (f.array() * g.array() * mu.array()).sum();
}

}  // namespace metapot
