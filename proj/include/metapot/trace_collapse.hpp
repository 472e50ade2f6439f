#pragma once

// Trace of a chain on a subset, collapse of a set to a single state, and
// mean set rates of the trace process.

#include "metapot/ctmc.hpp"

#include <string>

namespace metapot {

struct TraceChain {
  ChainModel chain;  // state i of `chain` is base state states[i]
  StateSet states;   // F in base indices

  /// Base-index set to indices of the trace chain. Throws SetsNotInF.
  StateSet local(const StateSet& base_set) const;
};

/// R^F(x,y) = R(x,y) + sum_{z not in F} R(x,z) P_z[H_F = H_y], with the
/// stationary measure mu restricted to F and renormalized.
TraceChain trace(const ChainModel& chain, const StateSet& f);

/// Label given to the collapsed state: "#collapsed", with a numeric suffix
/// appended if the base space already uses it.
std::string collapsed_label(const StateSpace& space);

struct CollapsedChain {
  ChainModel chain;        // states: E \ B in base order, then the collapsed state
  StateSet collapsed;      // B in base indices
  StateSet kept;           // E \ B in base indices
  StateIndex dagger = 0;   // index of the collapsed state in `chain`

  /// Index in `chain` of a base state (B maps to dagger).
  StateIndex map(StateIndex base) const;

  /// Bar map: value on B (assumed constant) goes to the collapsed state.
  Vector project(const Vector& base_values) const;
};

CollapsedChain collapse(const ChainModel& chain, const StateSet& b);

struct MeanSetRate {
  double via_trace = 0.0;   // mu_F-average of summed trace rates
  double via_return = 0.0;  // (1/mu(A)) sum_A M(x) P_x[H+_F = H+_B]
  double value() const { return via_return; }
};

/// r_F(A,B), computed through the trace rates and through return
/// probabilities. F = E is allowed (the trace is the chain itself).
MeanSetRate mean_set_rate(const ChainModel& chain, const StateSet& f, const StateSet& a, const StateSet& b);

/// Trace rates summed between sets, for every pair of blocks of a family
/// of disjoint subsets of F = union of blocks: entry (x,y) is r_F(A^x, A^y)
/// (zero diagonal). Uses a single trace computation.
DenseMatrix mean_set_rate_matrix(const ChainModel& chain, const std::vector<StateSet>& blocks);

/// Max entrywise difference between the rate matrices of
/// collapse(trace(chain, F), B) and trace(collapse(chain, B), (F \ B) + d).
/// Requires B a nonempty proper subset of F and F a proper subset of E.
double verify_trace_collapse_commute(const ChainModel& chain, const StateSet& f, const StateSet& b);

}  // namespace metapot
