#pragma once

// Hitting probabilities, committors, capacities and the equilibrium-measure
// identities for finite nonreversible chains.

#include "metapot/ctmc.hpp"

#include <limits>
#include <vector>

namespace metapot {

enum class ChainKind { Forward, Adjoint };

struct Committor {
  Vector values;  // P_x[H_A < H_B]; 1 on A, 0 on B
  StateSet source;
  StateSet sink;
  ChainKind kind = ChainKind::Forward;
};

/// Solves the Dirichlet problem (L f) = 0 off A u B, f = 1 on A, f = 0 on B
/// (L* for the adjoint kind).
Committor committor(const ChainModel& chain, const StateSet& a, const StateSet& b,
                    ChainKind kind = ChainKind::Forward);

/// max_{x not in A u B} |(L f)(x)| / lambda(x).
double harmonic_residual(const ChainModel& chain, const Committor& c);

/// P_x[H+_B < H+_A] for x in A, from a single step plus the committor of B
/// over A.
double escape_probability(const ChainModel& chain, StateIndex x, const StateSet& a, const StateSet& b);

/// Escape probabilities for every state of A (same order as A), sharing one
/// committor solve.
Vector escape_probabilities(const ChainModel& chain, const StateSet& a, const StateSet& b);

struct CapacityReport {
  double value = 0.0;
  StateSet a;
  StateSet b;
  Vector escape_probs;              // indexed like `a`
  Vector harmonic_measure;          // nu_AB on A, indexed like `a`
  Vector adjoint_harmonic_measure;  // nu*_AB on A, indexed like `a`
  double adjoint_value = 0.0;       // Cap*(A,B), used to normalize nu*_AB
};

/// Cap(A,B) = sum_{x in A} M(x) P_x[H+_B < H+_A].
CapacityReport capacity(const ChainModel& chain, const StateSet& a, const StateSet& b);

/// Capacity value only (skips the adjoint harmonic measure).
double capacity_value(const ChainModel& chain, const StateSet& a, const StateSet& b);

struct CapacityIdentities {
  double cap = 0.0;            // Cap(A,B)
  double cap_adjoint = 0.0;    // Cap*(A,B)
  double cap_reversed = 0.0;   // Cap(B,A)
  double cap_symmetric = 0.0;  // Cap^s(A,B)
};

CapacityIdentities capacity_identities(const ChainModel& chain, const StateSet& a, const StateSet& b);

// forward = symmetric only when A u B u C = E in general. Tracing on
// F = A u B u C first and symmetrizing the trace chain gives a form that holds
// for every disjoint triple: forward = mu(F) * (same with Cap of (L_F)^s).
struct ThreeSetIdentity {
  double forward = 0.0;          // Cap(A,BuC) + Cap(B,AuC) - Cap(C,AuB)
  double symmetric = 0.0;        // same with Cap^s
  double trace_symmetric = 0.0;  // mu(F) times the same with (L_F)^s
  double scale = 0.0;            // largest capacity involved
  bool covers_space = false;     // A u B u C = E
  double residual() const { return forward - symmetric; }
  double trace_residual() const { return forward - trace_symmetric; }
};

ThreeSetIdentity three_set_identity(const ChainModel& chain, const StateSet& a, const StateSet& b,
                                    const StateSet& c);

struct DualValue {
  double direct = 0.0;   // linear solve of the Poisson problem
  double formula = 0.0;  // <g, f*>_mu / Cap
  double value() const { return direct; }
};

/// u with (L u) = -g off B, u = 0 on B: u(x) = E_x[int_0^{H_B} g].
Vector expected_time_integrals(const ChainModel& chain, const StateSet& b, const Vector& g);

/// E_x[int_0^{H_B} g(X_s) ds] computed both directly and through the
/// adjoint committor and capacity.
DualValue expected_time_integral(const ChainModel& chain, StateIndex x, const StateSet& b, const Vector& g);

/// E_{nu*_AB}[int_0^{H_B} g] against <g, f*_AB>_mu / Cap(A,B).
DualValue equilibrium_expectation(const ChainModel& chain, const StateSet& a, const StateSet& b,
                                  const Vector& g);

/// Cap(xi) = min over x in block \ {xi} of Cap({x},{xi}); +inf for a
/// singleton block.
double point_capacity(const ChainModel& chain, const StateSet& block, StateIndex xi);

struct ThermalizationBound {
  double lhs = 0.0;
  double rhs = 0.0;
};

/// sup_x |E_x[int_0^t (g - <g|pi>_mu)(X_s) ds]| (by uniformization) against
/// 4 sum_x <|g| 1{A^x}>_mu / Cap(xi_x).
ThermalizationBound thermalization_bound(const ChainModel& chain, const std::vector<StateSet>& blocks,
                                         const std::vector<StateIndex>& metapoints, const Vector& g,
                                         double t);

/// <g|pi>_mu: block-wise mu-average of g.
Vector conditional_expectation(const ChainModel& chain, const std::vector<StateSet>& blocks, const Vector& g);

}  // namespace metapot
