#pragma once

// Finite-N diagnostics for tunneling: scaled mean set rates (H0),
// thermalization inside wells (H1), negligible residual mass (H2), the
// capacity-ratio bounds on excursion integrals, and the adjoint relations.

#include "metapot/ctmc.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace metapot {

struct Partition {
  std::vector<StateSet> metastates;
  std::vector<StateIndex> metapoints;
  StateSet delta;  // states in no metastate

  std::size_t size() const noexcept { return metastates.size(); }
  StateSet all() const;            // union of the metastates
  StateSet others(std::size_t x) const;  // union of the metastates other than x
};

/// Validates (disjoint, nonempty, at least two metastates, metapoints inside
/// their metastates) and fills `delta`. Throws NotAPartition.
Partition make_partition(std::size_t n, std::vector<StateSet> metastates, std::vector<StateIndex> metapoints);

struct FamilyMember {
  ChainModel chain;
  Partition partition;
};

struct ChainFamily {
  std::function<FamilyMember(int)> build;
  std::function<double(int)> time_scale;  // theta_N
  std::vector<int> n_grid;                // increasing
};

/// Least-squares fit v_N = r + c N^{-p}, p scanned over (0, 4].
struct Extrapolation {
  double limit = 0.0;
  double coefficient = 0.0;
  double exponent = 0.0;
  double rms_residual = 0.0;
};

Extrapolation extrapolate_power_law(const std::vector<int>& n, const std::vector<double>& values);

struct SequenceCheck {
  std::vector<int> n;
  std::vector<double> values;
  Extrapolation extrapolation;
  bool cauchy = false;      // last two values within the tolerance (relative)
  bool decreasing = false;  // strictly decreasing along the grid
};

struct H0Options {
  double cauchy_tolerance = 1e-2;
  double zero_tolerance = 1e-12;  // limits below this are reported as 0
};

/// theta_N r_N(E^x, E^y), traces on the union of the metastates.
SequenceCheck check_h0(const ChainFamily& family, std::size_t x, std::size_t y, const H0Options& opts = {});

/// Cap_N(E^x, others) / Cap_N(xi_x); 0 for a singleton metastate.
SequenceCheck check_h1(const ChainFamily& family, std::size_t x);

/// mu_N(Delta_N) / mu_N(E^x).
SequenceCheck check_h2(const ChainFamily& family, std::size_t x);

/// r_F(E^x, E^y) for all pairs, F = union of the metastates.
DenseMatrix metastate_rates(const ChainModel& chain, const Partition& partition);

double h1_ratio(const ChainModel& chain, const Partition& partition, std::size_t x);
double h2_ratio(const ChainModel& chain, const Partition& partition, std::size_t x);

struct ExcursionBounds {
  double lhs_rate_integral = 0.0;  // sup_eta E_eta[int_0^{H_xi} R(., others) 1{E^x}]
  double lhs_occupation = 0.0;     // r(E^x, others) sup_eta E_eta[time in E^x before H_xi]
  double rhs = 0.0;                // Cap(E^x, others) / Cap(xi_x)
  bool holds(double tol = 1e-9) const { return lhs_rate_integral <= rhs + tol && lhs_occupation <= rhs + tol; }
};

ExcursionBounds excursion_bounds(const ChainModel& chain, const Partition& partition, std::size_t x);

struct SChain {
  DenseMatrix rates;                 // r_F(E^x, E^y)
  std::optional<ChainModel> chain;   // absent when the rates are not irreducible
  Vector metastate_mass;             // mu(E^x), normalized over the metastates
  double stationary_discrepancy = 0.0;  // max |pi_S - metastate_mass|, NaN without a chain
};

SChain collapsed_s_chain(const ChainModel& chain, const Partition& partition);

/// max over x != y of |mu(E^x) r*(E^x,E^y) - mu(E^y) r(E^y,E^x)| relative to
/// the larger side, r* computed on the adjoint chain.
double adjoint_balance_residual(const ChainModel& chain, const Partition& partition);

struct TunnelingRow {
  int n = 0;
  double theta = 0.0;
  DenseMatrix scaled_rates;       // theta_N r_N(E^x,E^y)
  std::vector<double> mass;       // mu_N(E^x)
  std::vector<double> h1;         // per x
  std::vector<double> h2;         // per x
  std::vector<ExcursionBounds> excursions;  // per x (empty unless requested)
  double adjoint_residual = 0.0;
};

struct TunnelingReport {
  std::vector<TunnelingRow> rows;   // ordered like the N grid
  DenseMatrix limit_rates;          // extrapolated r(x,y)
  std::vector<double> limit_mass;   // extrapolated m(x), normalized
};

struct TunnelingOptions {
  bool excursion_bounds = true;
  double zero_tolerance = 1e-12;
};

/// Per-N analysis run concurrently over the grid; rows are merged in grid
/// order.
TunnelingReport tunneling_report(const ChainFamily& family, const TunnelingOptions& opts = {});

/// max_x |sum_y m(y) r(y,x) - m(x) sum_y r(x,y)| relative to the largest
/// outflow m(x) sum_y r(x,y). Throws AbsorbingState if some x has
/// sum_y r(x,y) <= zero_tolerance.
double limit_stationarity_residual(const DenseMatrix& rates, const std::vector<double>& mass,
                                   double zero_tolerance = 1e-12);

/// One row per N and quantity: n,quantity,x,y,value.
std::string tunneling_csv(const TunnelingReport& report);

}  // namespace metapot
