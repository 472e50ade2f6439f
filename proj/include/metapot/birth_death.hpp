#pragma once

// Birth-and-death chains on a grid of mesh 1/N in [a,b] with reversible
// measure nu_N(x) ~ 1/H(x), deep wells where H vanishes with the largest
// exponent, and their limiting tunneling rates.

#include "metapot/ctmc.hpp"
#include "metapot/metastability.hpp"

#include <functional>
#include <string>
#include <vector>

namespace metapot::bd {

struct WellSpec {
  double position = 0.0;
  double exponent = 2.0;
  double radius = 0.0;  // half-width of the neighbourhood where H is an exact power
};

using Function = std::function<double(double)>;

struct Config {
  double a = 0.0;
  double b = 1.0;
  std::vector<WellSpec> wells;  // increasing positions
  Function h;
  Function phi;
  std::function<long(int)> window;  // l_N; floor(sqrt(N)) when empty
};

/// H(x) = |x - a_i|^{alpha_i} where a_i is the closest well (cells split at
/// midpoints between consecutive wells).
Function piecewise_power(const std::vector<WellSpec>& wells);
Function constant_function(double c);
/// c0 + c1 x + c2 x^2 + ...
Function polynomial_function(std::vector<double> coefficients);

Config piecewise_power_config(double a, double b, std::vector<WellSpec> wells, Function phi);

/// alpha = max exponent.
double deep_exponent(const Config& config);

/// Indices (into wells) of the deep wells b_1 < ... < b_kappa.
std::vector<std::size_t> deep_wells(const Config& config);

long window_width(const Config& config, int n);

/// Checks the standing assumptions: a < b, wells ordered inside [a,b] with
/// disjoint neighbourhoods, alpha > 1, at least two deep wells, Phi bounded
/// away from 0 and infinity, H > 0 off the wells and an exact power near
/// them (sampled with step 1/(10 n)).
void validate_config(const Config& config, int n = 1000);

struct Grid {
  std::vector<double> points;  // strictly increasing
  std::vector<int> well;       // index into wells, or -1
  std::size_t index_of_well(std::size_t w) const;
};

/// E_N from the minimal-k construction; seam duplicates merged.
Grid build_state_space(const Config& config, int n);

struct Measure {
  Vector nu;
  double z = 0.0;
};

Measure build_measure(const Config& config, const Grid& grid, int n);

/// Nearest-neighbour rates: down from x at rate Phi(x), up from x to y at
/// rate Phi(y) nu(y) / nu(x).
RateMatrix build_rates(const Config& config, const Grid& grid, const Vector& nu);

struct Chain {
  int n = 0;
  Grid grid;
  Measure measure;
  ChainModel chain;
};

Chain build_chain(const Config& config, int n);

/// 1 / sum_{z=x}^{y-1} 1 / (nu(z) R(z,z+1)) for state indices x < y.
double capacity_1d(const Chain& chain, StateIndex x, StateIndex y);

/// Riemann zeta for s > 1 by Euler-Maclaurin summation.
double zeta(double s);

/// m(b_i) = 1 + sigma_i zeta(alpha), sigma_i = 1 at an endpoint of [a,b],
/// 2 inside. `deep` indexes deep_wells().
double well_mass(const Config& config, std::size_t deep);

/// Sum of m(b_i): the limit of Z_N / N^alpha.
double normalizer_limit(const Config& config);

/// int_lo^hi H/Phi by adaptive Gauss-Kronrod split at wells and cell
/// boundaries; throws QuadratureFailure above 1e-10 estimated error.
double integral_h_over_phi(const Config& config, double lo, double hi);

struct LimitRate {
  std::size_t from = 0;  // deep-well index
  std::size_t to = 0;
  double value = 0.0;
};

/// r(i,i+1) = 1/(m(b_i) int_{b_i}^{b_{i+1}} H/Phi) and
/// r(i+1,i) = 1/(m(b_{i+1}) int_{b_i}^{b_{i+1}} H/Phi).
std::vector<LimitRate> asymptotic_rates(const Config& config);

/// Metastates E^i = E_N cap [b_i - l/N, b_i + l/N] with metapoints b_i.
/// Throws WindowTooWide if two windows share a state.
Partition metastates(const Config& config, const Chain& chain, long ell);

struct ConvergenceRow {
  int n = 0;
  long ell = 0;
  double z_ratio = 0.0;                   // Z_N / N^alpha
  std::vector<double> scaled_rates;       // N^{1+alpha} r_N via Cap/nu, ordered like the limits
  std::vector<double> scaled_rates_trace; // same through the trace chain
  double route_discrepancy = 0.0;         // max relative difference of the two routes
  std::vector<double> relative_error;     // against the limits
  std::vector<double> h1;                 // per deep well
  std::vector<double> h2;                 // per deep well
};

struct ConvergenceTable {
  std::vector<LimitRate> limits;
  double z_limit = 0.0;
  std::vector<ConvergenceRow> rows;  // ordered like the N grid
};

ConvergenceTable finite_n_vs_limit(const Config& config, const std::vector<int>& n_grid);

std::string convergence_csv(const ConvergenceTable& table);

/// The family N -> (chain, metastates) with theta_N = N^{1+alpha}.
ChainFamily family(const Config& config, std::vector<int> n_grid);

}  // namespace metapot::bd
