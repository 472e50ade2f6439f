#include "metapot/birth_death.hpp"

#include "metapot/error.hpp"
#include "metapot/format.hpp"
#include "metapot/kernels.hpp"
#include "metapot/trace_collapse.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace metapot::bd {

namespace {

constexpr double kFuzz = 1e-9;

bool at_endpoint(const Config& c, double x) {
  const double tol = 1e-12 * std::max(1.0, c.b - c.a);
  return std::abs(x - c.a) <= tol || std::abs(x - c.b) <= tol;
}

}  // namespace

Function piecewise_power(const std::vector<WellSpec>& wells) {
  return [wells](double x) {
    std::size_t i = 0;
    while (i + 1 < wells.size() && x > 0.5 * (wells[i].position + wells[i + 1].position)) ++i;
    return std::pow(std::abs(x - wells[i].position), wells[i].exponent);
  };
}

Function constant_function(double c) {
  return [c](double) { return c; };
}

Function polynomial_function(std::vector<double> coefficients) {
  return [coefficients = std::move(coefficients)](double x) {
    double acc = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * x + *it;
    return acc;
  };
}

Config piecewise_power_config(double a, double b, std::vector<WellSpec> wells, Function phi) {
  Config c;
  c.a = a;
  c.b = b;
  c.h = piecewise_power(wells);
  c.wells = std::move(wells);
  c.phi = std::move(phi);
  return c;
}

double deep_exponent(const Config& config) {
  double alpha = 0.0;
  for (const auto& w : config.wells) alpha = std::max(alpha, w.exponent);
  return alpha;
}

std::vector<std::size_t> deep_wells(const Config& config) {
  const double alpha = deep_exponent(config);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < config.wells.size(); ++i) {
    if (config.wells[i].exponent == alpha) out.push_back(i);
  }
  return out;
}

long window_width(const Config& config, int n) {
  if (config.window) return config.window(n);
  return static_cast<long>(std::floor(std::sqrt(static_cast<double>(n))));
}

void validate_config(const Config& c, int n) {
  if (!(c.a < c.b)) throw Error(ErrorCode::DegenerateInterval, "interval needs a < b");
  if (n < 1) throw Error(ErrorCode::DegenerateInterval, "N must be at least 1");
  if (!c.h || !c.phi) throw Error(ErrorCode::InvalidArgument, "H and Phi must be given");
  if (c.wells.empty()) throw Error(ErrorCode::InvalidArgument, "no wells");
  for (std::size_t i = 0; i < c.wells.size(); ++i) {
    const auto& w = c.wells[i];
    if (w.position < c.a || w.position > c.b) throw Error(ErrorCode::InvalidArgument, "well outside [a,b]");
    if (!(w.exponent > 0.0)) throw Error(ErrorCode::InvalidArgument, "well exponents must be positive");
    if (!(w.radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "well radius must be positive");
    if (i > 0) {
      const auto& prev = c.wells[i - 1];
      if (!(prev.position < w.position)) throw Error(ErrorCode::OutOfOrder, "wells must be strictly increasing");
      if (prev.position + prev.radius > w.position - w.radius) {
        throw Error(ErrorCode::InvalidArgument, "well neighbourhoods overlap");
      }
    }
  }
  if (!(deep_exponent(c) > 1.0)) throw Error(ErrorCode::InvalidArgument, "the deepest exponent must exceed 1");
  if (deep_wells(c).size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two deep wells");

  // exact power near each well
  const double step = 1.0 / (10.0 * n);
  for (const auto& w : c.wells) {
    const double lo = std::max(c.a, w.position - w.radius);
    const double hi = std::min(c.b, w.position + w.radius);
    for (double x = lo; x <= hi; x += step) {
      const double expect = std::pow(std::abs(x - w.position), w.exponent);
      if (std::abs(c.h(x) - expect) > 1e-12 * std::max(1.0, expect)) {
        throw Error(ErrorCode::InvalidArgument, "H is not |x - a_i|^alpha_i near the well at " + format_number(w.position));
      }
    }
  }
  // H > 0 off the wells, Phi bounded
  const int samples = std::max(10000, 10 * n);
  double phi_min = std::numeric_limits<double>::infinity();
  double phi_max = 0.0;
  for (int k = 0; k <= samples; ++k) {
    const double x = c.a + (c.b - c.a) * k / samples;
    const double p = c.phi(x);
    if (!std::isfinite(p)) throw Error(ErrorCode::InvalidArgument, "Phi is not finite");
    phi_min = std::min(phi_min, p);
    phi_max = std::max(phi_max, p);
    const bool near_well = std::any_of(c.wells.begin(), c.wells.end(),
                                       [&](const WellSpec& w) { return std::abs(x - w.position) < 1e-12; });
    const double hv = c.h(x);
    if (!std::isfinite(hv) || hv < 0.0 || (!near_well && hv == 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "H must be positive off the wells (fails at " + format_number(x) + ")");
    }
  }
  if (!(phi_min > 0.0)) throw Error(ErrorCode::InvalidArgument, "Phi must be bounded away from 0");
}

std::size_t Grid::index_of_well(std::size_t w) const {
  for (std::size_t i = 0; i < well.size(); ++i) {
    if (well[i] == static_cast<int>(w)) return i;
  }
  throw Error(ErrorCode::InvalidArgument, "well not on the grid");
}

Grid build_state_space(const Config& c, int n) {
  if (!(c.a < c.b) || n < 1) throw Error(ErrorCode::DegenerateInterval, "need a < b and N >= 1");
  if (c.wells.empty()) throw Error(ErrorCode::InvalidArgument, "no wells");
  const double dn = static_cast<double>(n);
  const auto m = c.wells.size();

  std::vector<std::pair<double, int>> pts;
  auto push = [&](double x, int w) { pts.emplace_back(x, w); };

  const double a1 = c.wells.front().position;
  const long k0 = static_cast<long>(std::floor(dn * (a1 - c.a) + kFuzz));
  for (long j = k0; j >= 1; --j) push(a1 - j / dn, -1);
  push(a1, 0);

  for (std::size_t i = 0; i + 1 < m; ++i) {
    const double lo = c.wells[i].position;
    const double hi = c.wells[i + 1].position;
    const long k = static_cast<long>(std::floor(0.5 * dn * (hi - lo) + kFuzz));
    for (long j = 1; j <= k; ++j) push(lo + j / dn, -1);
    for (long j = k; j >= 1; --j) push(hi - j / dn, -1);
    push(hi, static_cast<int>(i + 1));
  }

  const double am = c.wells.back().position;
  const long km = static_cast<long>(std::floor(dn * (c.b - am) + kFuzz));
  for (long j = 1; j <= km; ++j) push(am + j / dn, -1);

  Grid g;
  for (const auto& [x, w] : pts) {
    if (!g.points.empty() && x - g.points.back() <= kFuzz / dn) {
      if (w >= 0) {
        g.points.back() = x;
        g.well.back() = w;
      }
      continue;
    }
    if (!g.points.empty() && x < g.points.back()) {
      throw Error(ErrorCode::DegenerateInterval, "grid points out of order; wells closer than 1/N");
    }
    g.points.push_back(x);
    g.well.push_back(w);
  }
  if (g.points.size() < 2) throw Error(ErrorCode::DegenerateInterval, "grid has fewer than two states");
  return g;
}

Measure build_measure(const Config& c, const Grid& g, int n) {
  Measure out;
  out.nu.resize(static_cast<Eigen::Index>(g.points.size()));
  for (std::size_t i = 0; i < g.points.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    if (g.well[i] >= 0) {
      out.nu[k] = std::pow(static_cast<double>(n), c.wells[static_cast<std::size_t>(g.well[i])].exponent);
    } else {
      out.nu[k] = 1.0 / c.h(g.points[i]);
    }
  }
  out.z = out.nu.sum();
  out.nu /= out.z;
  return out;
}

RateMatrix build_rates(const Config& c, const Grid& g, const Vector& nu) {
  std::vector<RateEntry> entries;
  entries.reserve(2 * g.points.size());
  for (std::size_t i = 0; i + 1 < g.points.size(); ++i) {
    const auto x = static_cast<Eigen::Index>(i);
    const double phi_y = c.phi(g.points[i + 1]);
    entries.push_back({i + 1, i, phi_y});
    entries.push_back({i, i + 1, phi_y * nu[x + 1] / nu[x]});
  }
  return RateMatrix(g.points.size(), entries);
}

Chain build_chain(const Config& c, int n) {
  validate_config(c, n);
  Grid g = build_state_space(c, n);
  Measure m = build_measure(c, g, n);
  RateMatrix r = build_rates(c, g, m.nu);
  std::vector<std::string> labels;
  labels.reserve(g.points.size());
  for (double x : g.points) labels.push_back(format_number(x));
  ChainModel model = ChainModel::with_stationary(StateSpace(std::move(labels)), std::move(r), m.nu);
  return Chain{n, std::move(g), std::move(m), std::move(model)};
}

double capacity_1d(const Chain& chain, StateIndex x, StateIndex y) {
  if (!(x < y)) throw Error(ErrorCode::OutOfOrder, "capacity_1d needs x < y");
  if (y >= chain.chain.size()) throw Error(ErrorCode::InvalidArgument, "state index out of range");
  const Vector& nu = chain.chain.stationary();
  double resistance = 0.0;
  for (StateIndex z = x; z < y; ++z) {
    resistance += 1.0 / (nu[static_cast<Eigen::Index>(z)] * chain.chain.rate(z, z + 1));
  }
  return 1.0 / resistance;
}

double zeta(double s) {
  if (!(s > 1.0)) throw Error(ErrorCode::InvalidArgument, "zeta needs s > 1");
  constexpr int m = 20;
  double sum = 0.0;
  for (int k = m - 1; k >= 1; --k) sum += std::pow(static_cast<double>(k), -s);
  const double dm = m;
  sum += std::pow(dm, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(dm, -s);
  // B_{2j} / (2j)!
  static constexpr double coef[] = {1.0 / 12.0,         -1.0 / 720.0,           1.0 / 30240.0,
                                    -1.0 / 1209600.0,   1.0 / 47900160.0,       -691.0 / 1307674368000.0};
  double rising = s;  // s (s+1) ... (s+2j-2)
  double power = std::pow(dm, -s - 1.0);
  for (int j = 0; j < 6; ++j) {
    sum += coef[j] * rising * power;
    rising *= (s + 2 * j + 1) * (s + 2 * j + 2);
    power /= dm * dm;
  }
  return sum;
}

double well_mass(const Config& c, std::size_t deep) {
  const auto idx = deep_wells(c).at(deep);
  const double sigma = at_endpoint(c, c.wells[idx].position) ? 1.0 : 2.0;
  return 1.0 + sigma * zeta(deep_exponent(c));
}

double normalizer_limit(const Config& c) {
  double total = 0.0;
  for (std::size_t i = 0; i < deep_wells(c).size(); ++i) total += well_mass(c, i);
  return total;
}

double integral_h_over_phi(const Config& c, double lo, double hi) {
  std::vector<double> cuts{lo, hi};
  for (std::size_t i = 0; i < c.wells.size(); ++i) {
    cuts.push_back(c.wells[i].position);
    if (i + 1 < c.wells.size()) cuts.push_back(0.5 * (c.wells[i].position + c.wells[i + 1].position));
  }
  std::sort(cuts.begin(), cuts.end());
  auto f = [&](double x) { return c.h(x) / c.phi(x); };
  double total = 0.0;
  double error = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double x0 = std::max(lo, cuts[i]);
    const double x1 = std::min(hi, cuts[i + 1]);
    if (!(x1 > x0)) continue;
    double err = 0.0;
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, x0, x1, 15, 1e-13, &err);
    error += err;
  }
  if (!(error <= 1e-10) || !std::isfinite(total)) {
    throw Error(ErrorCode::QuadratureFailure, "quadrature error estimate " + format_number(error) + " above 1e-10");
  }
  return total;
}

std::vector<LimitRate> asymptotic_rates(const Config& c) {
  const auto deep = deep_wells(c);
  if (deep.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two deep wells");
  std::vector<LimitRate> out;
  for (std::size_t i = 0; i + 1 < deep.size(); ++i) {
    const double integral = integral_h_over_phi(c, c.wells[deep[i]].position, c.wells[deep[i + 1]].position);
    out.push_back({i, i + 1, 1.0 / (well_mass(c, i) * integral)});
    out.push_back({i + 1, i, 1.0 / (well_mass(c, i + 1) * integral)});
  }
  return out;
}

Partition metastates(const Config& c, const Chain& chain, long ell) {
  const auto deep = deep_wells(c);
  const double half = static_cast<double>(ell) / chain.n + kFuzz / chain.n;
  std::vector<StateSet> sets;
  std::vector<StateIndex> points;
  for (auto w : deep) {
    const double center = c.wells[w].position;
    StateSet s;
    for (std::size_t i = 0; i < chain.grid.points.size(); ++i) {
      if (std::abs(chain.grid.points[i] - center) <= half) s.push_back(i);
    }
    for (const auto& prev : sets) {
      if (!disjoint(prev, s)) throw Error(ErrorCode::WindowTooWide, "metastate windows overlap; l_N/N is too large");
    }
    sets.push_back(std::move(s));
    points.push_back(chain.grid.index_of_well(w));
  }
  return make_partition(chain.chain.size(), std::move(sets), std::move(points));
}

ConvergenceTable finite_n_vs_limit(const Config& c, const std::vector<int>& n_grid) {
  for (std::size_t i = 1; i < n_grid.size(); ++i) {
    if (n_grid[i] <= n_grid[i - 1]) throw Error(ErrorCode::InvalidArgument, "N grid must increase");
  }
  ConvergenceTable table;
  table.limits = asymptotic_rates(c);
  table.z_limit = normalizer_limit(c);
  const double alpha = deep_exponent(c);
  table.rows.resize(n_grid.size());

  kernels::omp::for_each_index(n_grid.size(), [&](std::size_t r) {
    const int n = n_grid[r];
    const Chain chain = build_chain(c, n);
    ConvergenceRow& row = table.rows[r];
    row.n = n;
    row.ell = window_width(c, n);
    row.z_ratio = chain.measure.z / std::pow(static_cast<double>(n), alpha);
    const Partition p = metastates(c, chain, row.ell);
    const double scale = std::pow(static_cast<double>(n), 1.0 + alpha);
    const DenseMatrix trace_rates = mean_set_rate_matrix(chain.chain, p.metastates);

    for (const auto& lim : table.limits) {
      const auto lo = std::min(lim.from, lim.to);
      const auto hi = std::max(lim.from, lim.to);
      const double cap = capacity_1d(chain, p.metastates[lo].back(), p.metastates[hi].front());
      const double rate = scale * cap / chain.chain.mass(p.metastates[lim.from]);
      const double via_trace = scale * trace_rates(static_cast<Eigen::Index>(lim.from), static_cast<Eigen::Index>(lim.to));
      row.scaled_rates.push_back(rate);
      row.scaled_rates_trace.push_back(via_trace);
      row.route_discrepancy = std::max(row.route_discrepancy, std::abs(rate - via_trace) / rate);
      row.relative_error.push_back(std::abs(rate - lim.value) / lim.value);
    }

    for (std::size_t x = 0; x < p.size(); ++x) {
      const StateSet& ex = p.metastates[x];
      double cap_out = 0.0;
      if (x > 0) cap_out += capacity_1d(chain, p.metastates[x - 1].back(), ex.front());
      if (x + 1 < p.size()) cap_out += capacity_1d(chain, ex.back(), p.metastates[x + 1].front());
      double point_cap = std::numeric_limits<double>::infinity();
      const StateIndex xi = p.metapoints[x];
      for (auto s : ex) {
        if (s == xi) continue;
        point_cap = std::min(point_cap, s < xi ? capacity_1d(chain, s, xi) : capacity_1d(chain, xi, s));
      }
      row.h1.push_back(std::isinf(point_cap) ? 0.0 : cap_out / point_cap);
      row.h2.push_back(h2_ratio(chain.chain, p, x));
    }
  });
  return table;
}

std::string convergence_csv(const ConvergenceTable& table) {
  std::ostringstream os;
  os << "n,ell,z_ratio,z_limit";
  for (const auto& lim : table.limits) {
    const std::string tag = std::to_string(lim.from + 1) + "_" + std::to_string(lim.to + 1);
    os << ",scaled_rate_" << tag << ",scaled_rate_trace_" << tag << ",limit_" << tag << ",rel_error_" << tag;
  }
  const std::size_t k = table.rows.empty() ? 0 : table.rows.front().h1.size();
  for (std::size_t x = 0; x < k; ++x) os << ",h1_" << x + 1 << ",h2_" << x + 1;
  os << ",route_discrepancy\n";
  for (const auto& row : table.rows) {
    os << row.n << ',' << row.ell << ',' << format_number(row.z_ratio) << ',' << format_number(table.z_limit);
    for (std::size_t i = 0; i < table.limits.size(); ++i) {
      os << ',' << format_number(row.scaled_rates[i]) << ',' << format_number(row.scaled_rates_trace[i]) << ','
         << format_number(table.limits[i].value) << ',' << format_number(row.relative_error[i]);
    }
    for (std::size_t x = 0; x < row.h1.size(); ++x) os << ',' << format_number(row.h1[x]) << ',' << format_number(row.h2[x]);
    os << ',' << format_number(row.route_discrepancy) << '\n';
  }
  return os.str();
}

ChainFamily family(const Config& config, std::vector<int> n_grid) {
  ChainFamily f;
  f.n_grid = std::move(n_grid);
  const double alpha = deep_exponent(config);
  f.time_scale = [alpha](int n) { return std::pow(static_cast<double>(n), 1.0 + alpha); };
  f.build = [config](int n) {
    Chain c = build_chain(config, n);
    Partition p = metastates(config, c, window_width(config, n));
    return FamilyMember{std::move(c.chain), std::move(p)};
  };
  return f;
}

}  // namespace metapot::bd
