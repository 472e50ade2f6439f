#include "metapot/metastability.hpp"

#include "metapot/error.hpp"
#include "metapot/format.hpp"
#include "metapot/kernels.hpp"
#include "metapot/potential.hpp"
#include "metapot/trace_collapse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace metapot {

StateSet Partition::all() const {
  StateSet out;
  for (const auto& m : metastates) out = set_union(out, m);
  return out;
}

StateSet Partition::others(std::size_t x) const {
  StateSet out;
  for (std::size_t z = 0; z < metastates.size(); ++z) {
    if (z != x) out = set_union(out, metastates[z]);
  }
  return out;
}

Partition make_partition(std::size_t n, std::vector<StateSet> metastates, std::vector<StateIndex> metapoints) {
  if (metastates.size() < 2) throw Error(ErrorCode::NotAPartition, "need at least two metastates");
  if (metapoints.size() != metastates.size()) throw Error(ErrorCode::NotAPartition, "one metapoint per metastate");
  Partition p;
  StateSet seen;
  for (std::size_t x = 0; x < metastates.size(); ++x) {
    StateSet m = make_set(std::move(metastates[x]));
    if (m.empty()) throw Error(ErrorCode::NotAPartition, "empty metastate");
    if (m.back() >= n) throw Error(ErrorCode::NotAPartition, "metastate leaves the state space");
    if (!disjoint(seen, m)) throw Error(ErrorCode::NotAPartition, "metastates overlap");
    if (!contains(m, metapoints[x])) throw Error(ErrorCode::NotAPartition, "metapoint outside its metastate");
    seen = set_union(seen, m);
    p.metastates.push_back(std::move(m));
  }
  p.metapoints = std::move(metapoints);
  p.delta = complement(seen, n);
  return p;
}

Extrapolation extrapolate_power_law(const std::vector<int>& n, const std::vector<double>& values) {
  if (n.size() != values.size() || n.empty()) throw Error(ErrorCode::InvalidArgument, "empty sequence");
  Extrapolation best;
  best.limit = values.back();
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (values.size() == 1 || *hi - *lo <= 1e-15 * std::abs(*hi)) return best;

  auto fit = [&](double p) {
    // ordinary least squares on [1, N^-p]
    double s1 = 0, sx = 0, sxx = 0, sy = 0, sxy = 0;
    for (std::size_t i = 0; i < n.size(); ++i) {
      const double x = std::pow(static_cast<double>(n[i]), -p);
      s1 += 1;
      sx += x;
      sxx += x * x;
      sy += values[i];
      sxy += x * values[i];
    }
    const double det = s1 * sxx - sx * sx;
    Extrapolation e;
    e.exponent = p;
    e.coefficient = (s1 * sxy - sx * sy) / det;
    e.limit = (sy - e.coefficient * sx) / s1;
    double ss = 0;
    for (std::size_t i = 0; i < n.size(); ++i) {
      const double r = e.limit + e.coefficient * std::pow(static_cast<double>(n[i]), -p) - values[i];
      ss += r * r;
    }
    e.rms_residual = std::sqrt(ss / static_cast<double>(n.size()));
    return e;
  };

  if (values.size() == 2) return fit(1.0);
  best.rms_residual = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 400; ++k) {
    const Extrapolation e = fit(0.01 * k);
    if (e.rms_residual < best.rms_residual) best = e;
  }
  return best;
}

DenseMatrix metastate_rates(const ChainModel& chain, const Partition& partition) {
  return mean_set_rate_matrix(chain, partition.metastates);
}

double h1_ratio(const ChainModel& chain, const Partition& partition, std::size_t x) {
  const StateSet& ex = partition.metastates.at(x);
  if (ex.size() == 1) return 0.0;
  const double denom = point_capacity(chain, ex, partition.metapoints[x]);
  return capacity_value(chain, ex, partition.others(x)) / denom;
}

double h2_ratio(const ChainModel& chain, const Partition& partition, std::size_t x) {
  return chain.mass(partition.delta) / chain.mass(partition.metastates.at(x));
}

ExcursionBounds excursion_bounds(const ChainModel& chain, const Partition& partition, std::size_t x) {
  const StateSet& ex = partition.metastates.at(x);
  const StateSet rest = partition.others(x);
  const StateIndex xi = partition.metapoints[x];
  const auto n = chain.size();

  ExcursionBounds out;
  out.rhs = h1_ratio(chain, partition, x);
  if (ex.size() == 1) return out;

  const auto in_rest = membership(rest, n);
  const SparseMatrix& off = chain.rates().off_diagonal();
  Vector rate_out = Vector::Zero(static_cast<Eigen::Index>(n));
  for (auto s : ex) {
    double acc = 0.0;
    for (SparseMatrix::InnerIterator it(off, static_cast<Eigen::Index>(s)); it; ++it) {
      if (in_rest[static_cast<std::size_t>(it.col())]) acc += it.value();
    }
    rate_out[static_cast<Eigen::Index>(s)] = acc;
  }
  const StateSet target{xi};
  const Vector u1 = expected_time_integrals(chain, target, rate_out);
  const Vector u2 = expected_time_integrals(chain, target, indicator(ex, n));
  double sup1 = 0.0;
  double sup2 = 0.0;
  for (auto s : ex) {
    sup1 = std::max(sup1, u1[static_cast<Eigen::Index>(s)]);
    sup2 = std::max(sup2, u2[static_cast<Eigen::Index>(s)]);
  }
  out.lhs_rate_integral = sup1;
  out.lhs_occupation = mean_set_rate(chain, partition.all(), ex, rest).value() * sup2;
  return out;
}

SChain collapsed_s_chain(const ChainModel& chain, const Partition& partition) {
  SChain out;
  out.rates = metastate_rates(chain, partition);
  const auto k = partition.size();
  out.metastate_mass.resize(static_cast<Eigen::Index>(k));
  for (std::size_t x = 0; x < k; ++x) out.metastate_mass[static_cast<Eigen::Index>(x)] = chain.mass(partition.metastates[x]);
  out.metastate_mass /= out.metastate_mass.sum();

  std::vector<RateEntry> entries;
  for (std::size_t x = 0; x < k; ++x) {
    for (std::size_t y = 0; y < k; ++y) {
      const double r = out.rates(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
      if (x != y && r > 0.0) entries.push_back({x, y, r});
    }
  }
  try {
    out.chain = ChainModel::create(StateSpace::numbered(k), RateMatrix(k, entries));
    out.stationary_discrepancy = (out.chain->stationary() - out.metastate_mass).cwiseAbs().maxCoeff();
  } catch (const Error&) {
    out.chain.reset();
    out.stationary_discrepancy = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

double adjoint_balance_residual(const ChainModel& chain, const Partition& partition) {
  const DenseMatrix r = metastate_rates(chain, partition);
  const DenseMatrix rstar = metastate_rates(adjoint(chain), partition);
  double worst = 0.0;
  for (std::size_t x = 0; x < partition.size(); ++x) {
    for (std::size_t y = 0; y < partition.size(); ++y) {
      if (x == y) continue;
      const auto i = static_cast<Eigen::Index>(x);
      const auto j = static_cast<Eigen::Index>(y);
      const double lhs = chain.mass(partition.metastates[x]) * rstar(i, j);
      const double rhs = chain.mass(partition.metastates[y]) * r(j, i);
      const double scale = std::max(std::abs(lhs), std::abs(rhs));
      if (scale > 0.0) worst = std::max(worst, std::abs(lhs - rhs) / scale);
    }
  }
  return worst;
}

namespace {

template <typename PerN>
SequenceCheck sequence_over_grid(const ChainFamily& family, PerN&& per_n) {
  SequenceCheck out;
  out.n = family.n_grid;
  out.values.assign(family.n_grid.size(), 0.0);
  kernels::omp::for_each_index(family.n_grid.size(), [&](std::size_t i) {
    const FamilyMember m = family.build(family.n_grid[i]);
    out.values[i] = per_n(family.n_grid[i], m);
  });
  out.extrapolation = extrapolate_power_law(out.n, out.values);
  out.decreasing = true;
  for (std::size_t i = 1; i < out.values.size(); ++i) {
    if (!(out.values[i] < out.values[i - 1])) out.decreasing = false;
  }
  return out;
}

void check_grid(const ChainFamily& family) {
  if (family.n_grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty N grid");
  for (std::size_t i = 1; i < family.n_grid.size(); ++i) {
    if (family.n_grid[i] <= family.n_grid[i - 1]) throw Error(ErrorCode::InvalidArgument, "N grid must increase");
  }
}

bool cauchy_tail(const std::vector<double>& v, double tol, double floor) {
  if (v.size() < 2) return false;
  const double a = v[v.size() - 1];
  const double b = v[v.size() - 2];
  return std::abs(a - b) <= tol * std::max(std::abs(a), floor);
}

}  // namespace

SequenceCheck check_h0(const ChainFamily& family, std::size_t x, std::size_t y, const H0Options& opts) {
  check_grid(family);
  if (x == y) throw Error(ErrorCode::InvalidArgument, "H0 needs two distinct metastates");
  SequenceCheck out = sequence_over_grid(family, [&](int n, const FamilyMember& m) {
    const auto& p = m.partition;
    return family.time_scale(n) * mean_set_rate(m.chain, p.all(), p.metastates.at(x), p.metastates.at(y)).value();
  });
  if (std::abs(out.extrapolation.limit) <= opts.zero_tolerance) out.extrapolation.limit = 0.0;
  out.cauchy = cauchy_tail(out.values, opts.cauchy_tolerance, opts.zero_tolerance);
  return out;
}

SequenceCheck check_h1(const ChainFamily& family, std::size_t x) {
  check_grid(family);
  return sequence_over_grid(family, [&](int, const FamilyMember& m) { return h1_ratio(m.chain, m.partition, x); });
}

SequenceCheck check_h2(const ChainFamily& family, std::size_t x) {
  check_grid(family);
  return sequence_over_grid(family, [&](int, const FamilyMember& m) { return h2_ratio(m.chain, m.partition, x); });
}

TunnelingReport tunneling_report(const ChainFamily& family, const TunnelingOptions& opts) {
  check_grid(family);
  TunnelingReport report;
  report.rows.resize(family.n_grid.size());
  kernels::omp::for_each_index(family.n_grid.size(), [&](std::size_t i) {
    const int n = family.n_grid[i];
    const FamilyMember m = family.build(n);
    const auto& p = m.partition;
    TunnelingRow& row = report.rows[i];
    row.n = n;
    row.theta = family.time_scale(n);
    row.scaled_rates = row.theta * metastate_rates(m.chain, p);
    for (std::size_t x = 0; x < p.size(); ++x) {
      row.mass.push_back(m.chain.mass(p.metastates[x]));
      row.h1.push_back(h1_ratio(m.chain, p, x));
      row.h2.push_back(h2_ratio(m.chain, p, x));
      if (opts.excursion_bounds) row.excursions.push_back(excursion_bounds(m.chain, p, x));
    }
    row.adjoint_residual = adjoint_balance_residual(m.chain, p);
  });

  const auto k = static_cast<Eigen::Index>(report.rows.front().mass.size());
  for (const auto& row : report.rows) {
    if (static_cast<Eigen::Index>(row.mass.size()) != k) {
      throw Error(ErrorCode::InvalidArgument, "family members disagree on the number of metastates");
    }
  }
  report.limit_rates = DenseMatrix::Zero(k, k);
  for (Eigen::Index x = 0; x < k; ++x) {
    for (Eigen::Index y = 0; y < k; ++y) {
      if (x == y) continue;
      std::vector<double> seq;
      for (const auto& row : report.rows) seq.push_back(row.scaled_rates(x, y));
      double lim = extrapolate_power_law(family.n_grid, seq).limit;
      if (std::abs(lim) <= opts.zero_tolerance) lim = 0.0;
      report.limit_rates(x, y) = lim;
    }
  }
  double total = 0.0;
  for (Eigen::Index x = 0; x < k; ++x) {
    std::vector<double> seq;
    for (const auto& row : report.rows) seq.push_back(row.mass[static_cast<std::size_t>(x)]);
    report.limit_mass.push_back(std::max(0.0, extrapolate_power_law(family.n_grid, seq).limit));
    total += report.limit_mass.back();
  }
  if (total > 0.0) {
    for (auto& v : report.limit_mass) v /= total;
  }
  return report;
}

double limit_stationarity_residual(const DenseMatrix& rates, const std::vector<double>& mass, double zero_tolerance) {
  const auto k = rates.rows();
  double worst = 0.0;
  double scale = 0.0;
  for (Eigen::Index x = 0; x < k; ++x) {
    double out_rate = 0.0;
    double inflow = 0.0;
    for (Eigen::Index y = 0; y < k; ++y) {
      if (y == x) continue;
      out_rate += rates(x, y);
      inflow += mass[static_cast<std::size_t>(y)] * rates(y, x);
    }
    if (out_rate <= zero_tolerance) {
      throw Error(ErrorCode::AbsorbingState, "metastate " + std::to_string(x + 1) + " has no outgoing limit rate");
    }
    const double outflow = mass[static_cast<std::size_t>(x)] * out_rate;
    worst = std::max(worst, std::abs(inflow - outflow));
    scale = std::max(scale, outflow);
  }
  return worst / scale;
}

std::string tunneling_csv(const TunnelingReport& report) {
  std::ostringstream os;
  os << "n,quantity,x,y,value\n";
  auto line = [&](int n, const char* q, std::size_t x, std::size_t y, double v) {
    os << n << ',' << q << ',' << x + 1 << ',' << y + 1 << ',' << format_number(v) << '\n';
  };
  for (const auto& row : report.rows) {
    const auto k = static_cast<std::size_t>(row.scaled_rates.rows());
    for (std::size_t x = 0; x < k; ++x) {
      for (std::size_t y = 0; y < k; ++y) {
        if (x != y) line(row.n, "scaled_rate", x, y, row.scaled_rates(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)));
      }
    }
    for (std::size_t x = 0; x < k; ++x) {
      line(row.n, "mass", x, x, row.mass[x]);
      line(row.n, "h1_ratio", x, x, row.h1[x]);
      line(row.n, "h2_ratio", x, x, row.h2[x]);
      if (x < row.excursions.size()) {
        line(row.n, "excursion_lhs_rate", x, x, row.excursions[x].lhs_rate_integral);
        line(row.n, "excursion_lhs_occupation", x, x, row.excursions[x].lhs_occupation);
        line(row.n, "excursion_rhs", x, x, row.excursions[x].rhs);
      }
    }
    line(row.n, "adjoint_residual", 0, 0, row.adjoint_residual);
  }
  return os.str();
}

}  // namespace metapot
