// Serial reference kernels against their OpenMP versions.
//   metapot_bench [repeats]

#include "metapot/birth_death.hpp"
#include "metapot/kernels.hpp"
#include "metapot/potential.hpp"
#include "metapot/sim.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>

using namespace metapot;

namespace {

double seconds(const std::function<void()>& body, int repeats) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

void report(const char* name, double serial, double parallel, double diff) {
  std::printf("%-28s serial %10.4f s   omp %10.4f s   speedup %6.2f   max|diff| %.3e\n", name, serial, parallel,
              serial / parallel, diff);
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::max(1, std::atoi(argv[1])) : 3;
  const int threads = kernels::configure_threads_from_env();
  std::printf("threads %d, best of %d\n", threads, repeats);

  const auto config = bd::piecewise_power_config(0.0, 1.0, {{0.25, 2.0, 0.25}, {0.75, 2.0, 0.25}},
                                                 bd::constant_function(1.0));
  const bd::Chain big = bd::build_chain(config, 200000);
  const SparseMatrix& gen = big.chain.generator();
  const Vector x = Vector::LinSpaced(gen.cols(), 0.0, 1.0);
  Vector ys, yp;
  const double t_mv_s = seconds([&] { for (int k = 0; k < 50; ++k) kernels::serial::matvec(gen, x, ys); }, repeats);
  const double t_mv_p = seconds([&] { for (int k = 0; k < 50; ++k) kernels::omp::matvec(gen, x, yp); }, repeats);
  report("matvec x50 (N=200000)", t_mv_s, t_mv_p, (ys - yp).cwiseAbs().maxCoeff());

  const bd::Chain mid = bd::build_chain(config, 20000);
  const Vector phi = Vector::LinSpaced(static_cast<Eigen::Index>(mid.chain.size()), -1.0, 1.0);
  Vector is, ip;
  const double t_ti_s = seconds([&] { is = kernels::serial::time_integral(mid.chain.generator(), phi, 50.0); }, repeats);
  const double t_ti_p = seconds([&] { ip = kernels::omp::time_integral(mid.chain.generator(), phi, 50.0); }, repeats);
  report("time_integral (N=20000)", t_ti_s, t_ti_p, (is - ip).cwiseAbs().maxCoeff());

  const bd::Chain small = bd::build_chain(config, 40);
  const StateIndex w0 = small.grid.index_of_well(0);
  const StateIndex w1 = small.grid.index_of_well(1);
  const Vector ones = Vector::Ones(static_cast<Eigen::Index>(small.chain.size()));
  sim::MCEstimate es, ep;
  const double t_mc_s = seconds(
      [&] { es = sim::estimate_time_integral(small.chain, w0, {w1}, ones, 20000, 7, sim::Execution::Serial); }, repeats);
  const double t_mc_p = seconds(
      [&] { ep = sim::estimate_time_integral(small.chain, w0, {w1}, ones, 20000, 7, sim::Execution::Parallel); },
      repeats);
  report("MC hitting time x20000", t_mc_s, t_mc_p, std::abs(es.mean - ep.mean));

  const bd::Chain cap = bd::build_chain(config, 400);
  StateSet block;
  for (StateIndex i = 0; i < cap.grid.points.size() && cap.grid.points[i] < 0.5; ++i) block.push_back(i);
  const StateIndex xi = cap.grid.index_of_well(0);
  std::vector<double> cs, cp;
  auto one = [&](std::size_t i) {
    return block[i] == xi ? 0.0 : capacity_value(cap.chain, {block[i]}, {xi});
  };
  const double t_pc_s = seconds([&] { cs = kernels::serial::map_indices(block.size(), one); }, repeats);
  const double t_pc_p = seconds([&] { cp = kernels::omp::map_indices(block.size(), one); }, repeats);
  double d = 0.0;
  for (std::size_t i = 0; i < cs.size(); ++i) d = std::max(d, std::abs(cs[i] - cp[i]));
  report("point capacities (N=400)", t_pc_s, t_pc_p, d);
  return 0;
}
