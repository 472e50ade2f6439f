#pragma once

// Exact trajectory sampling (holding times plus jump chain), Monte Carlo
// estimates, and the pathwise trace of a trajectory.

#include "metapot/ctmc.hpp"

#include <cstdint>
#include <vector>

namespace metapot::sim {

struct Trajectory {
  std::vector<double> jump_times;  // jump_times[k]: time of the jump states[k] -> states[k+1]
  std::vector<StateIndex> states;  // one more than jump_times
  double end_time = 0.0;           // horizon, or the hitting time
  std::uint64_t seed = 0;

  std::size_t jumps() const noexcept { return jump_times.size(); }
  /// Duration of the k-th visit.
  double holding(std::size_t k) const;
};

struct StopRule {
  enum class Kind { Horizon, Hitting };
  Kind kind = Kind::Horizon;
  double horizon = 0.0;
  StateSet target;

  static StopRule at_time(double t) { return {Kind::Horizon, t, {}}; }
  static StopRule on_hitting(StateSet b) { return {Kind::Hitting, 0.0, std::move(b)}; }
};

struct Options {
  std::uint64_t max_jumps = 100'000'000;
};

enum class Execution { Serial, Parallel };

/// Gillespie sampling; bit-identical for a given seed. With a hitting rule
/// and start in B the trajectory has no jumps and end_time 0. Throws
/// HorizonOverflow beyond max_jumps.
Trajectory simulate(const ChainModel& chain, StateIndex start, const StopRule& stop, std::uint64_t seed,
                    const Options& opts = {});

/// Seed of replica r derived from a base seed (splitmix64 mixing).
std::uint64_t replica_seed(std::uint64_t seed, std::uint64_t replica);

struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;  // sample standard deviation / sqrt(n)
  std::uint64_t n_samples = 0;
  std::uint64_t seed = 0;
};

/// P_start[H_A < H_B]; 1 for start in A, 0 for start in B.
MCEstimate estimate_hitting_prob(const ChainModel& chain, StateIndex start, const StateSet& a, const StateSet& b,
                                 std::uint64_t n, std::uint64_t seed, Execution exec = Execution::Parallel,
                                 const Options& opts = {});

/// E_start[int_0^{H_B} g(X_s) ds]; start must lie outside B.
MCEstimate estimate_time_integral(const ChainModel& chain, StateIndex start, const StateSet& b, const Vector& g,
                                  std::uint64_t n, std::uint64_t seed, Execution exec = Execution::Parallel,
                                  const Options& opts = {});

/// Time change onto F: excursions outside F are cut out and the clock only
/// runs inside F. Throws NeverVisitsF when no time is spent in F.
Trajectory trace_trajectory(const Trajectory& traj, const StateSet& f);

struct SetRateEstimate {
  DenseMatrix rate;       // jumps x -> y per unit time in x
  DenseMatrix std_error;  // sqrt(jumps) / time in x
  DenseMatrix jumps;
  Vector occupation;      // time spent in each block
  std::vector<std::vector<bool>> low_confidence;  // fewer than min_jumps observed

  static constexpr double min_jumps = 10.0;
};

/// Rates between blocks of a partition of the states visited by `traj`.
/// Throws InsufficientVisits if some block is never occupied.
SetRateEstimate empirical_set_rates(const Trajectory& traj, const std::vector<StateSet>& blocks);

enum class Agreement { Pass, Flag, Fail };

/// Pass within 3 standard errors, Flag in (3, 4], Fail beyond 4. A zero
/// standard error requires agreement to 1e-12 (relative).
Agreement compare(double estimate, double std_error, double exact);

}  // namespace metapot::sim
