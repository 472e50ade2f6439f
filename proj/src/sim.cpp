#include "metapot/sim.hpp"

#include "metapot/error.hpp"
#include "metapot/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace metapot::sim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// uniform on the open interval (0,1), independent of the standard library's
// distribution implementations
double open_uniform(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

class Sampler {
 public:
  explicit Sampler(const ChainModel& chain) : rate_(chain.size()) {
    const SparseMatrix& off = chain.rates().off_diagonal();
    offset_.reserve(chain.size() + 1);
    offset_.push_back(0);
    for (Eigen::Index x = 0; x < off.outerSize(); ++x) {
      const double lambda = chain.holding()[x];
      rate_[static_cast<std::size_t>(x)] = lambda;
      double acc = 0.0;
      for (SparseMatrix::InnerIterator it(off, x); it; ++it) {
        acc += it.value() / lambda;
        cumulative_.push_back(acc);
        target_.push_back(static_cast<StateIndex>(it.col()));
      }
      offset_.push_back(cumulative_.size());
    }
  }

  double holding(StateIndex x, std::mt19937_64& rng) const { return -std::log(open_uniform(rng)) / rate_[x]; }

  StateIndex jump(StateIndex x, std::mt19937_64& rng) const {
    const auto begin = cumulative_.begin() + static_cast<std::ptrdiff_t>(offset_[x]);
    const auto end = cumulative_.begin() + static_cast<std::ptrdiff_t>(offset_[x + 1]);
    const double v = open_uniform(rng) * *(end - 1);
    auto it = std::upper_bound(begin, end, v);
    if (it == end) --it;
    return target_[static_cast<std::size_t>(it - cumulative_.begin())];
  }

 private:
  std::vector<double> rate_;
  std::vector<std::size_t> offset_;
  std::vector<double> cumulative_;
  std::vector<StateIndex> target_;
};

void check_state(const ChainModel& chain, StateIndex s) {
  if (s >= chain.size()) throw Error(ErrorCode::InvalidArgument, "start state out of range");
}

void check_count(std::uint64_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidSampleCount, "number of samples must be positive");
}

template <typename Replica>
MCEstimate run_replicas(std::uint64_t n, std::uint64_t seed, Execution exec, Replica&& replica) {
  std::vector<double> values(n);
  auto body = [&](std::size_t r) { values[r] = replica(replica_seed(seed, r)); };
  kernels::RunningStats stats;
  if (exec == Execution::Serial) {
    kernels::serial::for_each_index(n, body);
    stats = kernels::serial::summarize(values);
  } else {
    kernels::omp::for_each_index(n, body, 256);
    stats = kernels::omp::summarize(values);
  }
  MCEstimate est;
  est.mean = stats.mean;
  est.std_error = std::sqrt(stats.variance() / static_cast<double>(n));
  est.n_samples = n;
  est.seed = seed;
  return est;
}

[[noreturn]] void overflow(std::uint64_t cap) {
  throw Error(ErrorCode::HorizonOverflow, "jump count exceeded " + std::to_string(cap));
}

}  // namespace

double Trajectory::holding(std::size_t k) const {
  const double begin = k == 0 ? 0.0 : jump_times.at(k - 1);
  const double end = k < jump_times.size() ? jump_times[k] : end_time;
  return end - begin;
}

std::uint64_t replica_seed(std::uint64_t seed, std::uint64_t replica) {
  return splitmix64(seed ^ splitmix64(replica + 0x632be59bd9b4e019ULL));
}

Trajectory simulate(const ChainModel& chain, StateIndex start, const StopRule& stop, std::uint64_t seed,
                    const Options& opts) {
  check_state(chain, start);
  if (stop.kind == StopRule::Kind::Horizon && !(stop.horizon >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "horizon must be nonnegative");
  }
  const Sampler sampler(chain);
  std::mt19937_64 rng(seed);
  Trajectory traj;
  traj.seed = seed;
  traj.states.push_back(start);

  const auto in_target = membership(stop.target, chain.size());
  if (stop.kind == StopRule::Kind::Hitting && in_target[start]) return traj;

  double t = 0.0;
  StateIndex x = start;
  for (;;) {
    const double h = sampler.holding(x, rng);
    if (stop.kind == StopRule::Kind::Horizon && t + h >= stop.horizon) {
      traj.end_time = stop.horizon;
      return traj;
    }
    t += h;
    x = sampler.jump(x, rng);
    if (traj.jump_times.size() >= opts.max_jumps) overflow(opts.max_jumps);
    traj.jump_times.push_back(t);
    traj.states.push_back(x);
    if (stop.kind == StopRule::Kind::Hitting && in_target[x]) {
      traj.end_time = t;
      return traj;
    }
  }
}

MCEstimate estimate_hitting_prob(const ChainModel& chain, StateIndex start, const StateSet& a, const StateSet& b,
                                 std::uint64_t n, std::uint64_t seed, Execution exec, const Options& opts) {
  check_state(chain, start);
  check_count(n);
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySet, "A and B must be nonempty");
  if (!disjoint(a, b)) throw Error(ErrorCode::Overlap, "A and B overlap");
  const auto in_a = membership(a, chain.size());
  const auto in_b = membership(b, chain.size());
  const Sampler sampler(chain);
  return run_replicas(n, seed, exec, [&](std::uint64_t s) {
    std::mt19937_64 rng(s);
    StateIndex x = start;
    for (std::uint64_t k = 0;; ++k) {
      if (in_a[x]) return 1.0;
      if (in_b[x]) return 0.0;
      if (k >= opts.max_jumps) overflow(opts.max_jumps);
      x = sampler.jump(x, rng);
    }
  });
}

MCEstimate estimate_time_integral(const ChainModel& chain, StateIndex start, const StateSet& b, const Vector& g,
                                  std::uint64_t n, std::uint64_t seed, Execution exec, const Options& opts) {
  check_state(chain, start);
  check_count(n);
  if (b.empty()) throw Error(ErrorCode::EmptySet, "B must be nonempty");
  if (g.size() != static_cast<Eigen::Index>(chain.size())) throw Error(ErrorCode::InvalidArgument, "g has the wrong length");
  const auto in_b = membership(b, chain.size());
  if (in_b[start]) throw Error(ErrorCode::StateInB, "start state lies in B");
  const Sampler sampler(chain);
  return run_replicas(n, seed, exec, [&](std::uint64_t s) {
    std::mt19937_64 rng(s);
    StateIndex x = start;
    double acc = 0.0;
    for (std::uint64_t k = 0; !in_b[x]; ++k) {
      if (k >= opts.max_jumps) overflow(opts.max_jumps);
      acc += g[static_cast<Eigen::Index>(x)] * sampler.holding(x, rng);
      x = sampler.jump(x, rng);
    }
    return acc;
  });
}

Trajectory trace_trajectory(const Trajectory& traj, const StateSet& f) {
  Trajectory out;
  out.seed = traj.seed;
  double clock = 0.0;
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const StateIndex s = traj.states[k];
    if (!contains(f, s)) continue;
    if (out.states.empty()) {
      out.states.push_back(s);
    } else if (out.states.back() != s) {
      out.jump_times.push_back(clock);
      out.states.push_back(s);
    }
    clock += traj.holding(k);
  }
  if (out.states.empty()) throw Error(ErrorCode::NeverVisitsF, "trajectory never visits F");
  out.end_time = clock;
  return out;
}

SetRateEstimate empirical_set_rates(const Trajectory& traj, const std::vector<StateSet>& blocks) {
  StateIndex max_state = 0;
  for (auto s : traj.states) max_state = std::max(max_state, s);
  std::vector<int> block_of(max_state + 1, -1);
  for (std::size_t x = 0; x < blocks.size(); ++x) {
    for (auto s : blocks[x]) {
      if (s <= max_state) block_of[s] = static_cast<int>(x);
    }
  }
  const auto k = static_cast<Eigen::Index>(blocks.size());
  SetRateEstimate est;
  est.jumps = DenseMatrix::Zero(k, k);
  est.occupation = Vector::Zero(k);
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    const int x = block_of[traj.states[i]];
    if (x < 0) throw Error(ErrorCode::InvalidArgument, "trajectory visits a state outside the blocks");
    est.occupation[x] += traj.holding(i);
    if (i + 1 < traj.states.size()) {
      const int y = block_of[traj.states[i + 1]];
      if (y < 0) throw Error(ErrorCode::InvalidArgument, "trajectory visits a state outside the blocks");
      if (x != y) est.jumps(x, y) += 1.0;
    }
  }
  for (Eigen::Index x = 0; x < k; ++x) {
    if (!(est.occupation[x] > 0.0)) {
      throw Error(ErrorCode::InsufficientVisits, "block " + std::to_string(x + 1) + " is never occupied");
    }
  }
  est.rate = DenseMatrix::Zero(k, k);
  est.std_error = DenseMatrix::Zero(k, k);
  est.low_confidence.assign(blocks.size(), std::vector<bool>(blocks.size(), false));
  for (Eigen::Index x = 0; x < k; ++x) {
    for (Eigen::Index y = 0; y < k; ++y) {
      if (x == y) continue;
      est.rate(x, y) = est.jumps(x, y) / est.occupation[x];
      est.std_error(x, y) = std::sqrt(est.jumps(x, y)) / est.occupation[x];
      est.low_confidence[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)] =
          est.jumps(x, y) < SetRateEstimate::min_jumps;
    }
  }
  return est;
}

Agreement compare(double estimate, double std_error, double exact) {
  const double diff = std::abs(estimate - exact);
  if (std_error <= 0.0) return diff <= 1e-12 * std::max(1.0, std::abs(exact)) ? Agreement::Pass : Agreement::Fail;
  const double z = diff / std_error;
  if (z <= 3.0) return Agreement::Pass;
  if (z <= 4.0) return Agreement::Flag;
  return Agreement::Fail;
}

}  // namespace metapot::sim
