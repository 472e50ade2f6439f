#pragma once

// Data-parallel kernels. Every kernel has a serial reference in
// kernels::serial and an OpenMP version in kernels::omp with the same
// signature; tests check they agree and the benchmark compares them.

#include "metapot/types.hpp"

#include <cstddef>
#include <exception>
#include <mutex>
#include <vector>

#include <omp.h>

namespace metapot::kernels {

struct RunningStats {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }

  // Chan et al. pairwise update
  void merge(const RunningStats& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    const double n = static_cast<double>(count + o.count);
    const double d = o.mean - mean;
    mean += d * static_cast<double>(o.count) / n;
    m2 += o.m2 + d * d * static_cast<double>(count) * static_cast<double>(o.count) / n;
    count += o.count;
  }

  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
};

/// Block size used by the chunked reductions; fixed so results do not
/// depend on the thread count.
inline constexpr std::size_t kReduceChunk = 4096;

struct UniformizationOptions {
  double tail_mass = 1e-12;
  // above this many Poisson terms the dense squaring route is used
  std::size_t max_vector_terms = 200000;
};

/// Reads METAPOT_THREADS and applies it to OpenMP; returns the thread count.
int configure_threads_from_env();

namespace serial {

void matvec(const SparseMatrix& a, const Vector& x, Vector& y);

/// int_0^t (e^{sL} phi) ds for a generator L.
Vector time_integral(const SparseMatrix& generator, const Vector& phi, double t,
                     const UniformizationOptions& opts = {});

template <typename F>
void for_each_index(std::size_t n, F&& f) {
  for (std::size_t i = 0; i < n; ++i) f(i);
}

template <typename F>
std::vector<double> map_indices(std::size_t n, F&& f) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
  return out;
}

RunningStats summarize(const std::vector<double>& values);

}  // namespace serial

namespace omp {

void matvec(const SparseMatrix& a, const Vector& x, Vector& y);

Vector time_integral(const SparseMatrix& generator, const Vector& phi, double t,
                     const UniformizationOptions& opts = {});

/// Runs f(i) for every i concurrently; the first exception is rethrown
/// after the loop.
template <typename F>
void for_each_index(std::size_t n, F&& f, int chunk = 1) {
  std::exception_ptr failure;
  std::mutex guard;
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, chunk)
  for (long long i = 0; i < count; ++i) {
    try {
      f(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(guard);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

template <typename F>
std::vector<double> map_indices(std::size_t n, F&& f) {
  std::vector<double> out(n);
  for_each_index(n, [&](std::size_t i) { out[i] = f(i); }, 64);
  return out;
}

/// Per-chunk Welford states merged in chunk order.
RunningStats summarize(const std::vector<double>& values);

}  // namespace omp

}  // namespace metapot::kernels
