#include "metapot/kernels.hpp"

#include "metapot/error.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

namespace metapot::kernels {

int configure_threads_from_env() {
  if (const char* env = std::getenv("METAPOT_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) omp_set_num_threads(n);
  }
  return omp_get_max_threads();
}

namespace {

double uniformization_rate(const SparseMatrix& generator) {
  double rate = 0.0;
  for (Eigen::Index i = 0; i < generator.rows(); ++i) rate = std::max(rate, -generator.coeff(i, i));
  return rate;
}

// P(N > k) for N ~ Poisson(m)
double poisson_survival(std::size_t k, double m) {
  return boost::math::gamma_p(static_cast<double>(k) + 1.0, m);
}

// Dense route: base step tau with rate*tau <= 1, then doubling
//   E(2 tau) = E(tau)^2,  J(2 tau) = J(tau) + E(tau) J(tau),
// where E = e^{tau L} and J = int_0^tau e^{sL} ds.
Vector dense_time_integral(const SparseMatrix& generator, const Vector& phi, double t, double rate) {
  const auto n = generator.rows();
  int doublings = 0;
  double tau = t;
  while (rate * tau > 1.0) {
    tau *= 0.5;
    ++doublings;
  }
  const double m = rate * tau;
  const DenseMatrix p = DenseMatrix::Identity(n, n) + DenseMatrix(generator) / rate;

  DenseMatrix power = DenseMatrix::Identity(n, n);
  DenseMatrix e = DenseMatrix::Zero(n, n);
  DenseMatrix j = DenseMatrix::Zero(n, n);
  double pmf = std::exp(-m);
  for (std::size_t k = 0;; ++k) {
    const double surv = poisson_survival(k, m);
    e += pmf * power;
    j += (surv / rate) * power;
    if (surv < 1e-17 && k > 2) break;
    power = power * p;
    pmf *= m / static_cast<double>(k + 1);
  }
  for (int d = 0; d < doublings; ++d) {
    j += e * j;
    e = e * e;
  }
  return j * phi;
}

template <typename MatVec>
Vector vector_time_integral(const SparseMatrix& generator, const Vector& phi, double t,
                            const UniformizationOptions& opts, MatVec&& matvec) {
  if (!(t >= 0.0)) throw Error(ErrorCode::InvalidArgument, "time horizon must be nonnegative");
  const double rate = uniformization_rate(generator);
  if (rate == 0.0 || t == 0.0) return t * phi;
  const double m = rate * t;
  const double expected_terms = m + 12.0 * std::sqrt(m) + 60.0;
  if (expected_terms > static_cast<double>(opts.max_vector_terms)) {
    return dense_time_integral(generator, phi, t, rate);
  }

  // I = (1/rate) sum_k P(N > k) P^k phi,  P = I + L / rate
  Vector v = phi;
  Vector lv(phi.size());
  Vector acc = poisson_survival(0, m) * v;
  for (std::size_t k = 1;; ++k) {
    matvec(generator, v, lv);
    v += lv / rate;
    const double surv = poisson_survival(k, m);
    acc += surv * v;
    if (surv <= opts.tail_mass && static_cast<double>(k) > m) break;
  }
  return acc / rate;
}

RunningStats welford(const std::vector<double>& values, std::size_t begin, std::size_t end) {
  RunningStats s;
  for (std::size_t i = begin; i < end; ++i) s.push(values[i]);
  return s;
}

}  // namespace

namespace serial {

void matvec(const SparseMatrix& a, const Vector& x, Vector& y) {
  y.resize(a.rows());
  for (Eigen::Index i = 0; i < a.outerSize(); ++i) {
    double acc = 0.0;
    for (SparseMatrix::InnerIterator it(a, i); it; ++it) acc += it.value() * x[it.col()];
    y[i] = acc;
  }
}

Vector time_integral(const SparseMatrix& generator, const Vector& phi, double t, const UniformizationOptions& opts) {
  return vector_time_integral(generator, phi, t, opts,
                              [](const SparseMatrix& a, const Vector& x, Vector& y) { matvec(a, x, y); });
}

RunningStats summarize(const std::vector<double>& values) { return welford(values, 0, values.size()); }

}  // namespace serial

namespace omp {

void matvec(const SparseMatrix& a, const Vector& x, Vector& y) {
  y.resize(a.rows());
  const auto rows = static_cast<long long>(a.outerSize());
#pragma omp parallel for schedule(static) if (rows > 2048)
  for (long long i = 0; i < rows; ++i) {
    double acc = 0.0;
    for (SparseMatrix::InnerIterator it(a, static_cast<Eigen::Index>(i)); it; ++it) acc += it.value() * x[it.col()];
    y[static_cast<Eigen::Index>(i)] = acc;
  }
}

Vector time_integral(const SparseMatrix& generator, const Vector& phi, double t, const UniformizationOptions& opts) {
  return vector_time_integral(generator, phi, t, opts,
                              [](const SparseMatrix& a, const Vector& x, Vector& y) { matvec(a, x, y); });
}

RunningStats summarize(const std::vector<double>& values) {
  const std::size_t chunks = (values.size() + kReduceChunk - 1) / kReduceChunk;
  std::vector<RunningStats> partial(chunks);
  const auto count = static_cast<long long>(chunks);
#pragma omp parallel for schedule(static)
  for (long long c = 0; c < count; ++c) {
    const auto begin = static_cast<std::size_t>(c) * kReduceChunk;
    partial[static_cast<std::size_t>(c)] = welford(values, begin, std::min(values.size(), begin + kReduceChunk));
  }
  RunningStats total;
  for (const auto& p : partial) total.merge(p);
  return total;
}

}  // namespace omp

}  // namespace metapot::kernels
