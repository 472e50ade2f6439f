#include "metapot/variational.hpp"

#include "metapot/error.hpp"
#include "metapot/trace_collapse.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>

namespace metapot {

namespace {

void check_problem(const ChainModel& chain, const SaddleProblem& p) {
  if (p.a0.empty() || p.a1.empty() || p.b.empty()) throw Error(ErrorCode::EmptySet, "A0, A1 and B must be nonempty");
  for (const auto* s : {&p.a0, &p.a1, &p.b}) {
    if (s->back() >= chain.size()) throw Error(ErrorCode::InvalidArgument, "state index out of range");
  }
  if (!disjoint(p.a0, p.a1) || !disjoint(p.a0, p.b) || !disjoint(p.a1, p.b)) {
    throw Error(ErrorCode::Overlap, "A0, A1 and B must be pairwise disjoint");
  }
}

// K = D_mu (-L), so that <f,(-L)h>_mu = f^T K h
ColSparseMatrix weighted_form(const ChainModel& chain) {
  SparseMatrix k = chain.generator();
  const Vector& mu = chain.stationary();
  for (Eigen::Index i = 0; i < k.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(k, i); it; ++it) it.valueRef() *= -mu[i];
  }
  return ColSparseMatrix(k);
}

// Basis with one column per free state and one per nonempty block.
ColSparseMatrix basis(std::size_t n, const StateSet& free, const std::vector<const StateSet*>& blocks) {
  std::vector<Triplet> trips;
  int col = 0;
  for (auto s : free) trips.emplace_back(static_cast<int>(s), col++, 1.0);
  for (const auto* blk : blocks) {
    if (blk->empty()) continue;
    for (auto s : *blk) trips.emplace_back(static_cast<int>(s), col, 1.0);
    ++col;
  }
  ColSparseMatrix m(static_cast<Eigen::Index>(n), col);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

StateSet free_states(std::size_t n, const SaddleProblem& p) {
  return complement(set_union(set_union(p.a0, p.a1), p.b), n);
}

}  // namespace

double saddle_functional(const ChainModel& chain, const Vector& f, const Vector& h) {
  const ColSparseMatrix k = weighted_form(chain);
  const Vector kh = k * h;
  return 2.0 * f.dot(kh) - h.dot(kh);
}

InnerSup inner_sup(const ChainModel& chain, const SaddleProblem& problem, const Vector& f) {
  const auto n = chain.size();
  if (f.size() != static_cast<Eigen::Index>(n)) throw Error(ErrorCode::InvalidArgument, "f has the wrong length");
  if (problem.a0.empty()) {
    throw Error(ErrorCode::DegenerateQuadratic, "h is unconstrained along constants when A0 is empty");
  }
  const ColSparseMatrix k = weighted_form(chain);
  const ColSparseMatrix s = 0.5 * (k + ColSparseMatrix(k.transpose()));
  const ColSparseMatrix q = basis(n, free_states(n, problem), {&problem.a1, &problem.b});
  const ColSparseMatrix d = ColSparseMatrix(q.transpose()) * s * q;
  const Vector rhs = q.transpose() * (k.transpose() * f);

  Eigen::SimplicialLDLT<ColSparseMatrix> ldlt(d);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::DegenerateQuadratic, "symmetric form is singular");
  const Vector pivots = ldlt.vectorD();
  if (pivots.minCoeff() <= 1e-14 * pivots.cwiseAbs().maxCoeff()) {
    throw Error(ErrorCode::DegenerateQuadratic, "symmetric form is not positive definite on the h-subspace");
  }
  const Vector v = ldlt.solve(rhs);

  InnerSup out;
  out.h = q * v;
  const Vector kh = k * out.h;
  out.value = 2.0 * f.dot(kh) - out.h.dot(kh);
  const Vector grad = q.transpose() * (k.transpose() * f - s * out.h);
  out.gradient_residual = grad.cwiseAbs().maxCoeff() / std::max(1.0, rhs.cwiseAbs().maxCoeff());
  return out;
}

SaddleSolution solve_saddle(const ChainModel& chain, const SaddleProblem& problem) {
  check_problem(chain, problem);
  const auto n = chain.size();
  const StateSet free = free_states(n, problem);

  const ColSparseMatrix k = weighted_form(chain);
  const ColSparseMatrix s = 0.5 * (k + ColSparseMatrix(k.transpose()));
  const ColSparseMatrix p = basis(n, free, {&problem.b});
  const ColSparseMatrix q = basis(n, free, {&problem.a1, &problem.b});
  const Vector f0 = indicator(problem.a1, n);

  // stationarity in f:  P^T K Q v = 0
  // stationarity in h:  Q^T K^T (f0 + P u) - Q^T S Q v = 0
  const ColSparseMatrix c = ColSparseMatrix(p.transpose()) * k * q;
  const ColSparseMatrix d = ColSparseMatrix(q.transpose()) * s * q;
  const Eigen::Index nu = c.rows();
  const Eigen::Index nv = c.cols();

  std::vector<Triplet> trips;
  for (Eigen::Index j = 0; j < c.outerSize(); ++j) {
    for (ColSparseMatrix::InnerIterator it(c, j); it; ++it) {
      trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(nu + it.col()), it.value());
      trips.emplace_back(static_cast<int>(nu + it.col()), static_cast<int>(it.row()), it.value());
    }
  }
  for (Eigen::Index j = 0; j < d.outerSize(); ++j) {
    for (ColSparseMatrix::InnerIterator it(d, j); it; ++it) {
      trips.emplace_back(static_cast<int>(nu + it.row()), static_cast<int>(nu + it.col()), -it.value());
    }
  }
  ColSparseMatrix kkt(nu + nv, nu + nv);
  kkt.setFromTriplets(trips.begin(), trips.end());
  kkt.makeCompressed();

  Vector rhs = Vector::Zero(nu + nv);
  rhs.tail(nv) = -(q.transpose() * (k.transpose() * f0));

  Eigen::SparseLU<ColSparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(kkt);
  if (lu.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "saddle KKT system is singular");
  const Vector sol = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !sol.allFinite()) {
    throw Error(ErrorCode::SingularSystem, "saddle KKT solve failed");
  }

  SaddleSolution out;
  out.problem = problem;
  out.f = f0 + p * sol.head(nu);
  out.h = q * sol.tail(nv);
  out.kkt_residual = (kkt * sol - rhs).cwiseAbs().maxCoeff() / std::max(1.0, rhs.cwiseAbs().maxCoeff());
  // constraints hold exactly by construction; restate them to drop rounding
  for (auto a : problem.a0) {
    out.f[static_cast<Eigen::Index>(a)] = 0.0;
    out.h[static_cast<Eigen::Index>(a)] = 0.0;
  }
  for (auto a : problem.a1) out.f[static_cast<Eigen::Index>(a)] = 1.0;
  const Vector kh = k * out.h;
  out.value = 2.0 * out.f.dot(kh) - out.h.dot(kh);
  return out;
}

double saddle_rate_ratio(const ChainModel& chain, const SaddleProblem& problem) {
  check_problem(chain, problem);
  const StateSet t = set_union(set_union(problem.a0, problem.a1), problem.b);
  const double to_a1 = mean_set_rate(chain, t, problem.b, problem.a1).value();
  const double to_a0 = mean_set_rate(chain, t, problem.b, problem.a0).value();
  return to_a1 / (to_a0 + to_a1);
}

RateRatio average_rate_ratio(const ChainModel& chain, const std::vector<StateSet>& metastates, std::size_t x,
                             std::size_t y) {
  if (x == y || x >= metastates.size() || y >= metastates.size()) {
    throw Error(ErrorCode::InvalidArgument, "need two distinct metastates");
  }
  StateSet all;
  StateSet others;
  for (std::size_t z = 0; z < metastates.size(); ++z) {
    if (!disjoint(all, metastates[z])) throw Error(ErrorCode::NotAPartition, "metastates overlap");
    all = set_union(all, metastates[z]);
    if (z != x && z != y) others = set_union(others, metastates[z]);
  }
  RateRatio out;
  if (others.empty()) {
    out.variational = 1.0;
    out.direct = 1.0;
    return out;
  }
  const StateSet& ex = metastates[x];
  const StateSet rest = set_difference(all, ex);
  out.direct = mean_set_rate(chain, all, ex, metastates[y]).value() / mean_set_rate(chain, all, ex, rest).value();
  out.variational = solve_saddle(chain, SaddleProblem{others, metastates[y], ex}).h_on_b();
  return out;
}

FormEquivalence collapsed_form_equivalence(const ChainModel& chain, const StateSet& b, const Vector& f,
                                           const Vector& h) {
  const auto n = static_cast<Eigen::Index>(chain.size());
  if (f.size() != n || h.size() != n) throw Error(ErrorCode::InvalidArgument, "function length mismatch");
  if (b.empty()) throw Error(ErrorCode::EmptyB, "B is empty");
  auto constant_on_b = [&](const Vector& g) {
    const double ref = g[static_cast<Eigen::Index>(b.front())];
    const double tol = 1e-14 * std::max(1.0, g.cwiseAbs().maxCoeff());
    return std::all_of(b.begin(), b.end(), [&](StateIndex s) { return std::abs(g[static_cast<Eigen::Index>(s)] - ref) <= tol; });
  };
  if (!constant_on_b(f) || !constant_on_b(h)) throw Error(ErrorCode::FNotConstantOnB, "f and h must be constant on B");

  const CollapsedChain c = collapse(chain, b);
  FormEquivalence out;
  out.base = bilinear_form(chain, f, h, FormKind::Generator);
  out.collapsed = bilinear_form(c.chain, c.project(f), c.project(h), FormKind::Generator);
  return out;
}

}  // namespace metapot
