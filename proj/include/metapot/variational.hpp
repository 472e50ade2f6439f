#pragma once

// Min-max Dirichlet principle for nonreversible capacities:
//   inf_f sup_h { 2<f,(-L)h>_mu - <h,(-L)h>_mu }
// over f = 1 on A1, f = 0 on A0, f constant on B, and h = 0 on A0,
// h constant on A1 and on B; free elsewhere.

#include "metapot/ctmc.hpp"

#include <vector>

namespace metapot {

struct SaddleProblem {
  StateSet a0;
  StateSet a1;
  StateSet b;
};

struct SaddleSolution {
  Vector f;
  Vector h;
  double value = 0.0;
  double kkt_residual = 0.0;
  SaddleProblem problem;

  double h_on_b() const { return h[static_cast<Eigen::Index>(problem.b.front())]; }
  double h_on_a1() const { return h[static_cast<Eigen::Index>(problem.a1.front())]; }
};

/// 2<f,(-L)h>_mu - <h,(-L)h>_mu.
double saddle_functional(const ChainModel& chain, const Vector& f, const Vector& h);

struct InnerSup {
  Vector h;
  double value = 0.0;
  double gradient_residual = 0.0;  // max-norm of the projected gradient, relative
};

/// Maximizes the functional over h for a fixed f. Any f is accepted (the
/// h-subspace does not depend on it). Throws DegenerateQuadratic when the
/// symmetric form is singular on the h-subspace (for instance A0 empty).
InnerSup inner_sup(const ChainModel& chain, const SaddleProblem& problem, const Vector& f);

/// Solves the saddle problem as one KKT system. A0, A1, B must be nonempty
/// and pairwise disjoint.
SaddleSolution solve_saddle(const ChainModel& chain, const SaddleProblem& problem);

/// r_T(B,A1) / (r_T(B,A0) + r_T(B,A1)) with T = A0 u A1 u B.
double saddle_rate_ratio(const ChainModel& chain, const SaddleProblem& problem);

struct RateRatio {
  double variational = 0.0;  // h_opt on the source metastate
  double direct = 0.0;       // r(E^x, E^y) / r(E^x, union of the other metastates)
};

/// Saddle with A1 = E^y, A0 = the other metastates, B = E^x; traces are on
/// the union of the metastates. Two metastates give 1 for both routes.
RateRatio average_rate_ratio(const ChainModel& chain, const std::vector<StateSet>& metastates, std::size_t x,
                             std::size_t y);

struct FormEquivalence {
  double base = 0.0;       // <f, L h>_mu
  double collapsed = 0.0;  // <f_bar, L_C h_bar>_mu_bar
  double residual() const { return base - collapsed; }
};

/// Throws FNotConstantOnB unless f and h are constant on B.
FormEquivalence collapsed_form_equivalence(const ChainModel& chain, const StateSet& b, const Vector& f,
                                           const Vector& h);

}  // namespace metapot
