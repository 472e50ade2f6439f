#include "metapot/linalg.hpp"

#include "metapot/error.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <limits>

namespace metapot {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidGenerator: return "InvalidGenerator";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::Overlap: return "Overlap";
    case ErrorCode::StateNotInA: return "StateNotInA";
    case ErrorCode::StateInB: return "StateInB";
    case ErrorCode::NotAPartition: return "NotAPartition";
    case ErrorCode::EmptyF: return "EmptyF";
    case ErrorCode::FullF: return "FullF";
    case ErrorCode::EmptyB: return "EmptyB";
    case ErrorCode::FullB: return "FullB";
    case ErrorCode::SetsNotInF: return "SetsNotInF";
    case ErrorCode::FNotConstantOnB: return "FNotConstantOnB";
    case ErrorCode::DegenerateQuadratic: return "DegenerateQuadratic";
    case ErrorCode::AbsorbingState: return "AbsorbingState";
    case ErrorCode::DegenerateInterval: return "DegenerateInterval";
    case ErrorCode::OutOfOrder: return "OutOfOrder";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::WindowTooWide: return "WindowTooWide";
    case ErrorCode::HorizonOverflow: return "HorizonOverflow";
    case ErrorCode::NeverVisitsF: return "NeverVisitsF";
    case ErrorCode::InsufficientVisits: return "InsufficientVisits";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::InvalidSampleCount: return "InvalidSampleCount";
  }
  return "Unknown";
}

namespace linalg {

ColSparseMatrix restrict(const SparseMatrix& m, const StateSet& rows, const StateSet& cols) {
  std::vector<std::ptrdiff_t> col_pos(static_cast<std::size_t>(m.cols()), -1);
  for (std::size_t j = 0; j < cols.size(); ++j) col_pos[cols[j]] = static_cast<std::ptrdiff_t>(j);

  std::vector<Triplet> trips;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (SparseMatrix::InnerIterator it(m, static_cast<Eigen::Index>(rows[i])); it; ++it) {
      const auto j = col_pos[static_cast<std::size_t>(it.col())];
      if (j >= 0) trips.emplace_back(static_cast<int>(i), static_cast<int>(j), it.value());
    }
  }
  ColSparseMatrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  return out;
}

namespace {

template <typename Rhs>
Rhs solve_impl(const ColSparseMatrix& a, const Rhs& b) {
  Eigen::SparseLU<ColSparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularSystem, "sparse LU factorization failed: " + lu.lastErrorMessage());
  }
  Rhs x = lu.solve(b);
  if (lu.info() != Eigen::Success || !x.allFinite()) {
    throw Error(ErrorCode::SingularSystem, "sparse LU solve failed");
  }
  return x;
}

}  // namespace

Vector solve(const ColSparseMatrix& a, const Vector& b) { return solve_impl(a, b); }
DenseMatrix solve(const ColSparseMatrix& a, const DenseMatrix& b) { return solve_impl(a, b); }

Vector solve_dirichlet(const SparseMatrix& generator, const StateSet& interior,
                       const Vector& boundary, const Vector& source) {
  const auto n = static_cast<std::size_t>(generator.rows());
  Vector u = boundary;
  for (auto i : interior) u[static_cast<Eigen::Index>(i)] = 0.0;
  if (interior.empty()) return u;

  // rhs_I = -source_I - L_{I,boundary} u_boundary
  Vector rhs(static_cast<Eigen::Index>(interior.size()));
  const auto inside = membership(interior, n);
  for (std::size_t k = 0; k < interior.size(); ++k) {
    double acc = -source[static_cast<Eigen::Index>(interior[k])];
    for (SparseMatrix::InnerIterator it(generator, static_cast<Eigen::Index>(interior[k])); it; ++it) {
      if (!inside[static_cast<std::size_t>(it.col())]) acc -= it.value() * u[it.col()];
    }
    rhs[static_cast<Eigen::Index>(k)] = acc;
  }
  const Vector x = solve(restrict(generator, interior, interior), rhs);
  for (std::size_t k = 0; k < interior.size(); ++k) {
    u[static_cast<Eigen::Index>(interior[k])] = x[static_cast<Eigen::Index>(k)];
  }
  return u;
}

double dirichlet_residual(const SparseMatrix& generator, const StateSet& interior,
                          const Vector& u, const Vector& source) {
  double worst = 0.0;
  for (auto i : interior) {
    const double r = generator.row(static_cast<Eigen::Index>(i)).dot(u) + source[static_cast<Eigen::Index>(i)];
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

}  // namespace linalg
}  // namespace metapot
