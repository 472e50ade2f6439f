#pragma once

// Sparse linear-algebra helpers shared by the potential-theory modules.

#include "metapot/types.hpp"

namespace metapot::linalg {

/// Submatrix of a row-major matrix on the given rows and columns.
ColSparseMatrix restrict(const SparseMatrix& m, const StateSet& rows, const StateSet& cols);

/// Sparse LU solve. Throws SingularSystem when factorization fails.
Vector solve(const ColSparseMatrix& a, const Vector& b);
DenseMatrix solve(const ColSparseMatrix& a, const DenseMatrix& b);

/// Solves (L u)(x) = -source(x) for x in `interior`, u = boundary on the
/// complement of `interior`. `boundary` and `source` are full-length; the
/// interior entries of `boundary` are ignored.
Vector solve_dirichlet(const SparseMatrix& generator, const StateSet& interior,
                       const Vector& boundary, const Vector& source);

/// Max-norm of (L u + source) on the interior.
double dirichlet_residual(const SparseMatrix& generator, const StateSet& interior,
                          const Vector& u, const Vector& source);

}  // namespace metapot::linalg
