#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstddef>
#include <span>
#include <vector>

namespace metapot {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using ColSparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;
using Triplet = Eigen::Triplet<double>;

using StateIndex = std::size_t;

/// Sorted, duplicate-free list of state indices.
using StateSet = std::vector<StateIndex>;

StateSet make_set(std::vector<StateIndex> states);
StateSet set_union(const StateSet& a, const StateSet& b);
StateSet set_difference(const StateSet& a, const StateSet& b);
StateSet complement(const StateSet& a, std::size_t n);
bool disjoint(const StateSet& a, const StateSet& b);
bool contains(const StateSet& a, StateIndex s);
bool is_subset(const StateSet& a, const StateSet& b);

/// Dense 0/1 membership mask of length n.
std::vector<char> membership(const StateSet& a, std::size_t n);

/// Indicator function of a set as a dense vector.
Vector indicator(const StateSet& a, std::size_t n);

}  // namespace metapot
