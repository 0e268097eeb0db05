#pragma once

#include <cstddef>
#include <vector>

#include "lpa/matrix.hpp"

namespace lpa {

/// Eigendecomposition of a symmetric matrix via cyclic Jacobi rotations.
/// Returns eigenvalues in descending order with matching eigenvector columns
/// stored as rows of `vectors`.
struct SymmetricEigen {
    std::vector<double> values;
    Matrix vectors;  // row i = eigenvector for values[i]
};

SymmetricEigen jacobi_eigen(const Matrix& sym, int sweeps = 64);

/// Top-k right singular vectors of g (n × d), computed from the spectral
/// decomposition of gᵀg. Rows of the result form an orthonormal basis.
struct TopKRightSingular {
    std::vector<double> singular_values;  // k, descending
    Matrix basis;                         // k × d
};

TopKRightSingular topk_right_singular(const Matrix& g, std::size_t k);

/// Orthogonal projection of v onto the row span of `basis` (rows orthonormal).
std::vector<double> project_onto_rowspan(const Matrix& basis, std::span<const double> v);

}  // namespace lpa
