#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lpa {

/// Dense row-major matrix of doubles; the single numeric carrier for
/// activations, weights, gradients, and perturbations.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    static Matrix from_rows(const std::vector<std::vector<double>>& rows_in);
    static Matrix row_vector(const std::vector<double>& v);
};

bool operator==(const Matrix& a, const Matrix& b);

/// Throws std::runtime_error naming `what` if any entry is NaN/Inf.
void check_finite(const Matrix& m, const std::string& what);

// Serial reference kernels. The public kernels below must produce
// bit-identical output; tests compare the two paths on random inputs.
namespace serial {
Matrix matmul(const Matrix& a, const Matrix& b);     // a (m×k) · b (k×n)
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a (m×k) · bᵀ (n×k)
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // aᵀ (k×m) · b (k×n)
}  // namespace serial

// OpenMP kernels, row-partitioned so every output element is computed by
// the same inner loop as the serial reference.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);

// Small vector helpers.
double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);
void axpy(double alpha, std::span<const double> x, std::span<double> y);  // y += alpha*x
void scale(std::span<double> v, double alpha);

}  // namespace lpa
