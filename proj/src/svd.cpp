#include "lpa/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lpa {

SymmetricEigen jacobi_eigen(const Matrix& sym, int sweeps) {
    if (sym.rows != sym.cols) throw std::invalid_argument("jacobi_eigen: matrix not square");
    const std::size_t n = sym.rows;
    Matrix a = sym;
    Matrix v(n, n);
    for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

    for (int sweep = 0; sweep < sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a(p, i), aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

    SymmetricEigen out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        out.values[r] = a(order[r], order[r]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(r, i) = v(i, order[r]);
    }
    return out;
}

TopKRightSingular topk_right_singular(const Matrix& g, std::size_t k) {
    if (k < 1 || k > g.cols)
        throw std::invalid_argument("topk_right_singular: k out of range [1, " +
                                    std::to_string(g.cols) + "]");
    Matrix gram = matmul_tn(g, g);  // d × d
    SymmetricEigen eig = jacobi_eigen(gram);
    TopKRightSingular out;
    out.singular_values.resize(k);
    out.basis = Matrix(k, g.cols);
    for (std::size_t r = 0; r < k; ++r) {
        out.singular_values[r] = std::sqrt(std::max(0.0, eig.values[r]));
        for (std::size_t j = 0; j < g.cols; ++j) out.basis(r, j) = eig.vectors(r, j);
    }
    return out;
}

std::vector<double> project_onto_rowspan(const Matrix& basis, std::span<const double> v) {
    if (basis.cols != v.size())
        throw std::invalid_argument("project_onto_rowspan: dimension mismatch");
    std::vector<double> out(v.size(), 0.0);
    for (std::size_t r = 0; r < basis.rows; ++r) {
        const double coef = dot(basis.row(r), v);
        axpy(coef, basis.row(r), out);
    }
    return out;
}

}  // namespace lpa
