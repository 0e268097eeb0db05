#include "lpa/matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace lpa {

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows_in) {
    if (rows_in.empty()) return {};
    Matrix m(rows_in.size(), rows_in.front().size());
    for (std::size_t i = 0; i < rows_in.size(); ++i) {
        if (rows_in[i].size() != m.cols)
            throw std::invalid_argument("from_rows: ragged row " + std::to_string(i));
        for (std::size_t j = 0; j < m.cols; ++j) m(i, j) = rows_in[i][j];
    }
    return m;
}

Matrix Matrix::row_vector(const std::vector<double>& v) {
    Matrix m(1, v.size());
    m.data = v;
    return m;
}

bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

void check_finite(const Matrix& m, const std::string& what) {
    for (double x : m.data)
        if (!std::isfinite(x))
            throw std::runtime_error("non-finite entry in " + what);
}

static void require_dims(bool ok, const char* op) {
    if (!ok) throw std::invalid_argument(std::string(op) + ": dimension mismatch");
}

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
    require_dims(a.cols == b.rows, "matmul");
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* ai = a.data.data() + i * a.cols;
        double* ci = c.data.data() + i * c.cols;
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = ai[k];
            const double* bk = b.data.data() + k * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    require_dims(a.cols == b.cols, "matmul_nt");
    Matrix c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < b.rows; ++j) {
            double s = 0.0;
            const double* ai = a.data.data() + i * a.cols;
            const double* bj = b.data.data() + j * b.cols;
            for (std::size_t k = 0; k < a.cols; ++k) s += ai[k] * bj[k];
            c(i, j) = s;
        }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    require_dims(a.rows == b.rows, "matmul_tn");
    Matrix c(a.cols, b.cols);
    for (std::size_t i = 0; i < a.cols; ++i)
        for (std::size_t j = 0; j < b.cols; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.rows; ++k) s += a(k, i) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

}  // namespace serial

// Parallel versions partition output rows; the per-row computation is the
// serial inner loop verbatim, so results are bit-identical.

Matrix matmul(const Matrix& a, const Matrix& b) {
    require_dims(a.cols == b.rows, "matmul");
    Matrix c(a.rows, b.cols);
    const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(a.rows);
#pragma omp parallel for schedule(static) if (a.rows * b.cols * a.cols > 32768)
    for (std::ptrdiff_t i = 0; i < m; ++i) {
        const double* ai = a.data.data() + i * a.cols;
        double* ci = c.data.data() + i * c.cols;
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = ai[k];
            const double* bk = b.data.data() + k * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    require_dims(a.cols == b.cols, "matmul_nt");
    Matrix c(a.rows, b.rows);
    const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(a.rows);
#pragma omp parallel for schedule(static) if (a.rows * b.rows * a.cols > 32768)
    for (std::ptrdiff_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < b.rows; ++j) {
            double s = 0.0;
            const double* ai = a.data.data() + i * a.cols;
            const double* bj = b.data.data() + j * b.cols;
            for (std::size_t k = 0; k < a.cols; ++k) s += ai[k] * bj[k];
            c(i, j) = s;
        }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    require_dims(a.rows == b.rows, "matmul_tn");
    Matrix c(a.cols, b.cols);
    const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(a.cols);
#pragma omp parallel for schedule(static) if (a.cols * b.cols * a.rows > 32768)
    for (std::ptrdiff_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < b.cols; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.rows; ++k) s += a(k, i) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

double dot(std::span<const double> a, std::span<const double> b) {
    require_dims(a.size() == b.size(), "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    require_dims(x.size() == y.size(), "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void scale(std::span<double> v, double alpha) {
    for (double& x : v) x *= alpha;
}

}  // namespace lpa
