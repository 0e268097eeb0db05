#include <doctest.h>

#include <stdexcept>

#include "lpa/matrix.hpp"
#include "lpa/rng.hpp"

using namespace lpa;

namespace {
Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    Rng rng = make_stream(seed, "test.matrix");
    Matrix m(r, c);
    for (double& x : m.data) x = rng.normal();
    return m;
}
}  // namespace

TEST_CASE("matmul basics") {
    Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
    Matrix b = Matrix::from_rows({{5, 6}, {7, 8}});
    Matrix c = matmul(a, b);
    CHECK(c(0, 0) == 19);
    CHECK(c(0, 1) == 22);
    CHECK(c(1, 0) == 43);
    CHECK(c(1, 1) == 50);
    CHECK_THROWS_AS(matmul(a, Matrix(3, 2)), std::invalid_argument);
}

TEST_CASE("openmp kernels are bit-identical to the serial reference") {
    // shapes chosen to cross the parallelization threshold in both directions
    const std::size_t shapes[][3] = {{3, 4, 5}, {17, 33, 9}, {64, 64, 64}, {100, 40, 120}};
    for (auto [m, k, n] : shapes) {
        Matrix a = random_matrix(m, k, m * 1000 + k);
        Matrix b = random_matrix(k, n, k * 1000 + n);
        CHECK(matmul(a, b) == serial::matmul(a, b));
        Matrix bt = random_matrix(n, k, n * 7 + k);
        CHECK(matmul_nt(a, bt) == serial::matmul_nt(a, bt));
        Matrix a2 = random_matrix(k, m, k * 13 + m);
        Matrix b2 = random_matrix(k, n, k * 17 + n);
        CHECK(matmul_tn(a2, b2) == serial::matmul_tn(a2, b2));
    }
}

TEST_CASE("vector helpers") {
    std::vector<double> x = {3.0, 4.0};
    CHECK(l2_norm(x) == doctest::Approx(5.0));
    std::vector<double> y = {1.0, 1.0};
    axpy(2.0, x, y);
    CHECK(y[0] == 7.0);
    CHECK(y[1] == 9.0);
    CHECK(dot(x, x) == 25.0);
}

TEST_CASE("check_finite rejects NaN") {
    Matrix m(2, 2, 1.0);
    CHECK_NOTHROW(check_finite(m, "m"));
    m(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(check_finite(m, "m"), std::runtime_error);
}

TEST_CASE("from_rows rejects ragged input") {
    CHECK_THROWS_AS(Matrix::from_rows({{1, 2}, {3}}), std::invalid_argument);
}
