// Compares the serial reference kernels against the OpenMP kernels and
// checks that both paths agree bit-exactly.

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "lpa/matrix.hpp"
#include "lpa/net.hpp"
#include "lpa/rng.hpp"

using namespace lpa;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    Rng rng = make_stream(seed, "bench");
    Matrix m(r, c);
    for (double& x : m.data) x = rng.normal();
    return m;
}

template <typename F>
double time_ms(F&& f, int reps) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) f();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP disabled\n");
#endif
    std::printf("%-28s %10s %10s %8s %6s\n", "kernel", "serial ms", "omp ms", "speedup",
                "equal");

    const std::vector<std::size_t> sizes = {64, 128, 256};
    for (std::size_t n : sizes) {
        Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
        Matrix ref, par;
        const int reps = n <= 128 ? 10 : 3;
        const double ts = time_ms([&] { ref = serial::matmul(a, b); }, reps);
        const double tp = time_ms([&] { par = matmul(a, b); }, reps);
        std::printf("matmul %4zux%-4zu              %10.3f %10.3f %7.2fx %6s\n", n, n, ts, tp,
                    ts / tp, ref == par ? "yes" : "NO");
    }
    for (std::size_t n : sizes) {
        Matrix a = random_matrix(n, n, 3), b = random_matrix(n, n, 4);
        Matrix ref, par;
        const int reps = n <= 128 ? 10 : 3;
        const double ts = time_ms([&] { ref = serial::matmul_nt(a, b); }, reps);
        const double tp = time_ms([&] { par = matmul_nt(a, b); }, reps);
        std::printf("matmul_nt %4zux%-4zu           %10.3f %10.3f %7.2fx %6s\n", n, n, ts, tp,
                    ts / tp, ref == par ? "yes" : "NO");
    }

    // end-to-end: forward + backward on a wide batch
    MlpNetwork net = make_mlp(64, {128, 128}, 10, 7);
    Matrix batch = random_matrix(256, 64, 5);
    std::vector<int> labels(256);
    Rng lr = make_stream(9, "labels");
    for (int& y : labels) y = static_cast<int>(lr.uniform_int(10));

    const double fwd = time_ms(
        [&] {
            ForwardTrace t = forward_full(net, batch);
            (void)t;
        },
        5);
    ForwardTrace trace = forward_full(net, batch);
    const double bwd = time_ms([&] { (void)backward(net, trace, labels, 1); }, 5);
    std::printf("forward 256x[64-128-128-10]   %10.3f ms\n", fwd);
    std::printf("backward                      %10.3f ms\n", bwd);
    return 0;
}
