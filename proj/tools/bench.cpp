// Timing harness for the OpenMP kernels against their serial references.
// Each section checks bit-identical results before reporting throughput.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "bump/fitdetect.hpp"
#include "bump/matmul.hpp"
#include "bump/network.hpp"
#include "bump/rng.hpp"
#include "bump/simulate.hpp"
#include "bump/tensor.hpp"

using namespace bump;
using clock_type = std::chrono::steady_clock;

namespace {

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

int threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void bench_matmul(std::size_t m, std::size_t k, std::size_t n, int reps) {
    Rng rng(1);
    std::vector<double> a(m * k), b(k * n), c_serial(m * n), c_par(m * n);
    for (double& v : a) v = rng.normal();
    for (double& v : b) v = rng.normal();

    matmul_serial(a.data(), b.data(), c_serial.data(), m, k, n);
    matmul(a.data(), b.data(), c_par.data(), m, k, n);
    const bool same = bit_equal(c_serial, c_par);

    auto t0 = clock_type::now();
    for (int r = 0; r < reps; ++r)
        matmul_serial(a.data(), b.data(), c_serial.data(), m, k, n);
    const double ts = seconds_since(t0) / reps;

    t0 = clock_type::now();
    for (int r = 0; r < reps; ++r)
        matmul(a.data(), b.data(), c_par.data(), m, k, n);
    const double tp = seconds_since(t0) / reps;

    const double gflop = 2.0 * static_cast<double>(m) * static_cast<double>(k) *
                         static_cast<double>(n) / 1e9;
    std::printf("matmul %4zux%4zux%4zu  serial %8.2f ms (%6.2f GFLOP/s)  omp %8.2f ms (%6.2f GFLOP/s)  speedup %.2fx  %s\n",
                m, k, n, ts * 1e3, gflop / ts, tp * 1e3, gflop / tp, ts / tp,
                same ? "bit-identical" : "MISMATCH");
}

void bench_forward(int reps) {
    const auto spec = tensornet::preset("CNN2-REF");
    const auto model = tensornet::init(spec, 7);

    const std::size_t batch = 16;
    Tensor x({batch, 1, 69, 69});
    Rng rng(2);
    for (double& v : x.values()) v = rng.uniform01();

#ifdef _OPENMP
    omp_set_num_threads(1);
#endif
    Tensor y1 = tensornet::forward(model, x);
    auto t0 = clock_type::now();
    for (int r = 0; r < reps; ++r) y1 = tensornet::forward(model, x);
    const double ts = seconds_since(t0) / reps;

#ifdef _OPENMP
    omp_set_num_threads(threads() > 1 ? threads() : omp_get_num_procs());
#endif
    Tensor y2 = tensornet::forward(model, x);
    auto t1 = clock_type::now();
    for (int r = 0; r < reps; ++r) y2 = tensornet::forward(model, x);
    const double tp = seconds_since(t1) / reps;

    const bool same = bit_equal(y1.values(), y2.values());
    std::printf("cnn forward, batch %zu      serial %8.2f ms             omp %8.2f ms             speedup %.2fx  %s\n",
                batch, ts * 1e3, tp * 1e3, ts / tp, same ? "bit-identical" : "MISMATCH");
}

void bench_fit(int reps) {
    const auto composite = simulate::synth_composite({});
    simulate::SampleSpec spec;
    spec.label = simulate::Label::bump;
    spec.z_em = 2.0;
    spec.z_abs = 1.3;
    spec.params.c1 = 0.1;
    spec.params.c2 = 0.6;
    spec.params.bump = {4.59, 1.0, spectra::c3_from_area(2.0, 1.0)};
    spec.snr = 25.0;
    spec.seed = 11;
    const auto observed = simulate::generate_sample(composite, spec);

    const auto serial =
        fitdetect::fit_spectrum_serial(observed, composite, spec.z_em, spec.z_abs);
    const auto par =
        fitdetect::fit_spectrum(observed, composite, spec.z_em, spec.z_abs);
    const bool same = serial.x0 == par.x0 && serial.gamma == par.gamma &&
                      serial.sse == par.sse && serial.c3 == par.c3;

    auto t0 = clock_type::now();
    for (int r = 0; r < reps; ++r)
        (void)fitdetect::fit_spectrum_serial(observed, composite, spec.z_em, spec.z_abs);
    const double ts = seconds_since(t0) / reps;

    t0 = clock_type::now();
    for (int r = 0; r < reps; ++r)
        (void)fitdetect::fit_spectrum(observed, composite, spec.z_em, spec.z_abs);
    const double tp = seconds_since(t0) / reps;

    std::printf("drude grid fit (61x81)     serial %8.2f ms             omp %8.2f ms             speedup %.2fx  %s\n",
                ts * 1e3, tp * 1e3, ts / tp, same ? "identical result" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    int reps = 5;
    if (argc > 1) reps = std::max(1, std::atoi(argv[1]));

    std::printf("threads available: %d, reps per measurement: %d\n\n", threads(), reps);
    bench_matmul(256, 512, 256, reps);
    bench_matmul(16, 4761, 400, reps);
    bench_forward(reps);
    bench_fit(reps);
    return 0;
}
