#include "bump/matmul.hpp"

#include <algorithm>

namespace bump {

static inline void matmul_row(const double* a_row, const double* b, double* c_row,
                              std::size_t k, std::size_t n) {
    std::fill(c_row, c_row + n, 0.0);
    for (std::size_t kk = 0; kk < k; ++kk) {
        const double av = a_row[kk];
        const double* b_row = b + kk * n;
        for (std::size_t j = 0; j < n; ++j) {
            c_row[j] += av * b_row[j];
        }
    }
}

void matmul_serial(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        matmul_row(a + i * k, b, c + i * n, k, n);
    }
}

void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(m); ++i) {
        matmul_row(a + static_cast<std::size_t>(i) * k, b,
                   c + static_cast<std::size_t>(i) * n, k, n);
    }
}

void transpose(const double* a, double* at, std::size_t m, std::size_t n) {
    constexpr std::size_t block = 32;
    for (std::size_t i0 = 0; i0 < m; i0 += block) {
        const std::size_t i1 = std::min(i0 + block, m);
        for (std::size_t j0 = 0; j0 < n; j0 += block) {
            const std::size_t j1 = std::min(j0 + block, n);
            for (std::size_t i = i0; i < i1; ++i) {
                for (std::size_t j = j0; j < j1; ++j) {
                    at[j * m + i] = a[i * n + j];
                }
            }
        }
    }
}

}  // namespace bump
