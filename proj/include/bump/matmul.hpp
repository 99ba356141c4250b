#pragma once

// Row-major matrix kernels. matmul() parallelizes over rows of C with
// OpenMP; every output element accumulates in the same order as in
// matmul_serial(), so the two are bit-identical for all inputs and any
// thread count. The serial kernel stays as the reference for tests and
// the benchmark target.

#include <cstddef>

namespace bump {

// C (m x n) = A (m x k) * B (k x n)
void matmul_serial(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n);
void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n);

// AT (n x m) = transpose of A (m x n)
void transpose(const double* a, double* at, std::size_t m, std::size_t n);

}  // namespace bump
