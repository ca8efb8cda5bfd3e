#pragma once

#include <cstddef>
#include <string_view>

// Dense f64 inner loops. Each kernel has a scalar reference and, on x86-64
// with AVX2, a vectorized variant selected once at startup. Vector variants
// preserve the scalar accumulation order per output element, so results are
// bit-identical across backends (no FMA contraction).

namespace gmil::kernels {

struct Backend {
    // out[m x n] = a[m x k] * b[k x n], row-major, out must be zeroed by caller.
    void (*matmul)(const double* a, const double* b, double* out,
                   std::size_t m, std::size_t k, std::size_t n);
    // y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    void (*add)(const double* a, const double* b, double* out, std::size_t n);
    void (*sub)(const double* a, const double* b, double* out, std::size_t n);
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);
    void (*scale)(double alpha, const double* x, double* out, std::size_t n);
    std::string_view name;
};

const Backend& scalar_backend();
#if defined(__x86_64__)
const Backend& avx2_backend();
bool avx2_available();
#endif

// Active backend, chosen at first use (scalar unless AVX2 is present).
const Backend& active();

// Force a specific backend by name ("scalar", "avx2" or "auto"); used by tests.
void force_backend(std::string_view name);

}  // namespace gmil::kernels
