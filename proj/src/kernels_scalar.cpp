#include "gmil/kernels.hpp"

namespace gmil::kernels {
namespace {

void matmul_scalar(const double* a, const double* b, double* out,
                   std::size_t m, std::size_t k, std::size_t n) {
    // Row update form: out[i,:] += a[i,p] * b[p,:]. Accumulation over p is
    // sequential per output element, matching the AVX2 variant.
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* oi = out + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = ai[p];
            if (aip == 0.0) continue;
            const double* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) oi[j] += aip * bp[j];
        }
    }
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void add_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_scalar(double alpha, const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

}  // namespace

const Backend& scalar_backend() {
    static const Backend b{matmul_scalar, axpy_scalar, add_scalar,
                           sub_scalar,    mul_scalar,  scale_scalar,
                           "scalar"};
    return b;
}

}  // namespace gmil::kernels
