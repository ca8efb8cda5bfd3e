#include "gmil/kernels.hpp"

#if defined(__x86_64__)

#include <immintrin.h>

// Compiled with -mavx2 for this translation unit only; callers go through
// the dispatch table after a cpuid check. mul+add (not FMA) keeps results
// bit-identical to the scalar reference.

namespace gmil::kernels {
namespace {

void matmul_avx2(const double* a, const double* b, double* out,
                 std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* oi = out + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = ai[p];
            if (aip == 0.0) continue;
            const double* bp = b + p * n;
            const __m256d va = _mm256_set1_pd(aip);
            std::size_t j = 0;
            for (; j + 4 <= n; j += 4) {
                __m256d vb = _mm256_loadu_pd(bp + j);
                __m256d vo = _mm256_loadu_pd(oi + j);
                vo = _mm256_add_pd(vo, _mm256_mul_pd(va, vb));
                _mm256_storeu_pd(oi + j, vo);
            }
            for (; j < n; ++j) oi[j] += aip * bp[j];
        }
    }
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vx = _mm256_loadu_pd(x + i);
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_add_pd(vy, _mm256_mul_pd(va, vx));
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void add_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_avx2(double alpha, const double* x, double* out, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) out[i] = alpha * x[i];
}

}  // namespace

const Backend& avx2_backend() {
    static const Backend b{matmul_avx2, axpy_avx2, add_avx2,
                           sub_avx2,    mul_avx2,  scale_avx2,
                           "avx2"};
    return b;
}

bool avx2_available() { return __builtin_cpu_supports("avx2"); }

}  // namespace gmil::kernels

#endif  // __x86_64__
