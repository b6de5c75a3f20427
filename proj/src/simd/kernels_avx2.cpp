// Compiled with -mavx2 -mfma; only called after a runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "bidscreen/simd/kernels.hpp"

namespace bidscreen::simd::avx2 {

namespace {

// Cephes-style exp: range reduction by ln2 split in two parts, rational approximation on
// [-ln2/2, ln2/2], exponent rebuilt through the integer unit. About 1 ulp.
inline __m256d exp_pd(__m256d x) {
    const __m256d hi = _mm256_set1_pd(709.0);
    const __m256d lo = _mm256_set1_pd(-708.0);
    x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

    const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
    const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
    const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);

    __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    x = _mm256_fnmadd_pd(n, c1, x);
    x = _mm256_fnmadd_pd(n, c2, x);
    const __m256d xx = _mm256_mul_pd(x, x);

    __m256d p = _mm256_set1_pd(1.26177193074810590878e-4);
    p = _mm256_fmadd_pd(p, xx, _mm256_set1_pd(3.02994407707441961300e-2));
    p = _mm256_fmadd_pd(p, xx, _mm256_set1_pd(9.99999999999999999910e-1));
    p = _mm256_mul_pd(p, x);

    __m256d q = _mm256_set1_pd(3.00198505138664455042e-6);
    q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.52448340349684104192e-3));
    q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.27265548208155028766e-1));
    q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.00000000000000000009e0));

    __m256d r = _mm256_div_pd(p, _mm256_sub_pd(q, p));
    r = _mm256_fmadd_pd(_mm256_set1_pd(2.0), r, _mm256_set1_pd(1.0));

    const __m128i n32 = _mm256_cvtpd_epi32(n);
    __m256i bits = _mm256_cvtepi32_epi64(n32);
    bits = _mm256_add_epi64(bits, _mm256_set1_epi64x(1023));
    bits = _mm256_slli_epi64(bits, 52);
    return _mm256_mul_pd(r, _mm256_castsi256_pd(bits));
}

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline __m256d sigmoid_pd(__m256d z) {
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d e = exp_pd(_mm256_sub_pd(_mm256_setzero_pd(), z));
    return _mm256_div_pd(one, _mm256_add_pd(one, e));
}

}  // namespace

double gaussian_sum(std::span<const double> samples, double x, double inv_bw) {
    const __m256d vx = _mm256_set1_pd(x);
    const __m256d vinv = _mm256_set1_pd(inv_bw);
    const __m256d mhalf = _mm256_set1_pd(-0.5);
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    const std::size_t n = samples.size();
    for (; i + 8 <= n; i += 8) {
        const __m256d u0 = _mm256_mul_pd(_mm256_sub_pd(vx, _mm256_loadu_pd(&samples[i])), vinv);
        const __m256d u1 = _mm256_mul_pd(_mm256_sub_pd(vx, _mm256_loadu_pd(&samples[i + 4])), vinv);
        acc0 = _mm256_add_pd(acc0, exp_pd(_mm256_mul_pd(mhalf, _mm256_mul_pd(u0, u0))));
        acc1 = _mm256_add_pd(acc1, exp_pd(_mm256_mul_pd(mhalf, _mm256_mul_pd(u1, u1))));
    }
    for (; i + 4 <= n; i += 4) {
        const __m256d u = _mm256_mul_pd(_mm256_sub_pd(vx, _mm256_loadu_pd(&samples[i])), vinv);
        acc0 = _mm256_add_pd(acc0, exp_pd(_mm256_mul_pd(mhalf, _mm256_mul_pd(u, u))));
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) {
        const double u = (x - samples[i]) * inv_bw;
        acc += std::exp(-0.5 * u * u);
    }
    return acc;
}

void sigmoid(std::span<const double> logits, std::span<double> out) {
    const __m256d lo = _mm256_set1_pd(-700.0);
    const __m256d hi = _mm256_set1_pd(700.0);
    std::size_t i = 0;
    for (; i + 4 <= logits.size(); i += 4) {
        const __m256d z = _mm256_min_pd(_mm256_max_pd(_mm256_loadu_pd(&logits[i]), lo), hi);
        _mm256_storeu_pd(&out[i], sigmoid_pd(z));
    }
    for (; i < logits.size(); ++i) {
        const double z = std::clamp(logits[i], -700.0, 700.0);
        out[i] = 1.0 / (1.0 + std::exp(-z));
    }
}

void logistic_grad_hess(std::span<const double> labels, std::span<const double> logits,
                        std::span<double> residual, std::span<double> hessian) {
    const __m256d lo = _mm256_set1_pd(-700.0);
    const __m256d hi = _mm256_set1_pd(700.0);
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= logits.size(); i += 4) {
        const __m256d z = _mm256_min_pd(_mm256_max_pd(_mm256_loadu_pd(&logits[i]), lo), hi);
        const __m256d p = sigmoid_pd(z);
        _mm256_storeu_pd(&residual[i], _mm256_sub_pd(_mm256_loadu_pd(&labels[i]), p));
        _mm256_storeu_pd(&hessian[i], _mm256_mul_pd(p, _mm256_sub_pd(one, p)));
    }
    for (; i < logits.size(); ++i) {
        const double z = std::clamp(logits[i], -700.0, 700.0);
        const double p = 1.0 / (1.0 + std::exp(-z));
        residual[i] = labels[i] - p;
        hessian[i] = p * (1.0 - p);
    }
}

double sum_scaled_clamp(std::span<const double> ratios, double alpha) {
    const __m256d va = _mm256_set1_pd(alpha);
    const __m256d one = _mm256_set1_pd(1.0);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= ratios.size(); i += 4)
        acc = _mm256_add_pd(acc, _mm256_min_pd(one, _mm256_mul_pd(va, _mm256_loadu_pd(&ratios[i]))));
    double total = hsum(acc);
    for (; i < ratios.size(); ++i) total += std::min(1.0, alpha * ratios[i]);
    return total;
}

}  // namespace bidscreen::simd::avx2
