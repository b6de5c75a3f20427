#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string_view>

#include "bidscreen/common.hpp"
#include "bidscreen/simd/kernels.hpp"

namespace bidscreen::simd {

namespace {

Isa initial_isa() {
    const Isa best = detected_isa();
    if (const char* env = std::getenv("BIDSCREEN_ISA")) {
        const std::string_view v(env);
        if (v == "scalar") return Isa::Scalar;
        if (v == "avx2" && best == Isa::Avx2) return Isa::Avx2;
    }
    return best;
}

std::atomic<Isa>& current() {
    static std::atomic<Isa> isa{initial_isa()};
    return isa;
}

}  // namespace

const char* isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

Isa detected_isa() {
#if defined(BIDSCREEN_HAVE_AVX2)
    static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    if (ok) return Isa::Avx2;
#endif
    return Isa::Scalar;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
    if (isa == Isa::Avx2 && detected_isa() != Isa::Avx2)
        throw Error("AVX2 kernels are not available on this machine/build");
    current().store(isa, std::memory_order_relaxed);
}

void gaussian_sums(std::span<const double> sorted_samples, std::span<const double> points,
                   double inv_bw, std::span<double> out) {
    const double reach = kGaussianCutoff / inv_bw;
    const Isa isa = active_isa();
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double x = points[i];
        const auto first = std::lower_bound(sorted_samples.begin(), sorted_samples.end(), x - reach);
        const auto last = std::upper_bound(first, sorted_samples.end(), x + reach);
        const std::span<const double> window(first, last);
#if defined(BIDSCREEN_HAVE_AVX2)
        if (isa == Isa::Avx2) {
            out[i] = avx2::gaussian_sum(window, x, inv_bw);
            continue;
        }
#endif
        out[i] = scalar::gaussian_sum(window, x, inv_bw);
    }
    (void)isa;
}

void sigmoid(std::span<const double> logits, std::span<double> out) {
#if defined(BIDSCREEN_HAVE_AVX2)
    if (active_isa() == Isa::Avx2) return avx2::sigmoid(logits, out);
#endif
    scalar::sigmoid(logits, out);
}

void logistic_grad_hess(std::span<const double> labels, std::span<const double> logits,
                        std::span<double> residual, std::span<double> hessian) {
#if defined(BIDSCREEN_HAVE_AVX2)
    if (active_isa() == Isa::Avx2) return avx2::logistic_grad_hess(labels, logits, residual, hessian);
#endif
    scalar::logistic_grad_hess(labels, logits, residual, hessian);
}

double mean_scaled_clamp(std::span<const double> ratios, double alpha) {
    if (ratios.empty()) return 0.0;
#if defined(BIDSCREEN_HAVE_AVX2)
    if (active_isa() == Isa::Avx2) return avx2::sum_scaled_clamp(ratios, alpha) / double(ratios.size());
#endif
    return scalar::sum_scaled_clamp(ratios, alpha) / double(ratios.size());
}

}  // namespace bidscreen::simd
