#pragma once

// Data-parallel inner loops with a scalar reference and an AVX2 variant. The public
// functions dispatch at runtime on the detected (or overridden) instruction set; the
// per-ISA namespaces are exposed for equivalence testing.

#include <span>

namespace bidscreen::simd {

enum class Isa { Scalar, Avx2 };

const char* isa_name(Isa isa);

/// Best instruction set supported by this CPU and this build.
Isa detected_isa();

/// Instruction set used by the dispatching functions. Defaults to detected_isa(), or to
/// the value of BIDSCREEN_ISA (`scalar` / `avx2`) when that is set and supported.
Isa active_isa();

/// Forces an instruction set; throws bidscreen::Error if it is not available.
void set_active_isa(Isa isa);

/// Kernel arguments beyond which exp(-0.5 u^2) is treated as zero.
inline constexpr double kGaussianCutoff = 9.0;

/// out[i] = sum_j exp(-0.5 * ((points[i] - samples[j]) * inv_bw)^2) over the samples with
/// |points[i] - samples[j]| * inv_bw <= kGaussianCutoff. `samples` must be sorted.
void gaussian_sums(std::span<const double> sorted_samples, std::span<const double> points,
                   double inv_bw, std::span<double> out);

/// out[i] = 1 / (1 + exp(-logits[i])).
void sigmoid(std::span<const double> logits, std::span<double> out);

/// residual = label - p and hessian = p (1 - p) with p = sigmoid(logit).
void logistic_grad_hess(std::span<const double> labels, std::span<const double> logits,
                        std::span<double> residual, std::span<double> hessian);

/// mean_i min(1, alpha * ratios[i]); 0 for empty input.
double mean_scaled_clamp(std::span<const double> ratios, double alpha);

namespace scalar {
double gaussian_sum(std::span<const double> samples, double x, double inv_bw);
void sigmoid(std::span<const double> logits, std::span<double> out);
void logistic_grad_hess(std::span<const double> labels, std::span<const double> logits,
                        std::span<double> residual, std::span<double> hessian);
double sum_scaled_clamp(std::span<const double> ratios, double alpha);
}  // namespace scalar

#if defined(BIDSCREEN_HAVE_AVX2)
namespace avx2 {
double gaussian_sum(std::span<const double> samples, double x, double inv_bw);
void sigmoid(std::span<const double> logits, std::span<double> out);
void logistic_grad_hess(std::span<const double> labels, std::span<const double> logits,
                        std::span<double> residual, std::span<double> hessian);
double sum_scaled_clamp(std::span<const double> ratios, double alpha);
}  // namespace avx2
#endif

}  // namespace bidscreen::simd
