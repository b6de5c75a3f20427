#include <algorithm>
#include <cmath>

#include "bidscreen/simd/kernels.hpp"

namespace bidscreen::simd::scalar {

double gaussian_sum(std::span<const double> samples, double x, double inv_bw) {
    double acc = 0.0;
    for (double s : samples) {
        const double u = (x - s) * inv_bw;
        acc += std::exp(-0.5 * u * u);
    }
    return acc;
}

void sigmoid(std::span<const double> logits, std::span<double> out) {
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double z = std::clamp(logits[i], -700.0, 700.0);
        out[i] = 1.0 / (1.0 + std::exp(-z));
    }
}

void logistic_grad_hess(std::span<const double> labels, std::span<const double> logits,
                        std::span<double> residual, std::span<double> hessian) {
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double z = std::clamp(logits[i], -700.0, 700.0);
        const double p = 1.0 / (1.0 + std::exp(-z));
        residual[i] = labels[i] - p;
        hessian[i] = p * (1.0 - p);
    }
}

double sum_scaled_clamp(std::span<const double> ratios, double alpha) {
    double acc = 0.0;
    for (double r : ratios) acc += std::min(1.0, alpha * r);
    return acc;
}

}  // namespace bidscreen::simd::scalar
