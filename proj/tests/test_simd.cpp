#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "bidscreen/random.hpp"
#include "bidscreen/simd/kernels.hpp"

using namespace bidscreen;
namespace simd = bidscreen::simd;

namespace {

std::vector<double> normals(std::size_t n, std::uint64_t seed, double sd = 1.0) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal(0.0, sd);
    return v;
}

// Plain loop over every sample; no truncation, no SIMD.
double brute_gaussian_sum(const std::vector<double>& s, double x, double inv_bw) {
    double acc = 0.0;
    for (double v : s) {
        const double u = (x - v) * inv_bw;
        acc += std::exp(-0.5 * u * u);
    }
    return acc;
}

}  // namespace

TEST_CASE("scalar gaussian sum matches the untruncated sum") {
    auto s = normals(3000, 1);
    std::sort(s.begin(), s.end());
    for (double x : {-4.0, -0.3, 0.0, 1.7, 6.0}) {
        const double ref = brute_gaussian_sum(s, x, 1.0 / 0.2);
        CHECK(simd::scalar::gaussian_sum(s, x, 1.0 / 0.2) == doctest::Approx(ref).epsilon(1e-12));
    }
}

TEST_CASE("dispatching gaussian_sums agrees with per-point scalar sums") {
    auto s = normals(2000, 2, 2.0);
    std::sort(s.begin(), s.end());
    const auto pts = normals(257, 3, 3.0);
    std::vector<double> out(pts.size());
    simd::gaussian_sums(s, pts, 1.0 / 0.35, out);
    for (std::size_t i = 0; i < pts.size(); ++i)
        CHECK(out[i] == doctest::Approx(simd::scalar::gaussian_sum(s, pts[i], 1.0 / 0.35)).epsilon(1e-12));
}

TEST_CASE("scalar sigmoid and gradients") {
    const std::vector<double> z = {-800, -35, -1, 0, 2, 35, 800};
    std::vector<double> p(z.size());
    simd::scalar::sigmoid(z, p);
    CHECK(p[3] == 0.5);
    CHECK(p[4] == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
    CHECK(p[0] >= 0.0);
    CHECK(p[6] <= 1.0);
    std::vector<double> y = {0, 1, 0, 1, 1, 0, 1}, r(z.size()), h(z.size());
    simd::scalar::logistic_grad_hess(y, z, r, h);
    for (std::size_t i = 0; i < z.size(); ++i) {
        CHECK(r[i] == doctest::Approx(y[i] - p[i]));
        CHECK(h[i] == doctest::Approx(p[i] * (1 - p[i])));
    }
    CHECK(simd::scalar::sum_scaled_clamp(std::vector<double>{0.5, 2.0, 4.0}, 0.5) == doctest::Approx(0.25 + 1 + 1));
}

#if defined(BIDSCREEN_HAVE_AVX2)

TEST_CASE("avx2 kernels are equivalent to the scalar reference") {
    if (simd::detected_isa() != simd::Isa::Avx2) {
        MESSAGE("CPU lacks AVX2; equivalence test skipped");
        return;
    }
    SUBCASE("gaussian_sum, including tails and lengths not divisible by 4") {
        for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 1001u}) {
            auto s = normals(n, 10 + n, 1.5);
            std::sort(s.begin(), s.end());
            for (double x : {-20.0, -2.5, 0.0, 0.1, 3.3, 20.0})
                for (double bw : {0.01, 0.3, 5.0}) {
                    const double a = simd::scalar::gaussian_sum(s, x, 1.0 / bw);
                    const double b = simd::avx2::gaussian_sum(s, x, 1.0 / bw);
                    CHECK(b == doctest::Approx(a).epsilon(1e-13).scale(1.0));
                }
        }
    }
    SUBCASE("sigmoid and logistic gradients") {
        auto z = normals(1027, 20, 8.0);
        z.push_back(-750.0);
        z.push_back(750.0);
        z.push_back(0.0);
        std::vector<double> a(z.size()), b(z.size());
        simd::scalar::sigmoid(z, a);
        simd::avx2::sigmoid(z, b);
        for (std::size_t i = 0; i < z.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-15);
        std::vector<double> y(z.size());
        Rng rng(4);
        for (auto& v : y) v = double(rng.below(2));
        std::vector<double> ra(z.size()), ha(z.size()), rb(z.size()), hb(z.size());
        simd::scalar::logistic_grad_hess(y, z, ra, ha);
        simd::avx2::logistic_grad_hess(y, z, rb, hb);
        for (std::size_t i = 0; i < z.size(); ++i) {
            CHECK(std::abs(ra[i] - rb[i]) <= 1e-15);
            CHECK(std::abs(ha[i] - hb[i]) <= 1e-15);
        }
    }
    SUBCASE("sum_scaled_clamp") {
        auto r = normals(1003, 30, 2.0);
        for (auto& v : r) v = std::abs(v);
        for (double alpha : {0.0, 0.2, 0.46, 1.0}) {
            const double a = simd::scalar::sum_scaled_clamp(r, alpha);
            const double b = simd::avx2::sum_scaled_clamp(r, alpha);
            CHECK(b == doctest::Approx(a).epsilon(1e-13));
        }
    }
}

TEST_CASE("the active instruction set can be forced") {
    const auto saved = simd::active_isa();
    simd::set_active_isa(simd::Isa::Scalar);
    CHECK(simd::active_isa() == simd::Isa::Scalar);
    if (simd::detected_isa() == simd::Isa::Avx2) {
        simd::set_active_isa(simd::Isa::Avx2);
        CHECK(simd::active_isa() == simd::Isa::Avx2);
    }
    simd::set_active_isa(saved);
}

#endif
