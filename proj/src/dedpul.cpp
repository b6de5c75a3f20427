#include "bidscreen/dedpul.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bidscreen/common.hpp"
#include "bidscreen/simd/kernels.hpp"

namespace bidscreen::dedpul {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double logit(double p) { return std::log(p) - std::log1p(-p); }

double inv_logit(double y) { return y >= 0 ? 1.0 / (1.0 + std::exp(-y)) : std::exp(y) / (1.0 + std::exp(y)); }

// dp/dy = p (1 - p), evaluated without cancellation at large |y|.
double jacobian(double y) {
    const double e = std::exp(-std::abs(y));
    return e / ((1.0 + e) * (1.0 + e));
}

std::vector<double> to_logits(std::span<const double> scores) {
    std::vector<double> out;
    out.reserve(scores.size());
    for (double s : scores) {
        if (!(s > 0.0 && s < 1.0)) throw Error("scores must lie strictly inside (0, 1)");
        out.push_back(logit(s));
    }
    return out;
}

}  // namespace

Grid make_grid(std::span<const double> scores, double pad, std::size_t points) {
    if (scores.empty()) throw Error("grid needs at least one score");
    if (points < 2) throw Error("grid needs at least two points");
    const auto y = to_logits(scores);
    const auto [lo_it, hi_it] = std::minmax_element(y.begin(), y.end());
    const double lo = *lo_it - pad;
    const double hi = *hi_it + pad;
    Grid g;
    g.logit.resize(points);
    g.score.resize(points);
    for (std::size_t i = 0; i < points; ++i) {
        g.logit[i] = lo + (hi - lo) * double(i) / double(points - 1);
        g.score[i] = inv_logit(g.logit[i]);
    }
    return g;
}

double DensityEstimate::at(double score) const {
    if (!(score > 0.0 && score < 1.0)) return 0.0;
    const auto& ys = grid.logit;
    const double y = logit(score);
    if (y < ys.front() || y > ys.back()) return 0.0;
    const double step = (ys.back() - ys.front()) / double(ys.size() - 1);
    std::size_t i = std::min(std::size_t((y - ys.front()) / step), ys.size() - 2);
    const double t = (y - ys[i]) / (ys[i + 1] - ys[i]);
    // Interpolate the logit-space density, then map to the score axis at the exact point.
    const double g0 = density[i] * jacobian(ys[i]);
    const double g1 = density[i + 1] * jacobian(ys[i + 1]);
    return ((1.0 - t) * g0 + t * g1) / jacobian(y);
}

double DensityEstimate::integral() const {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < density.size(); ++i)
        acc += 0.5 * (grid.score[i + 1] - grid.score[i]) * (density[i] + density[i + 1]);
    return acc;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw Error("quantile of empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw Error("quantile level must be in [0, 1]");
    const double h = q * double(values.size() - 1);
    const std::size_t lo = std::size_t(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    std::nth_element(values.begin(), values.begin() + lo, values.end());
    const double vlo = values[lo];
    if (hi == lo) return vlo;
    const double vhi = *std::min_element(values.begin() + lo + 1, values.end());
    return vlo + (h - double(lo)) * (vhi - vlo);
}

double silverman_bandwidth(std::span<const double> values) {
    if (values.size() < 2) throw Error("degenerate score distribution");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*lo == *hi) throw Error("degenerate score distribution");
    const double n = double(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    if (!(sd > 0.0)) throw Error("degenerate score distribution");
    std::vector<double> copy(values.begin(), values.end());
    const double iqr = quantile(copy, 0.75) - quantile(copy, 0.25);
    const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    return 0.9 * spread * std::pow(n, -0.2);
}

DensityEstimate kde_fit(std::span<const double> scores, std::optional<double> bandwidth,
                        const Grid& grid) {
    if (grid.logit.size() < 2 || grid.logit.size() != grid.score.size())
        throw Error("kde grid is malformed");
    DensityEstimate est;
    est.sorted_logits = to_logits(scores);
    std::sort(est.sorted_logits.begin(), est.sorted_logits.end());
    if (bandwidth) {
        if (!(*bandwidth > 0.0)) throw Error("bandwidth must be positive");
        if (est.sorted_logits.empty()) throw Error("kde needs at least one score");
        est.bandwidth = *bandwidth;
    } else {
        if (est.sorted_logits.size() < 10) throw Error("automatic bandwidth needs at least 10 scores");
        est.bandwidth = silverman_bandwidth(est.sorted_logits);
    }
    est.grid = grid;
    est.density.assign(grid.logit.size(), 0.0);
    simd::gaussian_sums(est.sorted_logits, grid.logit, 1.0 / est.bandwidth, est.density);
    const double norm = kInvSqrt2Pi / (double(est.sorted_logits.size()) * est.bandwidth);
    for (std::size_t i = 0; i < est.density.size(); ++i)
        est.density[i] *= norm / jacobian(grid.logit[i]);
    return est;
}

DensityEstimate kde_fit(std::span<const double> scores, std::optional<double> bandwidth,
                        std::size_t grid_points) {
    const auto y = to_logits(scores);
    double h = 0.0;
    if (bandwidth) {
        h = *bandwidth;
        if (!(h > 0.0)) throw Error("bandwidth must be positive");
    } else {
        if (y.size() < 10) throw Error("automatic bandwidth needs at least 10 scores");
        h = silverman_bandwidth(y);
    }
    return kde_fit(scores, h, make_grid(scores, 8.0 * h, grid_points));
}

std::vector<double> density_ratio(const DensityEstimate& pos, const DensityEstimate& unl,
                                  std::span<const double> at, double floor) {
    if (!(pos.grid == unl.grid)) throw Error("grid mismatch between densities");
    std::vector<double> r;
    r.reserve(at.size());
    for (double s : at) r.push_back(pos.at(s) / std::max(unl.at(s), floor));
    return r;
}

AlphaStar estimate_alpha_star(std::span<const double> ratios, double q) {
    if (ratios.empty()) throw Error("alpha* needs at least one ratio");
    std::vector<double> inv;
    inv.reserve(ratios.size());
    for (double r : ratios)
        if (r > 0.0) inv.push_back(std::min(1.0, 1.0 / r));
    if (inv.empty()) return {0.0, "all density ratios are zero; alpha* set to 0"};
    return {std::clamp(quantile(std::move(inv), q), 0.0, 1.0), std::nullopt};
}

EmResult em_refine(std::span<const double> ratios, double alpha_init, double tol, int max_iter) {
    if (!(alpha_init >= 0.0 && alpha_init <= 1.0)) throw Error("alpha_init must be in [0, 1]");
    EmResult res;
    double alpha = alpha_init;
    for (int it = 1; it <= max_iter; ++it) {
        const double next = simd::mean_scaled_clamp(ratios, alpha);
        res.iterations = it;
        const bool done = std::abs(next - alpha) < tol;
        alpha = next;
        if (done) {
            res.converged = true;
            break;
        }
    }
    res.alpha = std::clamp(alpha, 0.0, alpha_init);
    return res;
}

std::vector<double> regularize_ratios(std::span<const double> ratios, double alpha_star) {
    std::vector<double> out(ratios.begin(), ratios.end());
    if (!(alpha_star > 0.0) || out.empty()) return out;
    const double cap = 1.0 / alpha_star;
    for (double& r : out) r = std::min(r, cap);
    const double mean = std::accumulate(out.begin(), out.end(), 0.0) / double(out.size());
    if (!(mean > 0.0)) return std::vector<double>(ratios.begin(), ratios.end());
    for (double& r : out) r /= mean;
    return out;
}

std::vector<double> posteriors(std::span<const double> ratios, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("alpha must be in [0, 1]");
    std::vector<double> out;
    out.reserve(ratios.size());
    for (double r : ratios) out.push_back(std::clamp(1.0 - alpha * r, 0.0, 1.0));
    return out;
}

double cluster_mass(std::span<const double> posteriors, double threshold) {
    if (posteriors.empty()) return 0.0;
    const auto above = std::count_if(posteriors.begin(), posteriors.end(),
                                     [&](double p) { return p > threshold; });
    return double(above) / double(posteriors.size());
}

void Config::validate() const {
    if (bandwidth && !(*bandwidth > 0.0)) throw Error("kde bandwidth must be positive");
    if (!(quantile >= 0.0 && quantile < 1.0)) throw Error("alpha quantile must be in [0, 1)");
    if (!(ratio_floor > 0.0)) throw Error("ratio floor must be positive");
    if (grid_points < 16) throw Error("grid needs at least 16 points");
    if (!(tol > 0.0)) throw Error("em tolerance must be positive");
    if (max_iter < 1) throw Error("em max_iter must be >= 1");
    if (!(cluster_threshold >= 0.0 && cluster_threshold <= 1.0))
        throw Error("cluster threshold must be in [0, 1]");
}

PosteriorResult estimate(std::span<const double> positive_scores,
                         std::span<const double> unlabelled_scores, const Config& config) {
    config.validate();
    if (positive_scores.size() < 10 || unlabelled_scores.size() < 10)
        throw Error("need at least 10 labelled and 10 unlabelled scores");
    const auto ypos = to_logits(positive_scores);
    const auto yunl = to_logits(unlabelled_scores);
    // One kernel for both densities keeps the smoothed unlabelled density an exact mixture
    // of the smoothed components, so smoothing alone cannot push f_u / f_+ below alpha.
    const double h = config.bandwidth
                         ? *config.bandwidth
                         : std::max(silverman_bandwidth(ypos), silverman_bandwidth(yunl));

    std::vector<double> all(positive_scores.begin(), positive_scores.end());
    all.insert(all.end(), unlabelled_scores.begin(), unlabelled_scores.end());
    const Grid grid = make_grid(all, 8.0 * h, config.grid_points);

    PosteriorResult res;
    res.positive = kde_fit(positive_scores, h, grid);
    res.unlabelled = kde_fit(unlabelled_scores, h, grid);
    res.ratios = density_ratio(res.positive, res.unlabelled, unlabelled_scores, config.ratio_floor);

    const AlphaStar star = estimate_alpha_star(res.ratios, config.quantile);
    res.alpha_star = star.alpha;
    if (star.warning) res.warnings.push_back(*star.warning);

    const auto regular = regularize_ratios(res.ratios, res.alpha_star);
    res.em = em_refine(regular, res.alpha_star, config.tol, config.max_iter);
    if (!res.em.converged)
        res.warnings.push_back("alpha refinement did not converge in " +
                               std::to_string(config.max_iter) + " iterations");

    res.posteriors = posteriors(res.ratios, res.alpha_star);
    res.cluster_mass = cluster_mass(res.posteriors, config.cluster_threshold);
    return res;
}

}  // namespace bidscreen::dedpul
