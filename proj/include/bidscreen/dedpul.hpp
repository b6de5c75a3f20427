#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bidscreen::dedpul {

/// Evaluation points shared by the densities that get divided by each other. Points are
/// uniform in logit space; `score` holds the same points mapped back to (0, 1).
struct Grid {
    std::vector<double> logit;
    std::vector<double> score;

    friend bool operator==(const Grid&, const Grid&) = default;
};

/// Uniform logit grid covering [min(logit s) - pad, max(logit s) + pad].
Grid make_grid(std::span<const double> scores, double pad, std::size_t points = 2048);

/// Gaussian KDE of logit(score), reported as a density on the score axis:
/// f(p) = g(logit p) / (p (1 - p)).
struct DensityEstimate {
    std::vector<double> sorted_logits;
    double bandwidth = 0.0;  // in logit units
    Grid grid;
    std::vector<double> density;  // f at grid.score

    /// Linear interpolation of f in logit coordinates; 0 outside the grid.
    double at(double score) const;
    /// Trapezoid rule of f over the score axis.
    double integral() const;
};

/// Silverman's rule 0.9 min(sd, IQR/1.34) n^(-1/5); falls back to sd when the IQR is 0.
/// Throws "degenerate score distribution" when sd is 0.
double silverman_bandwidth(std::span<const double> values);

/// Fits the KDE on the given grid. A nullopt bandwidth selects Silverman's rule on the
/// logit sample, which requires >= 10 scores. Scores must lie strictly inside (0, 1).
DensityEstimate kde_fit(std::span<const double> scores, std::optional<double> bandwidth,
                        const Grid& grid);
/// As above with a grid built from the sample itself.
DensityEstimate kde_fit(std::span<const double> scores, std::optional<double> bandwidth = {},
                        std::size_t grid_points = 2048);

inline constexpr double kRatioFloor = 1e-8;

/// r_i = f_pos(s_i) / max(f_unl(s_i), floor). Throws "grid mismatch" unless both densities
/// were evaluated on the same grid.
std::vector<double> density_ratio(const DensityEstimate& pos, const DensityEstimate& unl,
                                  std::span<const double> at, double floor = kRatioFloor);

/// Type-7 (linear interpolation) sample quantile; `values` need not be sorted.
double quantile(std::vector<double> values, double q);

struct AlphaStar {
    double alpha = 0.0;
    std::optional<std::string> warning;
};

/// Quantile-regularised infimum of f_u / f_pos: the q-quantile of min(1, 1/r_i) over r_i > 0.
AlphaStar estimate_alpha_star(std::span<const double> ratios, double q = 0.05);

struct EmResult {
    double alpha = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Fixed-point iteration alpha <- mean_i min(1, alpha r_i) from alpha_init until successive
/// iterates differ by less than tol; the result is clamped to [0, alpha_init].
EmResult em_refine(std::span<const double> ratios, double alpha_init, double tol = 1e-6,
                   int max_iter = 1000);

/// Caps ratios at 1/alpha_star and rescales them to unit mean, restoring E_u[f_pos/f_u] = 1
/// after the quantile regularisation. Returns the input unchanged when alpha_star is 0 or
/// all ratios are 0.
std::vector<double> regularize_ratios(std::span<const double> ratios, double alpha_star);

/// clamp(1 - alpha r_i, 0, 1): probability that an unlabelled instance is not from the
/// labelled (fair) distribution.
std::vector<double> posteriors(std::span<const double> ratios, double alpha);

/// Fraction of posteriors strictly above the threshold.
double cluster_mass(std::span<const double> posteriors, double threshold);

struct Config {
    std::optional<double> bandwidth;  // nullopt: larger Silverman bandwidth of the two samples, shared
    double quantile = 0.05;
    double ratio_floor = kRatioFloor;
    std::size_t grid_points = 2048;
    double tol = 1e-6;
    int max_iter = 1000;
    double cluster_threshold = 0.96;

    void validate() const;
};

struct PosteriorResult {
    double alpha_star = 0.0;
    EmResult em;
    std::vector<double> ratios;      // per unlabelled instance
    std::vector<double> posteriors;  // per unlabelled instance, computed with alpha_star
    double cluster_mass = 0.0;
    DensityEstimate positive;
    DensityEstimate unlabelled;
    std::vector<std::string> warnings;
};

/// Whole second stage: densities of classifier scores for labelled and unlabelled
/// instances, ratios at unlabelled scores, alpha*, refined alpha and posteriors.
PosteriorResult estimate(std::span<const double> positive_scores,
                         std::span<const double> unlabelled_scores, const Config& config = {});

}  // namespace bidscreen::dedpul
