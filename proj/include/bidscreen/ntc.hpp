#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "bidscreen/matrix.hpp"

namespace bidscreen::ntc {

/// Boosting hyperparameters. Row/column subsampling and early stopping are off by default.
struct Params {
    int n_trees = 200;
    int max_depth = 4;
    double learning_rate = 0.1;
    std::size_t min_leaf = 50;
    bool histogram = false;  // quantile-bin features before split search
    int bins = 256;
    double subsample = 1.0;
    double colsample = 1.0;
    int early_stopping_rounds = 0;  // 0 disables
    double validation_fraction = 0.1;

    void validate() const;
};

struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // x[feature] < threshold goes left
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf log-odds contribution (already scaled by the learning rate)

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<Node> nodes;  // nodes[0] is the root

    double predict(std::span<const double> x) const;
    /// Index of the leaf reached by x.
    std::size_t leaf_of(std::span<const double> x) const;
};

class Model {
public:
    Model() = default;
    Model(std::size_t n_features, double base_score, Params params)
        : n_features_(n_features), base_score_(base_score), params_(params) {}

    std::size_t n_features() const { return n_features_; }
    double base_score() const { return base_score_; }
    const Params& params() const { return params_; }
    const std::vector<Tree>& trees() const { return trees_; }
    void add_tree(Tree tree) { trees_.push_back(std::move(tree)); }
    void truncate(std::size_t n) {
        if (n < trees_.size()) trees_.resize(n);
    }

    /// base_score + sum of tree outputs. Throws on wrong dimensionality.
    double margin(std::span<const double> x) const;
    /// sigmoid(margin), strictly inside (0, 1).
    double predict_proba(std::span<const double> x) const;
    std::vector<double> predict_proba(const Matrix& x) const;

    void save(std::ostream& out) const;
    static Model load(std::istream& in);

private:
    std::size_t n_features_ = 0;
    double base_score_ = 0.0;
    Params params_;
    std::vector<Tree> trees_;
};

/// Stagewise logistic-loss boosting: each stage fits a least-squares regression tree to
/// the residuals (label - p), then sets each leaf to the Newton step
/// sum(residual) / sum(p (1 - p)) times the learning rate.
/// Throws "degenerate training set" unless both labels are present.
Model fit(const Matrix& x, std::span<const int> labels, const Params& params, std::uint64_t seed);

struct FoldAssignment {
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<int> fold;  // fold index per instance
};

/// Stratified assignment: each class is shuffled with the seed, the classes are
/// concatenated and dealt round-robin, so fold sizes differ by at most one.
FoldAssignment make_folds(std::span<const int> labels, int k, std::uint64_t seed);

/// Out-of-fold probabilities: every instance is scored by the model trained on the
/// other k-1 folds. Folds may be trained on `threads` workers; results do not depend on it.
std::vector<double> cross_val_scores(const Matrix& x, std::span<const int> labels,
                                     const Params& params, const FoldAssignment& folds,
                                     int threads = 1);
std::vector<double> cross_val_scores(const Matrix& x, std::span<const int> labels,
                                     const Params& params, int k, std::uint64_t seed,
                                     int threads = 1);

}  // namespace bidscreen::ntc
