#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "bidscreen/matrix.hpp"

namespace bidscreen::explain {

/// 1 iff posterior > threshold (strict).
std::vector<int> label_cluster(std::span<const double> posteriors, double threshold = 0.96);

struct TreeParams {
    int max_depth = 4;
    std::size_t min_leaf = 100;

    void validate() const;
};

struct CartNode {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;  // x[feature] < threshold goes left
    int left = -1;
    int right = -1;
    int depth = 0;
    std::size_t samples = 0;
    std::size_t positives = 0;  // class-1 samples
    double gini = 0.0;
    int label = 0;  // majority class, ties go to 0

    bool is_leaf() const { return feature < 0; }
    double purity() const;  // share of the majority class
};

struct CartTree {
    std::vector<CartNode> nodes;
    std::vector<std::string> feature_names;
    TreeParams params;

    std::size_t leaf_of(std::span<const double> x) const;
    int predict(std::span<const double> x) const { return nodes[leaf_of(x)].label; }
    int depth() const;
};

/// Greedy CART with Gini impurity. Candidate thresholds are midpoints between consecutive
/// distinct values; ties in impurity go to the lower feature index, then the lower threshold.
/// Throws unless both classes are present.
CartTree fit_tree(const Matrix& x, std::span<const int> labels, const TreeParams& params,
                  std::vector<std::string> feature_names = {});

/// One merged constraint on a feature: lower <= x < upper (either side optional).
struct Condition {
    std::size_t feature = 0;
    std::string name;
    std::optional<double> lower;  // x >= lower
    std::optional<double> upper;  // x < upper

    bool admits(double v) const;
    std::string describe() const;
};

struct Path {
    std::size_t leaf = 0;
    std::vector<Condition> conditions;  // in order of first appearance on the path
    std::size_t coverage = 0;
    double precision = 0.0;

    std::string describe() const;
    const Condition* find(std::string_view feature) const;
};

struct PathReport {
    std::vector<Path> paths;
    std::size_t predicted_positive() const;
};

/// One path per class-1 leaf, root to leaf.
PathReport extract_paths(const CartTree& tree);

struct Evaluation {
    std::size_t n = 0;
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    double accuracy = 0.0;
    double precision[2] = {0.0, 0.0};  // per class; 0 when a class is never predicted
    double recall[2] = {0.0, 0.0};     // per class; 0 when a class is absent
};

Evaluation evaluate_tree(const CartTree& tree, const Matrix& x, std::span<const int> labels);

void write_dot(std::ostream& out, const CartTree& tree);
void write_text(std::ostream& out, const CartTree& tree);
void write_paths(std::ostream& out, const PathReport& report);

}  // namespace bidscreen::explain
