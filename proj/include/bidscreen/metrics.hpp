#pragma once

#include <span>
#include <vector>

namespace bidscreen::metrics {

/// Mid-ranks (1-based, ties share their average rank).
std::vector<double> ranks(std::span<const double> values);

/// Area under the ROC curve of `scores` for binary `labels` (1 = positive), ties counted
/// as one half. Throws when either class is absent.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Spearman rank correlation (Pearson on mid-ranks).
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace bidscreen::metrics
