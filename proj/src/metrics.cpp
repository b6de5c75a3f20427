#include "bidscreen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bidscreen/common.hpp"

namespace bidscreen::metrics {

std::vector<double> ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double mid = 0.5 * double(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) out[order[k]] = mid;
        i = j + 1;
    }
    return out;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw Error("roc_auc: size mismatch");
    const auto r = ranks(scores);
    double pos_rank_sum = 0.0;
    std::size_t npos = 0;
    for (std::size_t i = 0; i < r.size(); ++i)
        if (labels[i] == 1) {
            pos_rank_sum += r[i];
            ++npos;
        }
    const std::size_t nneg = r.size() - npos;
    if (npos == 0 || nneg == 0) throw Error("roc_auc: both classes required");
    const double np = double(npos);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * double(nneg));
}

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw Error("spearman: need two equal samples");
    const auto ra = ranks(a);
    const auto rb = ranks(b);
    const double n = double(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace bidscreen::metrics
