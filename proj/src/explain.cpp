#include "bidscreen/explain.hpp"

#include <algorithm>
#include <cassert>
#include <numeric>

#include "bidscreen/csv.hpp"

namespace bidscreen::explain {

std::vector<int> label_cluster(std::span<const double> posteriors, double threshold) {
    std::vector<int> out;
    out.reserve(posteriors.size());
    for (double p : posteriors) out.push_back(p > threshold ? 1 : 0);
    return out;
}

void TreeParams::validate() const {
    if (max_depth < 1) throw Error("tree max_depth must be >= 1");
    if (min_leaf < 1) throw Error("tree min_leaf must be >= 1");
}

double CartNode::purity() const {
    if (samples == 0) return 0.0;
    const double p = double(positives) / double(samples);
    return label == 1 ? p : 1.0 - p;
}

std::size_t CartTree::leaf_of(std::span<const double> x) const {
    std::size_t id = 0;
    while (!nodes[id].is_leaf()) {
        const auto& n = nodes[id];
        id = std::size_t(x[n.feature] < n.threshold ? n.left : n.right);
    }
    return id;
}

int CartTree::depth() const {
    int d = 0;
    for (const auto& n : nodes) d = std::max(d, n.depth);
    return d;
}

namespace {

double gini(std::size_t n, std::size_t pos) {
    if (n == 0) return 0.0;
    const double p = double(pos) / double(n);
    return 2.0 * p * (1.0 - p);
}

CartNode make_node(std::size_t n, std::size_t pos, int depth) {
    CartNode node;
    node.samples = n;
    node.positives = pos;
    node.depth = depth;
    node.gini = gini(n, pos);
    node.label = 2 * pos > n ? 1 : 0;
    return node;
}

double split_point(double lo, double hi) {
    const double mid = lo + 0.5 * (hi - lo);
    return mid > lo ? mid : hi;
}

}  // namespace

CartTree fit_tree(const Matrix& x, std::span<const int> labels, const TreeParams& params,
                  std::vector<std::string> feature_names) {
    params.validate();
    if (x.rows() != labels.size()) throw Error("fit_tree: rows and labels differ in length");
    if (feature_names.empty())
        for (std::size_t f = 0; f < x.cols(); ++f) feature_names.push_back("x" + std::to_string(f));
    if (feature_names.size() != x.cols()) throw Error("fit_tree: feature name count mismatch");
    std::size_t pos = 0;
    for (int y : labels) pos += std::size_t(y == 1);
    if (pos == 0 || pos == labels.size()) throw Error("fit_tree needs both classes");

    CartTree tree;
    tree.feature_names = std::move(feature_names);
    tree.params = params;

    struct Work {
        int node;
        std::vector<std::size_t> rows;
    };
    tree.nodes.push_back(make_node(labels.size(), pos, 0));
    std::vector<Work> stack;
    {
        std::vector<std::size_t> all(labels.size());
        std::iota(all.begin(), all.end(), 0);
        stack.push_back({0, std::move(all)});
    }

    while (!stack.empty()) {
        Work w = std::move(stack.back());
        stack.pop_back();
        const CartNode node = tree.nodes[w.node];
        if (node.depth >= params.max_depth || node.gini == 0.0 || node.samples < 2 * params.min_leaf)
            continue;

        const double parent = double(node.samples) * node.gini;
        double best = parent - 1e-12;
        int best_f = -1;
        double best_t = 0.0;
        std::vector<std::size_t> order = w.rows;
        for (std::size_t f = 0; f < x.cols(); ++f) {
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
            std::size_t nl = 0, pl = 0;
            for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                ++nl;
                pl += std::size_t(labels[order[k]] == 1);
                const double v = x(order[k], f), next = x(order[k + 1], f);
                if (v == next) continue;
                const std::size_t nr = node.samples - nl;
                if (nl < params.min_leaf || nr < params.min_leaf) continue;
                const double impurity =
                    double(nl) * gini(nl, pl) + double(nr) * gini(nr, node.positives - pl);
                if (impurity < best) {
                    best = impurity;
                    best_f = int(f);
                    best_t = split_point(v, next);
                }
            }
        }
        if (best_f < 0) continue;
        assert(best <= parent);

        std::vector<std::size_t> left, right;
        std::size_t lpos = 0, rpos = 0;
        for (auto r : w.rows) {
            if (x(r, best_f) < best_t) {
                left.push_back(r);
                lpos += std::size_t(labels[r] == 1);
            } else {
                right.push_back(r);
                rpos += std::size_t(labels[r] == 1);
            }
        }
        const int l = int(tree.nodes.size());
        tree.nodes.push_back(make_node(left.size(), lpos, node.depth + 1));
        tree.nodes.push_back(make_node(right.size(), rpos, node.depth + 1));
        auto& parent_node = tree.nodes[w.node];
        parent_node.feature = best_f;
        parent_node.threshold = best_t;
        parent_node.left = l;
        parent_node.right = l + 1;
        // Right first so the left subtree is expanded first (stable node numbering).
        stack.push_back({l + 1, std::move(right)});
        stack.push_back({l, std::move(left)});
    }
    return tree;
}

bool Condition::admits(double v) const {
    return (!lower || v >= *lower) && (!upper || v < *upper);
}

std::string Condition::describe() const {
    const auto d = [](double v) { return csv::format_double(v); };
    if (lower && upper) return d(*lower) + " <= " + name + " < " + d(*upper);
    if (lower) return name + " >= " + d(*lower);
    if (upper) return name + " < " + d(*upper);
    return name + " any";
}

std::string Path::describe() const {
    std::string out;
    for (std::size_t i = 0; i < conditions.size(); ++i) {
        if (i) out += " AND ";
        out += conditions[i].describe();
    }
    return out;
}

const Condition* Path::find(std::string_view feature) const {
    for (const auto& c : conditions)
        if (c.name == feature) return &c;
    return nullptr;
}

std::size_t PathReport::predicted_positive() const {
    std::size_t total = 0;
    for (const auto& p : paths) total += p.coverage;
    return total;
}

PathReport extract_paths(const CartTree& tree) {
    PathReport report;
    struct Step {
        int node;
        std::vector<Condition> conditions;
    };
    std::vector<Step> stack{{0, {}}};
    while (!stack.empty()) {
        Step s = std::move(stack.back());
        stack.pop_back();
        const CartNode& n = tree.nodes[s.node];
        if (n.is_leaf()) {
            if (n.label == 1)
                report.paths.push_back({std::size_t(s.node), std::move(s.conditions), n.samples, n.purity()});
            continue;
        }
        auto with = [&](bool left) {
            auto conds = s.conditions;
            auto it = std::find_if(conds.begin(), conds.end(),
                                   [&](const Condition& c) { return c.feature == std::size_t(n.feature); });
            if (it == conds.end()) {
                conds.push_back({std::size_t(n.feature), tree.feature_names[n.feature], {}, {}});
                it = conds.end() - 1;
            }
            if (left)
                it->upper = it->upper ? std::min(*it->upper, n.threshold) : n.threshold;
            else
                it->lower = it->lower ? std::max(*it->lower, n.threshold) : n.threshold;
            return conds;
        };
        stack.push_back({n.right, with(false)});
        stack.push_back({n.left, with(true)});
    }
    return report;
}

Evaluation evaluate_tree(const CartTree& tree, const Matrix& x, std::span<const int> labels) {
    if (x.rows() != labels.size()) throw Error("evaluate_tree: rows and labels differ in length");
    Evaluation e;
    e.n = labels.size();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int p = tree.predict(x.row(i));
        if (p == 1 && labels[i] == 1) ++e.tp;
        else if (p == 0 && labels[i] == 0) ++e.tn;
        else if (p == 1) ++e.fp;
        else ++e.fn;
    }
    const auto ratio = [](std::size_t a, std::size_t b) { return b ? double(a) / double(b) : 0.0; };
    e.accuracy = ratio(e.tp + e.tn, e.n);
    e.precision[1] = ratio(e.tp, e.tp + e.fp);
    e.precision[0] = ratio(e.tn, e.tn + e.fn);
    e.recall[1] = ratio(e.tp, e.tp + e.fn);
    e.recall[0] = ratio(e.tn, e.tn + e.fp);
    return e;
}

void write_dot(std::ostream& out, const CartTree& tree) {
    out << "digraph cart {\n  node [shape=box, fontname=\"Helvetica\"];\n";
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        const auto& n = tree.nodes[i];
        out << "  n" << i << " [label=\"";
        if (!n.is_leaf())
            out << tree.feature_names[n.feature] << " < " << csv::format_double(n.threshold) << "\\n";
        out << "samples = " << n.samples << "\\nclass = " << n.label
            << "\\npurity = " << csv::format_fixed(n.purity(), 3) << "\"";
        if (n.is_leaf() && n.label == 1) out << ", style=filled, fillcolor=\"#f4cccc\"";
        out << "];\n";
        if (!n.is_leaf()) {
            out << "  n" << i << " -> n" << n.left << " [label=\"yes\"];\n";
            out << "  n" << i << " -> n" << n.right << " [label=\"no\"];\n";
        }
    }
    out << "}\n";
}

namespace {

void render(std::ostream& out, const CartTree& tree, int id, const std::string& indent) {
    const auto& n = tree.nodes[id];
    if (n.is_leaf()) {
        out << indent << "class " << n.label << " (samples " << n.samples << ", purity "
            << csv::format_fixed(n.purity(), 3) << ")\n";
        return;
    }
    const std::string& name = tree.feature_names[n.feature];
    const std::string thr = csv::format_double(n.threshold);
    out << indent << name << " < " << thr << '\n';
    render(out, tree, n.left, indent + "|   ");
    out << indent << name << " >= " << thr << '\n';
    render(out, tree, n.right, indent + "|   ");
}

}  // namespace

void write_text(std::ostream& out, const CartTree& tree) { render(out, tree, 0, ""); }

void write_paths(std::ostream& out, const PathReport& report) {
    out << "path_id,conditions,coverage,precision\n";
    for (std::size_t i = 0; i < report.paths.size(); ++i) {
        const auto& p = report.paths[i];
        out << (i + 1) << ',' << csv::escape(p.describe()) << ',' << p.coverage << ','
            << csv::format_double(p.precision) << '\n';
    }
}

}  // namespace bidscreen::explain
