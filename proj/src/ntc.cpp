#include "bidscreen/ntc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>

#include "bidscreen/csv.hpp"
#include "bidscreen/random.hpp"
#include "bidscreen/simd/kernels.hpp"

namespace bidscreen::ntc {

namespace {

constexpr double kMinGain = 1e-12;
constexpr double kMarginClamp = 35.0;  // keeps sigmoid strictly inside (0, 1)

double sigmoid(double z) {
    z = std::clamp(z, -kMarginClamp, kMarginClamp);
    return 1.0 / (1.0 + std::exp(-z));
}

double split_point(double lo, double hi) {
    const double mid = lo + 0.5 * (hi - lo);
    return mid > lo ? mid : hi;
}

// Quantile cut points per feature; bin(v) = number of cuts <= v, so v < cuts[b] <=> bin <= b.
struct Binning {
    std::vector<std::vector<double>> cuts;

    static Binning fit(const Matrix& x, std::span<const std::size_t> rows, int bins) {
        Binning b;
        b.cuts.resize(x.cols());
        std::vector<double> col(rows.size());
        for (std::size_t f = 0; f < x.cols(); ++f) {
            for (std::size_t i = 0; i < rows.size(); ++i) col[i] = x(rows[i], f);
            std::sort(col.begin(), col.end());
            auto& cuts = b.cuts[f];
            for (int j = 1; j < bins; ++j) {
                const std::size_t pos = col.size() * std::size_t(j) / std::size_t(bins);
                if (pos == 0 || pos >= col.size()) continue;
                if (col[pos] == col[pos - 1]) continue;
                const double c = split_point(col[pos - 1], col[pos]);
                if (cuts.empty() || c > cuts.back()) cuts.push_back(c);
            }
        }
        return b;
    }

    Matrix apply(const Matrix& x) const {
        Matrix out(x.rows(), x.cols());
        for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::size_t f = 0; f < x.cols(); ++f) {
                const auto& c = cuts[f];
                out(r, f) = double(std::upper_bound(c.begin(), c.end(), x(r, f)) - c.begin());
            }
        return out;
    }
};

struct SplitCandidate {
    double gain = kMinGain;
    int feature = -1;
    double threshold = 0.0;
};

struct ScanState {
    std::size_t count = 0;
    double sum = 0.0;
    double last = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const Matrix& x, std::span<const std::size_t> rows, const Params& params)
        : x_(x), params_(params), orders_(x.cols()) {
        for (std::size_t f = 0; f < x.cols(); ++f) {
            auto& order = orders_[f];
            order.assign(rows.begin(), rows.end());
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
        }
    }

    // `node_of` holds 0 for rows taking part in this tree and -1 otherwise; on return it
    // holds the leaf index of each participating row.
    Tree build(std::span<const double> residual, std::span<const double> hessian,
               std::vector<int>& node_of, const std::vector<char>& feature_on) const {
        Tree tree;
        tree.nodes.emplace_back();
        std::vector<int> level{0};
        std::vector<int> slot_of;

        for (int depth = 0; depth < params_.max_depth && !level.empty(); ++depth) {
            slot_of.assign(tree.nodes.size(), -1);
            for (std::size_t s = 0; s < level.size(); ++s) slot_of[level[s]] = int(s);

            std::vector<ScanState> totals(level.size());
            for (std::size_t i = 0; i < node_of.size(); ++i) {
                if (node_of[i] < 0) continue;
                const int s = slot_of[node_of[i]];
                if (s < 0) continue;
                ++totals[s].count;
                totals[s].sum += residual[i];
            }

            std::vector<SplitCandidate> best(level.size());
            std::vector<ScanState> state(level.size());
            for (std::size_t f = 0; f < x_.cols(); ++f) {
                if (!feature_on[f]) continue;
                std::fill(state.begin(), state.end(), ScanState{});
                for (const std::size_t i : orders_[f]) {
                    const int node = node_of[i];
                    if (node < 0) continue;
                    const int s = slot_of[node];
                    if (s < 0) continue;
                    const double v = x_(i, f);
                    ScanState& st = state[s];
                    if (st.count > 0 && v != st.last) {
                        const std::size_t nl = st.count;
                        const std::size_t nr = totals[s].count - nl;
                        if (nl >= params_.min_leaf && nr >= params_.min_leaf) {
                            const double sl = st.sum;
                            const double sr = totals[s].sum - sl;
                            const double gain = sl * sl / double(nl) + sr * sr / double(nr) -
                                                totals[s].sum * totals[s].sum / double(totals[s].count);
                            if (gain > best[s].gain) best[s] = {gain, int(f), split_point(st.last, v)};
                        }
                    }
                    ++st.count;
                    st.sum += residual[i];
                    st.last = v;
                }
            }

            std::vector<int> next;
            for (std::size_t s = 0; s < level.size(); ++s) {
                if (best[s].feature < 0) continue;
                const int id = level[s];
                const int left = int(tree.nodes.size());
                tree.nodes.emplace_back();
                tree.nodes.emplace_back();
                Node& node = tree.nodes[id];
                node.feature = best[s].feature;
                node.threshold = best[s].threshold;
                node.left = left;
                node.right = left + 1;
                next.push_back(left);
                next.push_back(left + 1);
            }
            if (next.empty()) break;
            for (std::size_t i = 0; i < node_of.size(); ++i) {
                if (node_of[i] < 0) continue;
                const Node& node = tree.nodes[node_of[i]];
                if (node.is_leaf()) continue;
                node_of[i] = x_(i, node.feature) < node.threshold ? node.left : node.right;
            }
            level = std::move(next);
        }

        std::vector<double> g(tree.nodes.size(), 0.0), h(tree.nodes.size(), 0.0);
        for (std::size_t i = 0; i < node_of.size(); ++i) {
            if (node_of[i] < 0) continue;
            g[node_of[i]] += residual[i];
            h[node_of[i]] += hessian[i];
        }
        for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
            Node& node = tree.nodes[id];
            if (node.is_leaf()) node.value = h[id] > 1e-12 ? params_.learning_rate * g[id] / h[id] : 0.0;
        }
        return tree;
    }

private:
    const Matrix& x_;
    const Params& params_;
    std::vector<std::vector<std::size_t>> orders_;
};

double logloss(double y, double margin) {
    const double p = sigmoid(margin);
    return y > 0.5 ? -std::log(p) : -std::log1p(-p);
}

}  // namespace

void Params::validate() const {
    if (n_trees < 0) throw Error("n_trees must be >= 0");
    if (max_depth < 1) throw Error("max_depth must be >= 1");
    if (!(learning_rate > 0.0)) throw Error("learning_rate must be > 0");
    if (min_leaf < 1) throw Error("min_leaf must be >= 1");
    if (bins < 2) throw Error("bins must be >= 2");
    if (!(subsample > 0.0 && subsample <= 1.0)) throw Error("subsample must be in (0, 1]");
    if (!(colsample > 0.0 && colsample <= 1.0)) throw Error("colsample must be in (0, 1]");
    if (early_stopping_rounds < 0) throw Error("early_stopping_rounds must be >= 0");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw Error("validation_fraction must be in (0, 1)");
}

double Tree::predict(std::span<const double> x) const { return nodes[leaf_of(x)].value; }

std::size_t Tree::leaf_of(std::span<const double> x) const {
    std::size_t id = 0;
    while (!nodes[id].is_leaf()) {
        const Node& n = nodes[id];
        id = std::size_t(x[n.feature] < n.threshold ? n.left : n.right);
    }
    return id;
}

double Model::margin(std::span<const double> x) const {
    if (x.size() != n_features_)
        throw Error("feature vector has " + std::to_string(x.size()) + " values, model expects " +
                    std::to_string(n_features_));
    double m = base_score_;
    for (const auto& t : trees_) m += t.predict(x);
    return m;
}

double Model::predict_proba(std::span<const double> x) const { return sigmoid(margin(x)); }

std::vector<double> Model::predict_proba(const Matrix& x) const {
    std::vector<double> m(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r)
        m[r] = std::clamp(margin(x.row(r)), -kMarginClamp, kMarginClamp);
    std::vector<double> p(x.rows());
    simd::sigmoid(m, p);
    return p;
}

void Model::save(std::ostream& out) const {
    const auto d = [](double v) { return csv::format_double(v); };
    out << "bidscreen-ntc 1\n";
    out << "features " << n_features_ << '\n';
    out << "params n_trees=" << params_.n_trees << " max_depth=" << params_.max_depth
        << " learning_rate=" << d(params_.learning_rate) << " min_leaf=" << params_.min_leaf
        << " histogram=" << int(params_.histogram) << " bins=" << params_.bins
        << " subsample=" << d(params_.subsample) << " colsample=" << d(params_.colsample)
        << " early_stopping_rounds=" << params_.early_stopping_rounds
        << " validation_fraction=" << d(params_.validation_fraction) << '\n';
    out << "base_score " << d(base_score_) << '\n';
    out << "trees " << trees_.size() << '\n';
    for (std::size_t t = 0; t < trees_.size(); ++t) {
        const auto& nodes = trees_[t].nodes;
        out << "tree " << t << ' ' << nodes.size() << '\n';
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const Node& n = nodes[i];
            if (n.is_leaf())
                out << "leaf " << i << ' ' << d(n.value) << '\n';
            else
                out << "node " << i << ' ' << n.feature << ' ' << d(n.threshold) << ' ' << n.left
                    << ' ' << n.right << '\n';
        }
    }
}

Model Model::load(std::istream& in) {
    auto fail = [](const std::string& why) -> Model { throw Error("model file: " + why); };
    std::string tag;
    int version = 0;
    if (!(in >> tag >> version) || tag != "bidscreen-ntc") return fail("bad magic");
    if (version != 1) return fail("unsupported version " + std::to_string(version));
    Model m;
    if (!(in >> tag >> m.n_features_) || tag != "features") return fail("missing features");
    if (!(in >> tag) || tag != "params") return fail("missing params");
    std::string line;
    std::getline(in, line);
    std::istringstream ps(line);
    std::string kv;
    while (ps >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) return fail("bad param " + kv);
        const std::string key = kv.substr(0, eq);
        const double v = std::stod(kv.substr(eq + 1));
        if (key == "n_trees") m.params_.n_trees = int(v);
        else if (key == "max_depth") m.params_.max_depth = int(v);
        else if (key == "learning_rate") m.params_.learning_rate = v;
        else if (key == "min_leaf") m.params_.min_leaf = std::size_t(v);
        else if (key == "histogram") m.params_.histogram = v != 0.0;
        else if (key == "bins") m.params_.bins = int(v);
        else if (key == "subsample") m.params_.subsample = v;
        else if (key == "colsample") m.params_.colsample = v;
        else if (key == "early_stopping_rounds") m.params_.early_stopping_rounds = int(v);
        else if (key == "validation_fraction") m.params_.validation_fraction = v;
    }
    std::size_t n_trees = 0;
    std::string value;
    if (!(in >> tag >> value) || tag != "base_score" || !csv::parse_double(value, m.base_score_))
        return fail("missing base_score");
    if (!(in >> tag >> n_trees) || tag != "trees") return fail("missing tree count");
    for (std::size_t t = 0; t < n_trees; ++t) {
        std::size_t idx = 0, count = 0;
        if (!(in >> tag >> idx >> count) || tag != "tree" || idx != t) return fail("bad tree header");
        Tree tree;
        tree.nodes.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            std::size_t id = 0;
            if (!(in >> tag >> id) || id >= count) return fail("bad node record");
            Node& n = tree.nodes[id];
            if (tag == "leaf") {
                if (!(in >> value) || !csv::parse_double(value, n.value)) return fail("bad leaf");
            } else if (tag == "node") {
                if (!(in >> n.feature >> value >> n.left >> n.right) ||
                    !csv::parse_double(value, n.threshold) || n.feature < 0 ||
                    std::size_t(n.feature) >= m.n_features_ || n.left <= int(id) ||
                    n.right <= int(id) || std::size_t(n.left) >= count || std::size_t(n.right) >= count)
                    return fail("bad split node");
            } else {
                return fail("unknown record " + tag);
            }
        }
        m.trees_.push_back(std::move(tree));
    }
    return m;
}

Model fit(const Matrix& x, std::span<const int> labels, const Params& params, std::uint64_t seed) {
    params.validate();
    if (x.rows() != labels.size()) throw Error("fit: feature rows and labels differ in length");
    std::size_t npos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw Error("fit: labels must be 0/1");
        npos += std::size_t(y);
    }
    if (x.rows() < 2 || npos == 0 || npos == labels.size()) throw Error("degenerate training set");

    Rng rng(seed);
    std::vector<std::size_t> train_rows, valid_rows;
    if (params.early_stopping_rounds > 0) {
        const auto folds = make_folds(labels, int(std::lround(1.0 / params.validation_fraction)), rng.fork());
        for (std::size_t i = 0; i < labels.size(); ++i)
            (folds.fold[i] == 0 ? valid_rows : train_rows).push_back(i);
    } else {
        train_rows.resize(labels.size());
        std::iota(train_rows.begin(), train_rows.end(), 0);
    }

    std::size_t train_pos = 0;
    for (auto i : train_rows) train_pos += std::size_t(labels[i]);
    if (train_pos == 0 || train_pos == train_rows.size()) throw Error("degenerate training set");
    const double rate = double(train_pos) / double(train_rows.size());
    Model model(x.cols(), std::log(rate / (1.0 - rate)), params);

    Matrix binned;
    Binning binning;
    if (params.histogram) {
        binning = Binning::fit(x, train_rows, params.bins);
        binned = binning.apply(x);
    }
    const Matrix& work = params.histogram ? binned : x;
    const TreeBuilder builder(work, train_rows, params);

    std::vector<double> y(labels.size()), margins(labels.size(), model.base_score());
    for (std::size_t i = 0; i < labels.size(); ++i) y[i] = double(labels[i]);
    std::vector<double> residual(labels.size()), hessian(labels.size());
    std::vector<int> node_of(labels.size());
    std::vector<char> feature_on(x.cols(), 1);

    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t best_iter = 0;
    for (int t = 0; t < params.n_trees; ++t) {
        simd::logistic_grad_hess(y, margins, residual, hessian);
        std::fill(node_of.begin(), node_of.end(), -1);
        for (auto i : train_rows)
            if (params.subsample >= 1.0 || rng.bernoulli(params.subsample)) node_of[i] = 0;
        if (params.colsample < 1.0) {
            const auto keep = std::max<std::size_t>(1, std::size_t(std::lround(params.colsample * double(x.cols()))));
            std::vector<std::size_t> cols(x.cols());
            std::iota(cols.begin(), cols.end(), 0);
            rng.shuffle(cols);
            std::fill(feature_on.begin(), feature_on.end(), 0);
            for (std::size_t c = 0; c < keep; ++c) feature_on[cols[c]] = 1;
        }

        Tree tree = builder.build(residual, hessian, node_of, feature_on);
        if (params.histogram)
            for (auto& n : tree.nodes)
                if (!n.is_leaf()) {
                    const auto& cuts = binning.cuts[n.feature];
                    n.threshold = cuts[std::size_t(std::floor(n.threshold))];
                }
        for (std::size_t i = 0; i < labels.size(); ++i) margins[i] += tree.predict(x.row(i));
        model.add_tree(std::move(tree));

        if (!valid_rows.empty()) {
            double loss = 0.0;
            for (auto i : valid_rows) loss += logloss(y[i], margins[i]);
            if (loss < best_loss) {
                best_loss = loss;
                best_iter = model.trees().size();
            } else if (model.trees().size() - best_iter >= std::size_t(params.early_stopping_rounds)) {
                break;
            }
        }
    }
    if (!valid_rows.empty()) model.truncate(best_iter);
    return model;
}

FoldAssignment make_folds(std::span<const int> labels, int k, std::uint64_t seed) {
    if (k < 2) throw Error("fold count must be >= 2");
    if (std::size_t(k) > labels.size()) throw Error("fold count exceeds instance count");
    FoldAssignment out;
    out.k = k;
    out.seed = seed;
    out.fold.assign(labels.size(), 0);
    Rng rng(seed);
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
    rng.shuffle(pos);
    rng.shuffle(neg);
    std::size_t next = 0;
    for (auto i : pos) out.fold[i] = int(next++ % std::size_t(k));
    for (auto i : neg) out.fold[i] = int(next++ % std::size_t(k));
    return out;
}

std::vector<double> cross_val_scores(const Matrix& x, std::span<const int> labels,
                                     const Params& params, const FoldAssignment& folds,
                                     int threads) {
    if (folds.k < 2) throw Error("cross-validation needs k >= 2");
    if (folds.fold.size() != labels.size() || x.rows() != labels.size())
        throw Error("cross-validation: fold assignment does not match the data");
    std::vector<double> scores(labels.size(), 0.0);

    std::vector<std::vector<std::size_t>> train(folds.k), test(folds.k);
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (int f = 0; f < folds.k; ++f) (folds.fold[i] == f ? test : train)[f].push_back(i);
    for (int f = 0; f < folds.k; ++f) {
        std::size_t npos = 0;
        for (auto i : train[f]) npos += std::size_t(labels[i]);
        if (npos == 0 || npos == train[f].size())
            throw Error("fold " + std::to_string(f) + ": training part has a single class");
    }

    Rng seeds(folds.seed ^ 0x5bd1e995ull);
    std::vector<std::uint64_t> fold_seed(folds.k);
    for (auto& s : fold_seed) s = seeds.fork();

    auto run_fold = [&](int f) {
        const Matrix xtr = x.select_rows(train[f]);
        std::vector<int> ytr(train[f].size());
        for (std::size_t j = 0; j < train[f].size(); ++j) ytr[j] = labels[train[f][j]];
        const Model m = fit(xtr, ytr, params, fold_seed[f]);
        const auto p = m.predict_proba(x.select_rows(test[f]));
        for (std::size_t j = 0; j < test[f].size(); ++j) scores[test[f][j]] = p[j];
    };

    const int workers = std::clamp(threads, 1, folds.k);
    if (workers == 1) {
        for (int f = 0; f < folds.k; ++f) run_fold(f);
        return scores;
    }
    std::vector<std::exception_ptr> errors(folds.k);
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (int f = w; f < folds.k; f += workers) {
                try {
                    run_fold(f);
                } catch (...) {
                    errors[f] = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return scores;
}

std::vector<double> cross_val_scores(const Matrix& x, std::span<const int> labels,
                                     const Params& params, int k, std::uint64_t seed, int threads) {
    return cross_val_scores(x, labels, params, make_folds(labels, k, seed), threads);
}

}  // namespace bidscreen::ntc
