#include "bidscreen/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "bidscreen/csv.hpp"
#include "bidscreen/metrics.hpp"
#include "bidscreen/random.hpp"

namespace bidscreen::pipeline {

namespace fs = std::filesystem;
using config::RunConfig;

const char* stage_name(Stage stage) {
    switch (stage) {
        case Stage::Clean: return "clean";
        case Stage::Features: return "features";
        case Stage::Train: return "train";
        case Stage::Dedpul: return "dedpul";
        case Stage::Explain: return "explain";
        case Stage::Synth: return "synth";
        case Stage::Report: return "report";
        case Stage::All: return "all";
    }
    return "?";
}

std::optional<Stage> parse_stage(std::string_view name) {
    for (auto s : {Stage::Clean, Stage::Features, Stage::Train, Stage::Dedpul, Stage::Explain,
                   Stage::Synth, Stage::Report, Stage::All})
        if (name == stage_name(s)) return s;
    return std::nullopt;
}

DirectoryLock::DirectoryLock(const fs::path& dir) : path_(dir / artifact::kLock) {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        if (errno == EEXIST)
            throw Error("output directory " + dir.string() + " is in use by another run (remove " +
                        path_.string() + " if that run is gone)");
        throw Error("cannot create lock " + path_.string() + ": " + std::strerror(errno));
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto written = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

DirectoryLock::~DirectoryLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

std::map<std::string, std::string> read_key_values(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("missing input " + path.string());
    std::map<std::string, std::string> out;
    std::string line;
    while (csv::read_line(in, line)) {
        if (line.empty() || line.front() == '#') continue;
        const auto space = line.find(' ');
        if (space == std::string::npos) out[line] = "";
        else out[line.substr(0, space)] = line.substr(space + 1);
    }
    return out;
}

namespace {

class Run {
public:
    Run(RunConfig config, std::ostream& out, std::ostream& log)
        : c_(std::move(config)), out_(out), log_(log), dir_(c_.out), hash_(c_.hash()) {
        if (c_.check_regions) c_.features.known_regions = features::default_region_codes();
    }

    void stage(Stage s);

private:
    fs::path at(const char* name) const { return dir_ / name; }
    void require(const char* name, const char* producer) const {
        if (!fs::exists(at(name)))
            throw Error("missing input " + at(name).string() + " (run `" + producer + "` first)");
    }
    void emit(const char* name, Stage producer, const std::function<void(std::ostream&)>& writer);
    void write_manifest();

    void clean();
    void features();
    void train();
    void dedpul();
    void explain();
    void synth();
    void report();

    struct Table {
        std::vector<features::Instance> instances;
        std::vector<int> labels;
        Matrix x;
    };
    Table load_features() const;

    RunConfig c_;
    std::ostream& out_;
    std::ostream& log_;
    fs::path dir_;
    std::string hash_;
    std::map<std::string, std::pair<std::string, std::string>> manifest_;  // artifact -> stage, hash
};

void Run::emit(const char* name, Stage producer, const std::function<void(std::ostream&)>& writer) {
    csv::write_atomic(at(name), writer);
    manifest_[name] = {stage_name(producer), hash_};
}

void Run::write_manifest() {
    // Entries from earlier runs stay, each with the hash of the config that produced it.
    std::map<std::string, std::pair<std::string, std::string>> merged;
    if (fs::exists(at(artifact::kManifest)))
        for (auto& row : csv::read_table(at(artifact::kManifest), {"artifact", "stage", "config_hash"}))
            merged[row[0]] = {row[1], row[2]};
    for (auto& [k, v] : manifest_) merged[k] = v;
    csv::write_atomic(at(artifact::kManifest), [&](std::ostream& o) {
        o << "artifact,stage,config_hash\n";
        for (auto& [k, v] : merged) o << csv::escape(k) << ',' << v.first << ',' << v.second << '\n';
    });
}

void Run::stage(Stage s) {
    const auto t0 = std::chrono::steady_clock::now();
    switch (s) {
        case Stage::Clean: clean(); break;
        case Stage::Features: features(); break;
        case Stage::Train: train(); break;
        case Stage::Dedpul: dedpul(); break;
        case Stage::Explain: explain(); break;
        case Stage::Synth: synth(); break;
        case Stage::Report: report(); break;
        case Stage::All:
            if (c_.input.empty()) {
                stage(Stage::Synth);
                c_.input = at(artifact::kBids).string();
            }
            for (auto next : {Stage::Clean, Stage::Features, Stage::Train, Stage::Dedpul,
                              Stage::Explain, Stage::Report})
                stage(next);
            break;
    }
    emit(artifact::kRunConfig, s, [&](std::ostream& o) {
        o << "# config_hash " << hash_ << '\n' << c_.serialize(true);
    });
    write_manifest();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (s != Stage::All) log_ << "[" << stage_name(s) << "] done in " << csv::format_fixed(secs, 2) << " s\n";
}

void Run::clean() {
    if (c_.input.empty()) throw Error("clean: no input file (use --input)");
    const auto parsed = ingest::parse_bids_file(c_.input);
    const auto cleaned = ingest::clean(parsed.records, c_.cleaning);
    emit(artifact::kCleaned, Stage::Clean,
         [&](std::ostream& o) { ingest::write_bids(o, cleaned.records); });
    emit(artifact::kCleaningReport, Stage::Clean,
         [&](std::ostream& o) { ingest::write_report(o, cleaned.report); });
    emit(artifact::kParseDiagnostics, Stage::Clean, [&](std::ostream& o) {
        for (const auto& d : parsed.diagnostics) o << "row " << d.row << ": " << d.cause << '\n';
    });
    log_ << "[clean] " << parsed.records.size() << " parsed, " << parsed.diagnostics.size()
         << " malformed, " << cleaned.report.total_rejected() << " rejected, "
         << cleaned.report.retained << " retained\n";
}

void Run::features() {
    require(artifact::kCleaned, "clean");
    const auto parsed = ingest::parse_bids_file(at(artifact::kCleaned).string());
    if (!parsed.diagnostics.empty())
        throw Error("features: " + at(artifact::kCleaned).string() + " row " +
                    std::to_string(parsed.diagnostics.front().row) + ": " +
                    parsed.diagnostics.front().cause);
    const auto grouped = ingest::group_auctions(parsed.records);
    const auto result = features::compute_features(grouped.auctions, c_.features);
    if (result.instances.empty()) throw Error("features: no auctions survived cleaning");
    const auto table = features::summarize(result.instances);
    emit(artifact::kFeatures, Stage::Features,
         [&](std::ostream& o) { features::write_instances(o, result.instances); });
    emit(artifact::kSummary, Stage::Features,
         [&](std::ostream& o) { features::write_summary(o, table); });
    emit(artifact::kYearly, Stage::Features, [&](std::ostream& o) { features::write_yearly(o, table); });
    emit(artifact::kFeatureDiagnostics, Stage::Features, [&](std::ostream& o) {
        for (const auto& d : grouped.diagnostics) o << d << '\n';
        for (const auto& d : result.diagnostics) o << d << '\n';
    });
    log_ << "[features] " << grouped.auctions.size() << " auctions, " << result.instances.size()
         << " instances (" << table.single_count << " single-bidder)\n";
}

Run::Table Run::load_features() const {
    require(artifact::kFeatures, "features");
    Table t;
    t.instances = features::read_instances(at(artifact::kFeatures).string());
    if (t.instances.empty()) throw Error("features file has no rows");
    std::vector<double> data;
    data.reserve(t.instances.size() * features::kModelFeatureCount);
    for (const auto& inst : t.instances) {
        const auto v = inst.model_features();
        data.insert(data.end(), v.begin(), v.end());
        t.labels.push_back(inst.s);
    }
    t.x = Matrix(features::kModelFeatureCount, std::move(data));
    return t;
}

void Run::train() {
    const auto t = load_features();
    const auto folds = ntc::make_folds(t.labels, c_.folds, c_.seed);
    const auto scores = ntc::cross_val_scores(t.x, t.labels, c_.ntc, folds, c_.threads);
    const auto model = ntc::fit(t.x, t.labels, c_.ntc, c_.seed);
    emit(artifact::kScores, Stage::Train, [&](std::ostream& o) {
        o << "auction_id,firm_id,score\n";
        for (std::size_t i = 0; i < scores.size(); ++i)
            o << csv::escape(t.instances[i].auction_id) << ',' << csv::escape(t.instances[i].firm_id)
              << ',' << csv::format_double(scores[i]) << '\n';
    });
    emit(artifact::kModel, Stage::Train, [&](std::ostream& o) { model.save(o); });
    log_ << "[train] " << c_.folds << "-fold out-of-fold scores for " << scores.size()
         << " instances, out-of-fold AUC " << csv::format_fixed(metrics::roc_auc(scores, t.labels), 4)
         << '\n';
}

std::vector<double> read_scores(const fs::path& path, const std::vector<features::Instance>& inst) {
    const auto rows = csv::read_table(path, {"auction_id", "firm_id", "score"});
    if (rows.size() != inst.size())
        throw Error(path.string() + " has " + std::to_string(rows.size()) + " rows, features have " +
                    std::to_string(inst.size()));
    std::vector<double> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i][0] != inst[i].auction_id || rows[i][1] != inst[i].firm_id)
            throw Error(path.string() + " row " + std::to_string(i + 2) + " does not match features");
        if (!csv::parse_double(rows[i][2], out[i]))
            throw Error(path.string() + " row " + std::to_string(i + 2) + ": score not numeric");
    }
    return out;
}

void Run::dedpul() {
    const auto t = load_features();
    require(artifact::kScores, "train");
    const auto scores = read_scores(at(artifact::kScores), t.instances);
    std::vector<double> pos, unl;
    std::vector<std::size_t> unl_idx;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (t.labels[i] == 1) {
            pos.push_back(scores[i]);
        } else {
            unl.push_back(scores[i]);
            unl_idx.push_back(i);
        }
    }
    if (pos.empty() || unl.empty()) throw Error("dedpul: need both labelled and unlabelled instances");
    const auto res = dedpul::estimate(pos, unl, c_.dedpul);
    for (const auto& w : res.warnings) log_ << "[dedpul] warning: " << w << '\n';

    emit(artifact::kPosteriors, Stage::Dedpul, [&](std::ostream& o) {
        o << "auction_id,firm_id,score,ratio,posterior\n";
        for (std::size_t j = 0; j < unl_idx.size(); ++j) {
            const auto& inst = t.instances[unl_idx[j]];
            o << csv::escape(inst.auction_id) << ',' << csv::escape(inst.firm_id) << ','
              << csv::format_double(unl[j]) << ',' << csv::format_double(res.ratios[j]) << ','
              << csv::format_double(res.posteriors[j]) << '\n';
        }
    });
    emit(artifact::kDedpul, Stage::Dedpul, [&](std::ostream& o) {
        o << "config_hash " << hash_ << '\n'
          << "n_labelled " << pos.size() << '\n'
          << "n_unlabelled " << unl.size() << '\n'
          << "alpha_star " << csv::format_double(res.alpha_star) << '\n'
          << "alpha_em " << csv::format_double(res.em.alpha) << '\n'
          << "em_iterations " << res.em.iterations << '\n'
          << "em_converged " << (res.em.converged ? "true" : "false") << '\n'
          << "cluster_mass " << csv::format_double(res.cluster_mass) << '\n'
          << "bandwidth_labelled " << csv::format_double(res.positive.bandwidth) << '\n'
          << "bandwidth_unlabelled " << csv::format_double(res.unlabelled.bandwidth) << '\n'
          << "kde_integral_labelled " << csv::format_double(res.positive.integral()) << '\n'
          << "kde_integral_unlabelled " << csv::format_double(res.unlabelled.integral()) << '\n';
        for (const auto& w : res.warnings) o << "warning " << w << '\n';
    });
    log_ << "[dedpul] alpha* = " << csv::format_fixed(res.alpha_star, 4)
         << ", alpha_em = " << csv::format_fixed(res.em.alpha, 4)
         << ", cluster mass = " << csv::format_fixed(res.cluster_mass, 4) << '\n';
}

struct PosteriorRow {
    std::string auction_id;
    std::string firm_id;
    double score = 0.0;
    double ratio = 0.0;
    double posterior = 0.0;
};

std::vector<PosteriorRow> read_posteriors(const fs::path& path) {
    const auto rows = csv::read_table(path, {"auction_id", "firm_id", "score", "ratio", "posterior"});
    std::vector<PosteriorRow> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        PosteriorRow p{rows[i][0], rows[i][1]};
        if (!csv::parse_double(rows[i][2], p.score) || !csv::parse_double(rows[i][3], p.ratio) ||
            !csv::parse_double(rows[i][4], p.posterior))
            throw Error(path.string() + " row " + std::to_string(i + 2) + ": value not numeric");
        out.push_back(std::move(p));
    }
    return out;
}

void Run::explain() {
    const auto t = load_features();
    require(artifact::kPosteriors, "dedpul");
    const auto post = read_posteriors(at(artifact::kPosteriors));

    std::vector<std::size_t> singles;
    for (std::size_t i = 0; i < t.instances.size(); ++i)
        if (t.labels[i] == 0) singles.push_back(i);
    if (singles.size() != post.size())
        throw Error("explain: posteriors do not match the unlabelled instances of the features file");
    std::vector<double> posterior(post.size());
    for (std::size_t j = 0; j < post.size(); ++j) {
        const auto& inst = t.instances[singles[j]];
        if (post[j].auction_id != inst.auction_id || post[j].firm_id != inst.firm_id)
            throw Error("explain: posterior row " + std::to_string(j + 2) + " does not match features");
        posterior[j] = post[j].posterior;
    }
    const auto labels = explain::label_cluster(posterior, c_.dedpul.cluster_threshold);
    const Matrix x = t.x.select_rows(singles);
    std::vector<std::string> names;
    for (std::size_t f = 1; f < features::kFeatureCount; ++f) names.emplace_back(features::feature_names()[f]);

    const auto positives = std::accumulate(labels.begin(), labels.end(), std::size_t{0});
    if (positives == 0 || positives == labels.size()) {
        log_ << "[explain] warning: every single-bidder instance has the same cluster label; no tree fitted\n";
        emit(artifact::kPaths, Stage::Explain,
             [&](std::ostream& o) { explain::write_paths(o, explain::PathReport{}); });
        emit(artifact::kTreeText, Stage::Explain, [&](std::ostream& o) { o << "no tree: single class\n"; });
        emit(artifact::kTreeDot, Stage::Explain, [&](std::ostream& o) { o << "digraph cart {\n}\n"; });
        emit(artifact::kExplain, Stage::Explain, [&](std::ostream& o) {
            o << "config_hash " << hash_ << "\ncluster_size " << positives << "\ninstances "
              << labels.size() << "\ntree none\n";
        });
        return;
    }

    const auto tree = explain::fit_tree(x, labels, c_.tree, names);
    const auto paths = explain::extract_paths(tree);
    const auto fit_eval = explain::evaluate_tree(tree, x, labels);

    // Held-out estimate from a second tree fitted on the remaining rows.
    std::optional<explain::Evaluation> holdout;
    if (c_.tree_holdout > 0.0) {
        std::vector<std::size_t> idx(labels.size());
        std::iota(idx.begin(), idx.end(), 0);
        Rng rng(c_.seed ^ 0x7f4a7c15ull);
        rng.shuffle(idx);
        const auto n_test = std::size_t(std::round(c_.tree_holdout * double(idx.size())));
        std::vector<std::size_t> test(idx.begin(), idx.begin() + n_test), train(idx.begin() + n_test, idx.end());
        std::sort(test.begin(), test.end());
        std::sort(train.begin(), train.end());
        auto pick = [&](const std::vector<std::size_t>& rows) {
            std::vector<int> out;
            for (auto r : rows) out.push_back(labels[r]);
            return out;
        };
        const auto ytr = pick(train), yte = pick(test);
        const auto s = std::accumulate(ytr.begin(), ytr.end(), std::size_t{0});
        if (!test.empty() && s > 0 && s < ytr.size()) {
            const auto t2 = explain::fit_tree(x.select_rows(train), ytr, c_.tree, names);
            holdout = explain::evaluate_tree(t2, x.select_rows(test), yte);
        }
    }

    emit(artifact::kTreeDot, Stage::Explain, [&](std::ostream& o) {
        o << "// config_hash " << hash_ << '\n';
        explain::write_dot(o, tree);
    });
    emit(artifact::kTreeText, Stage::Explain, [&](std::ostream& o) { explain::write_text(o, tree); });
    emit(artifact::kPaths, Stage::Explain, [&](std::ostream& o) { explain::write_paths(o, paths); });
    emit(artifact::kExplain, Stage::Explain, [&](std::ostream& o) {
        auto metrics = [&](const char* prefix, const explain::Evaluation& e) {
            o << prefix << "_n " << e.n << '\n'
              << prefix << "_accuracy " << csv::format_double(e.accuracy) << '\n'
              << prefix << "_precision_1 " << csv::format_double(e.precision[1]) << '\n'
              << prefix << "_recall_1 " << csv::format_double(e.recall[1]) << '\n'
              << prefix << "_precision_0 " << csv::format_double(e.precision[0]) << '\n'
              << prefix << "_recall_0 " << csv::format_double(e.recall[0]) << '\n';
        };
        o << "config_hash " << hash_ << '\n'
          << "cluster_size " << positives << '\n'
          << "instances " << labels.size() << '\n'
          << "tree_depth " << tree.depth() << '\n'
          << "tree_nodes " << tree.nodes.size() << '\n'
          << "class1_paths " << paths.paths.size() << '\n';
        metrics("fit", fit_eval);
        if (holdout) metrics("holdout", *holdout);
    });
    log_ << "[explain] cluster " << positives << " of " << labels.size() << ", "
         << paths.paths.size() << " class-1 paths, accuracy " << csv::format_fixed(fit_eval.accuracy, 3)
         << (holdout ? ", held-out " + csv::format_fixed(holdout->accuracy, 3) : std::string()) << '\n';
}

void Run::synth() {
    auto sc = c_.synth;
    sc.seed = c_.seed;
    const auto data = synth::generate(sc);
    emit(artifact::kBids, Stage::Synth, [&](std::ostream& o) { ingest::write_bids(o, data.bids); });
    emit(artifact::kGroundTruth, Stage::Synth,
         [&](std::ostream& o) { synth::write_ground_truth(o, data.truth); });
    log_ << "[synth] " << data.truth.auction_id.size() << " auctions, " << data.bids.size()
         << " bids, alpha_true " << csv::format_fixed(data.truth.alpha_true, 4) << '\n';
}

void Run::report() {
    require(artifact::kPosteriors, "dedpul");
    require(artifact::kDedpul, "dedpul");
    auto post = read_posteriors(at(artifact::kPosteriors));
    if (post.empty()) throw Error("report: " + at(artifact::kPosteriors).string() + " has no rows");
    const auto stats = read_key_values(at(artifact::kDedpul));
    auto stat = [&](const char* key) {
        auto it = stats.find(key);
        return it == stats.end() ? std::string("n/a") : it->second;
    };

    std::vector<std::size_t> order(post.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& l = post[a];
        const auto& r = post[b];
        if (l.posterior != r.posterior) return l.posterior > r.posterior;
        if (l.ratio != r.ratio) return l.ratio < r.ratio;
        return std::tie(l.auction_id, l.firm_id) < std::tie(r.auction_id, r.firm_id);
    });
    const std::size_t top = std::min(c_.top_n, order.size());

    std::optional<double> truth_auc;
    if (fs::exists(at(artifact::kGroundTruth))) {
        const auto truth = synth::read_ground_truth(at(artifact::kGroundTruth).string());
        std::unordered_map<std::string, int> corrupt;
        for (std::size_t i = 0; i < truth.auction_id.size(); ++i) corrupt[truth.auction_id[i]] = truth.corrupt(i);
        std::vector<double> score;
        std::vector<int> label;
        for (const auto& p : post) {
            auto it = corrupt.find(p.auction_id);
            if (it == corrupt.end()) continue;
            score.push_back(p.posterior);
            label.push_back(it->second);
        }
        const auto pos = std::accumulate(label.begin(), label.end(), std::size_t{0});
        if (pos > 0 && pos < label.size()) truth_auc = metrics::roc_auc(score, label);
    }

    emit(artifact::kTopSuspicious, Stage::Report, [&](std::ostream& o) {
        o << "rank,auction_id,firm_id,score,ratio,posterior\n";
        for (std::size_t k = 0; k < top; ++k) {
            const auto& p = post[order[k]];
            o << k + 1 << ',' << csv::escape(p.auction_id) << ',' << csv::escape(p.firm_id) << ','
              << csv::format_double(p.score) << ',' << csv::format_double(p.ratio) << ','
              << csv::format_double(p.posterior) << '\n';
        }
    });

    std::string summary;
    {
        std::ostringstream o;
        o << "bidscreen run summary\n"
          << "config_hash " << hash_ << '\n'
          << "labelled_instances " << stat("n_labelled") << '\n'
          << "unlabelled_instances " << stat("n_unlabelled") << '\n'
          << "alpha_star " << stat("alpha_star") << '\n'
          << "alpha_em " << stat("alpha_em") << '\n'
          << "cluster_mass " << stat("cluster_mass") << '\n'
          << "kde_integral_labelled " << stat("kde_integral_labelled") << '\n'
          << "kde_integral_unlabelled " << stat("kde_integral_unlabelled") << '\n';
        if (truth_auc) o << "ground_truth_auc " << csv::format_double(*truth_auc) << '\n';
        if (fs::exists(at(artifact::kYearly))) {
            o << "\nsingle-bidder rate by year\n";
            for (const auto& row : csv::read_table(at(artifact::kYearly), {"year", "auctions", "single_bidder_auctions", "single_bidder_rate"}))
                o << "  " << row[0] << "  " << row[3] << "  (" << row[2] << " of " << row[1] << ")\n";
        }
        if (fs::exists(at(artifact::kPaths))) {
            o << "\nsuspicious-cluster paths\n";
            for (const auto& row :
                 csv::read_table(at(artifact::kPaths), {"path_id", "conditions", "coverage", "precision"}))
                o << "  " << row[0] << ": " << row[1] << "  (coverage " << row[2] << ", precision "
                  << row[3] << ")\n";
        }
        o << "\ntop " << top << " suspicious instances: " << artifact::kTopSuspicious << '\n';
        summary = o.str();
    }
    emit(artifact::kRunSummary, Stage::Report, [&](std::ostream& o) { o << summary; });

    out_ << summary << "\nrank  auction_id  firm_id  posterior  ratio\n";
    for (std::size_t k = 0; k < top; ++k) {
        const auto& p = post[order[k]];
        out_ << k + 1 << "  " << p.auction_id << "  " << p.firm_id << "  "
             << csv::format_fixed(p.posterior, 6) << "  " << csv::format_double(p.ratio) << '\n';
    }
}

}  // namespace

void run_stage(Stage stage, const RunConfig& config, std::ostream& out, std::ostream& log) {
    config.validate();
    fs::create_directories(config.out);
    DirectoryLock lock(config.out);
    Run run(config, out, log);
    run.stage(stage);
}

}  // namespace bidscreen::pipeline
