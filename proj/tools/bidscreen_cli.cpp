#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "bidscreen/config.hpp"
#include "bidscreen/pipeline.hpp"
#include "bidscreen/simd/kernels.hpp"

namespace {

using bidscreen::config::RunConfig;
namespace pipeline = bidscreen::pipeline;

struct Overrides {
    std::string config_path;
    std::map<std::string, std::string> values;  // config key -> text
};

void add_run_options(CLI::App& cmd, Overrides& ov) {
    cmd.add_option("--config", ov.config_path, "flat key = value config file");
    cmd.add_option("--input", ov.values["input"], "bid CSV to analyse");
    cmd.add_option("--out", ov.values["out"],
                   std::string("output directory (default $") + bidscreen::config::kOutDirEnv + " or " +
                       bidscreen::config::kDefaultOutDir + ")");
    cmd.add_option("--seed", ov.values["seed"], "random seed");
    cmd.add_option("--threads", ov.values["threads"], "worker threads for cross-validation");
    for (const auto& key : RunConfig::keys()) {
        if (key == "input" || key == "out" || key == "seed" || key == "threads") continue;
        cmd.add_option("--" + key, ov.values[key], "override config key " + key)->group("Config overrides");
    }
}

RunConfig resolve(const Overrides& ov) {
    RunConfig config;
    if (!ov.config_path.empty()) config.load_file(ov.config_path);
    for (const auto& key : RunConfig::keys()) {
        auto it = ov.values.find(key);
        if (it != ov.values.end() && !it->second.empty()) config.set(key, it->second);
    }
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Screen procurement auctions for suspicious single-bidder outcomes"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "bidscreen 1.0");

    const char* descriptions[] = {
        "apply the cleaning rules to --input",
        "compute per-bid features from the cleaned bids",
        "cross-validated classifier scores",
        "class prior and posteriors from the scores",
        "fit the explanation tree on the suspicious cluster",
        "generate a synthetic bid dataset with ground truth",
        "print the run summary and the top-ranked suspicious auctions",
        "run every stage (generates data first when --input is absent)",
    };
    const pipeline::Stage stages[] = {pipeline::Stage::Clean,   pipeline::Stage::Features,
                                      pipeline::Stage::Train,   pipeline::Stage::Dedpul,
                                      pipeline::Stage::Explain, pipeline::Stage::Synth,
                                      pipeline::Stage::Report,  pipeline::Stage::All};
    Overrides overrides[std::size(stages)];
    std::optional<std::size_t> chosen;
    std::string isa;
    app.add_option("--isa", isa, "force SIMD kernels: scalar or avx2")
        ->check(CLI::IsMember({"scalar", "avx2"}));

    for (std::size_t i = 0; i < std::size(stages); ++i) {
        auto* cmd = app.add_subcommand(pipeline::stage_name(stages[i]), descriptions[i]);
        add_run_options(*cmd, overrides[i]);
        cmd->callback([&chosen, i] { chosen = i; });
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (!isa.empty())
            bidscreen::simd::set_active_isa(isa == "avx2" ? bidscreen::simd::Isa::Avx2
                                                          : bidscreen::simd::Isa::Scalar);
        const auto config = resolve(overrides[*chosen]);
        pipeline::run_stage(stages[*chosen], config, std::cout, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "bidscreen: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
