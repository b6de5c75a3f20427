#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "bidscreen/dedpul.hpp"
#include "bidscreen/explain.hpp"
#include "bidscreen/features.hpp"
#include "bidscreen/ingest.hpp"
#include "bidscreen/ntc.hpp"
#include "bidscreen/synth.hpp"

namespace bidscreen::config {

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "BIDSCREEN_OUT";
inline constexpr const char* kDefaultOutDir = "bidscreen-out";

/// Every tunable of a run. Serialized as flat `key = value` lines; see keys().
struct RunConfig {
    std::string input;  // bid CSV; empty means "generate one" for the `all` stage
    std::string out;
    std::uint64_t seed = 20140128;
    int threads = 1;

    ingest::CleaningConfig cleaning;
    features::FeatureConfig features;
    bool check_regions = true;

    ntc::Params ntc;
    int folds = 5;

    dedpul::Config dedpul;

    explain::TreeParams tree;
    double tree_holdout = 0.3;

    std::size_t top_n = 1000;

    synth::ScenarioConfig synth;

    RunConfig();

    /// Sets one key from its text form. Throws Error on an unknown key or a malformed value.
    void set(std::string_view key, std::string_view value);
    std::string get(std::string_view key) const;

    /// Reads `key = value` lines; blank lines and lines starting with '#' are skipped.
    void load_file(const std::filesystem::path& path);

    /// Every key in serialization order.
    static std::vector<std::string> keys();

    /// Canonical text form. Paths and the thread count are left out when
    /// `reproducible_only` is set, because they do not change any artifact.
    std::string serialize(bool reproducible_only = false) const;

    /// 16 hex digits of FNV-1a over serialize(true).
    std::string hash() const;

    void validate() const;
};

/// Output directory when none is given: $BIDSCREEN_OUT, else kDefaultOutDir.
std::string default_out_dir();

}  // namespace bidscreen::config
