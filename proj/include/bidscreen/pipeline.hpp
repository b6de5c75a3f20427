#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include "bidscreen/config.hpp"

namespace bidscreen::pipeline {

enum class Stage { Clean, Features, Train, Dedpul, Explain, Synth, Report, All };

const char* stage_name(Stage stage);
std::optional<Stage> parse_stage(std::string_view name);

/// Artifact file names inside the output directory.
namespace artifact {
inline constexpr const char* kBids = "bids.csv";  // synth output
inline constexpr const char* kGroundTruth = "ground_truth.csv";
inline constexpr const char* kCleaned = "cleaned.csv";
inline constexpr const char* kCleaningReport = "cleaning_report.csv";
inline constexpr const char* kParseDiagnostics = "parse_diagnostics.txt";
inline constexpr const char* kFeatures = "features.csv";
inline constexpr const char* kFeatureDiagnostics = "feature_diagnostics.txt";
inline constexpr const char* kSummary = "summary.csv";
inline constexpr const char* kYearly = "yearly.csv";
inline constexpr const char* kModel = "model.txt";
inline constexpr const char* kScores = "scores.csv";
inline constexpr const char* kPosteriors = "posteriors.csv";
inline constexpr const char* kDedpul = "dedpul.txt";
inline constexpr const char* kTreeDot = "tree.dot";
inline constexpr const char* kTreeText = "tree.txt";
inline constexpr const char* kPaths = "paths.csv";
inline constexpr const char* kExplain = "explain.txt";
inline constexpr const char* kTopSuspicious = "top_suspicious.csv";
inline constexpr const char* kRunSummary = "run_summary.txt";
inline constexpr const char* kRunConfig = "run_config.txt";
inline constexpr const char* kManifest = "manifest.csv";
inline constexpr const char* kLock = ".bidscreen.lock";
}  // namespace artifact

/// Exclusive claim on an output directory for the lifetime of the object.
class DirectoryLock {
public:
    explicit DirectoryLock(const std::filesystem::path& dir);
    ~DirectoryLock();
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    std::filesystem::path path_;
};

/// Runs one stage (or the whole chain for Stage::All) against config.out. Results meant for
/// the user go to `out`, progress to `log`. Throws bidscreen::Error on failure.
void run_stage(Stage stage, const config::RunConfig& config, std::ostream& out, std::ostream& log);

/// Key-value pairs of a `key value` text artifact such as dedpul.txt.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

}  // namespace bidscreen::pipeline
