#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "factcheck/corpus.hpp"
#include "factcheck/encoder.hpp"
#include "factcheck/pipeline.hpp"

namespace factcheck::app {

/// Usage problems (bad flags, missing configuration) map to exit code 1.
class UsageError : public Error {
public:
    using Error::Error;
};

/// Every knob shared by the subcommands. Sources, lowest precedence first:
/// built-in defaults, the key = value config file, command-line flags.
struct AppConfig {
    std::string workdir = ".";
    std::string corpus;  // defaults to <workdir>/corpus.jsonl
    std::string index;   // defaults to <workdir>/index.fcix
    std::string encoder = "hashed";  // wordvec | hashed | external
    std::string wordvec_path;
    std::string endpoint;
    std::string verifier = "tfidf";  // tfidf | wordvec | external
    std::int64_t hashed_dim = 300;
    std::size_t k = 10;
    std::uint64_t seed = 42;
    int port = 8080;
    std::string host = "127.0.0.1";

    std::string train_end = "2020-05-15";
    std::string test_start = "2020-05-18";
    double val_fraction = 0.1;
    std::size_t negatives = 1;

    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    double lr = 0.001;
    std::size_t patience = 3;

    std::optional<double> t;      // overrides the calibrated similarity threshold
    std::optional<double> tau_b;  // overrides the calibrated decision boundary
    std::size_t timeout_ms = 10000;

    std::string corpus_path() const;
    std::string index_path() const;
    std::string artifact(std::string_view name) const;

    /// Applies one `key = value` setting; unknown keys are usage errors.
    void set(std::string_view key, std::string_view value);
};

/// Parses `key = value` lines; blank lines and `#` comments are ignored.
void apply_config_text(AppConfig& config, std::string_view text);

// Artifact names inside the work directory.
inline constexpr std::string_view kSplitFile = "split.json";
inline constexpr std::string_view kCalibrationFile = "calibration.json";
inline constexpr std::string_view kEvalReportFile = "eval.report.json";

/// Stage-A or stage-B baseline model files: <prefix>.vocab.json (TF-IDF only)
/// and <prefix>.fcnn.
struct ModelPaths {
    std::string vocab;
    std::string checkpoint;
    std::string report;
};
ModelPaths model_paths(const AppConfig& config, std::string_view stage);

std::shared_ptr<const encoder::Encoder> make_encoder(const AppConfig& config);
std::shared_ptr<const pipeline::Verifier> make_verifier(const AppConfig& config,
                                                        const std::shared_ptr<const encoder::Encoder>& stage_a);

/// Loads corpus, index, calibration and verifier from the work directory.
std::shared_ptr<const pipeline::Pipeline> load_pipeline(const AppConfig& config);

/// CLI entry point. Returns 0 on success, 1 on usage errors, 2 on runtime
/// errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace factcheck::app
