#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "factcheck/corpus.hpp"
#include "factcheck/encoder.hpp"
#include "factcheck/index.hpp"
#include "factcheck/pipeline.hpp"

namespace factcheck::eval {

struct RankingOutcome {
    std::string claim_id;
    std::string gold_explanation_id;
    std::optional<std::size_t> rank;  // absent when gold is not in the scored list
};

/// Mean reciprocal rank; an unretrieved gold contributes 0.
double mrr(std::span<const RankingOutcome> outcomes);
/// Fraction of outcomes with rank <= k.
double recall_at_k(std::span<const RankingOutcome> outcomes, std::size_t k);
inline double recall_at_10(std::span<const RankingOutcome> outcomes) { return recall_at_k(outcomes, 10); }

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::size_t no_evidence = 0;  // includes verdicts that carry an error
    std::size_t errors = 0;
    std::size_t scored() const noexcept { return tp + fp + tn + fn; }
};

struct ClassificationSummary {
    double accuracy = 0.0;  // over scored verdicts only; 0 when none
    Confusion confusion;
};

/// True is the positive class; gold labels must be True or False.
/// NoEvidence verdicts are counted separately and left out of the accuracy
/// denominator.
ClassificationSummary accuracy(std::span<const pipeline::Verdict> verdicts, std::span<const pipeline::Label> gold);

struct StageStats {
    std::size_t samples = 0;
    double median_ms = 0.0;
    double p95_ms = 0.0;
};

struct LatencySummary {
    StageStats encode, retrieve, verify, total;
    std::optional<long> peak_rss_kb;  // absent when the platform does not expose it
};

/// Median (mean of the middle pair for even n) and nearest-rank p95.
StageStats summarize(std::vector<double> samples_ms);
std::optional<long> peak_rss_kb();

struct EvalReport {
    double mrr = 0.0;
    double recall_at_10 = 0.0;
    std::size_t n_claims = 0;            // claims with a gold explanation in the index
    std::optional<double> accuracy;      // absent when the report is retrieval-only
    Confusion confusion;
    std::size_t excluded = 0;            // gold explanation missing from the index
    LatencySummary latency;
    std::vector<std::string> warnings;

    /// `include_latency` false drops the timing block, leaving only
    /// deterministic fields.
    std::string to_json(bool include_latency = true, int indent = 2) const;
    std::string to_text() const;
    std::string to_csv() const;
};

/// Ranks of each claim's gold explanation in its unfiltered top-k list.
std::vector<RankingOutcome> ranking_outcomes(const encoder::Encoder& encoder, const index::EmbeddingIndex& index,
                                             std::span<const corpus::ClaimRecord> claims, std::size_t k,
                                             std::vector<std::string>* warnings = nullptr);

/// Stage-A metrics only.
EvalReport evaluate_retrieval(const encoder::Encoder& encoder, const index::EmbeddingIndex& index,
                              std::span<const corpus::ClaimRecord> claims);

/// Stage-A metrics from unfiltered top-10 lists plus verdict accuracy from the
/// full pipeline.
EvalReport evaluate_pipeline(const pipeline::Pipeline& pipeline, std::span<const corpus::ClaimRecord> claims);

/// Runs every claim `repetitions` times, sequentially on the calling thread.
LatencySummary bench_latency(const pipeline::Pipeline& pipeline, std::span<const std::string> claims,
                             std::size_t repetitions);

/// Times query_top_k alone over precomputed query embeddings.
StageStats bench_retrieval(const index::EmbeddingIndex& index, std::span<const Eigen::VectorXd> queries,
                           std::size_t k, std::size_t repetitions);

}  // namespace factcheck::eval
