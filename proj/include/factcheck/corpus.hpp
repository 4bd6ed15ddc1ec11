#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "factcheck/common.hpp"

namespace factcheck::corpus {

struct ExplanationRecord {
    std::string id;
    std::string text;
    std::optional<Date> date;
    std::string source;
};

struct ClaimRecord {
    std::string id;
    std::string text;
    std::optional<bool> veracity;  // absent for records that were never cross-validated
    std::string gold_explanation_id;
    Date date;
    std::string source;
};

enum class Stage { A, B };

struct PairExample {
    std::string claim_text;
    std::string explanation_text;
    int label = 0;
    Stage stage = Stage::A;

    friend bool operator==(const PairExample&, const PairExample&) = default;
};

/// Malformed corpus input. `line` is 1-based, or 0 when not tied to a line.
class CorpusError : public Error {
public:
    CorpusError(const std::string& message, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Knowledge base with resolved claim -> explanation references.
class Corpus {
public:
    Corpus() = default;
    Corpus(std::vector<ExplanationRecord> explanations, std::vector<ClaimRecord> claims);

    const std::vector<ExplanationRecord>& explanations() const noexcept { return explanations_; }
    const std::vector<ClaimRecord>& claims() const noexcept { return claims_; }

    const ExplanationRecord* find_explanation(std::string_view id) const;
    const ExplanationRecord& gold_of(const ClaimRecord& claim) const;

    /// One JSON object per line in the corpus file schema.
    std::string to_jsonl() const;

private:
    std::vector<ExplanationRecord> explanations_;
    std::vector<ClaimRecord> claims_;
    std::unordered_map<std::string, std::size_t> explanation_pos_;
};

Corpus parse_corpus_jsonl(std::string_view contents);
Corpus load_corpus(const std::string& path);

/// CSV importer: columns false_claim, true_claim, explanation, date, source.
/// Row n (1-based, header excluded) becomes explanation "e<n>" plus claims
/// "c<n>f" (veracity false) and "c<n>t" (veracity true); an empty true_claim
/// cell yields only the false claim.
Corpus parse_corpus_csv(std::string_view contents);
Corpus import_csv(const std::string& path);

/// Dispatches on extension: ".csv" goes through the CSV importer.
Corpus load_any(const std::string& path);

struct CorpusSplit {
    std::vector<ClaimRecord> train;
    std::vector<ClaimRecord> validation;
    std::vector<ClaimRecord> test;
    Date cutoff_train_end;
    Date cutoff_test_start;
    std::vector<std::string> excluded_ids;  // dated strictly between the cutoffs
    std::vector<std::string> warnings;
};

/// Claims dated <= train_end go to train (minus a seeded validation sample of
/// round(val_fraction * n_train) records), claims dated >= test_start go to
/// test, anything in between is excluded and reported.
CorpusSplit temporal_split(const Corpus& corpus, Date cutoff_train_end, Date cutoff_test_start,
                           double val_fraction, std::uint64_t seed);

/// One positive (claim, gold explanation) pair per claim plus
/// `negatives_per_positive` non-gold explanations drawn uniformly, then a
/// seeded shuffle.
std::vector<PairExample> generate_stage_a_pairs(const Corpus& corpus,
                                                std::span<const ClaimRecord> claims,
                                                std::uint64_t seed,
                                                std::size_t negatives_per_positive = 1);

struct StageBPairs {
    std::vector<PairExample> pairs;
    std::vector<std::string> warnings;
};

/// (claim, gold explanation, veracity) per claim; claims without a veracity
/// label are skipped with a warning.
StageBPairs generate_stage_b_pairs(const Corpus& corpus, std::span<const ClaimRecord> claims);

/// Split persistence: claim id lists per partition plus cutoffs, as JSON.
std::string split_to_json(const CorpusSplit& split);
CorpusSplit split_from_json(const Corpus& corpus, std::string_view json);

}  // namespace factcheck::corpus
