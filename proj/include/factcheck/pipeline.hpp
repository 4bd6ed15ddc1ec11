#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "factcheck/corpus.hpp"
#include "factcheck/encoder.hpp"
#include "factcheck/featurizer.hpp"
#include "factcheck/index.hpp"
#include "factcheck/nn.hpp"

namespace factcheck::pipeline {

using TextPair = std::pair<std::string, std::string>;  // (claim, explanation)

enum class VerifierKind { BaselineTfidfNet, BaselineWordvecNet, External, Custom };
std::string_view kind_name(VerifierKind kind);

/// Stage B: probability that a claim aligns with an explanation. Scoring is
/// strictly per pair, so dropping one candidate never changes another's score.
class Verifier {
public:
    virtual ~Verifier() = default;
    virtual std::vector<double> probabilities(std::span<const TextPair> pairs) const = 0;
    virtual VerifierKind kind() const = 0;

    double probability(const std::string& claim, const std::string& explanation) const;
};

/// Classical feature vector for one pair: [claim TF | explanation TF | TF-IDF cosine].
Eigen::VectorXd tfidf_pair_features(std::string_view claim, std::string_view explanation,
                                    const features::Vocabulary& vocab);

/// [mean word vector of claim | mean word vector of explanation].
Eigen::VectorXd wordvec_pair_features(std::string_view claim, std::string_view explanation,
                                      const encoder::Encoder& encoder);

class TfidfNetVerifier final : public Verifier {
public:
    TfidfNetVerifier(features::Vocabulary vocab, nn::DenseNet<double> net);
    std::vector<double> probabilities(std::span<const TextPair> pairs) const override;
    VerifierKind kind() const override { return VerifierKind::BaselineTfidfNet; }

private:
    features::Vocabulary vocab_;
    nn::DenseNet<double> net_;
};

class WordvecNetVerifier final : public Verifier {
public:
    WordvecNetVerifier(std::shared_ptr<const encoder::Encoder> encoder, nn::DenseNet<double> net);
    std::vector<double> probabilities(std::span<const TextPair> pairs) const override;
    VerifierKind kind() const override { return VerifierKind::BaselineWordvecNet; }

private:
    std::shared_ptr<const encoder::Encoder> encoder_;
    nn::DenseNet<double> net_;
};

class ExternalVerifier final : public Verifier {
public:
    explicit ExternalVerifier(std::shared_ptr<const encoder::ExternalClient> client);
    std::vector<double> probabilities(std::span<const TextPair> pairs) const override;
    VerifierKind kind() const override { return VerifierKind::External; }

private:
    std::shared_ptr<const encoder::ExternalClient> client_;
};

/// Wraps a plain function; used for stubs and experiments.
class FunctionVerifier final : public Verifier {
public:
    using Fn = std::function<double(const std::string& claim, const std::string& explanation)>;
    explicit FunctionVerifier(Fn fn) : fn_(std::move(fn)) {}
    std::vector<double> probabilities(std::span<const TextPair> pairs) const override;
    VerifierKind kind() const override { return VerifierKind::Custom; }

private:
    Fn fn_;
};

struct BoundaryCalibration {
    double tau_b = 0.5;
    double mean_aligned = 0.0;    // label-1 pairs
    double mean_unaligned = 0.0;  // label-0 pairs
    bool fell_back = false;
    std::string warning;
};

/// tau_B = midpoint of the class-mean probabilities; 0.5 (with a warning) when
/// the aligned mean does not exceed the unaligned mean.
BoundaryCalibration boundary_from_means(double mean_aligned, double mean_unaligned);
BoundaryCalibration calibrate_verifier_boundary(const Verifier& verifier,
                                                std::span<const corpus::PairExample> validation);

enum class Label { True, False, NoEvidence };
std::string_view label_name(Label label);

struct Candidate {
    std::string explanation_id;
    double similarity = 0.0;
    double probability = 0.0;
    std::size_t rank = 0;
};

struct StageTimings {
    double encode_ms = 0.0;
    double retrieve_ms = 0.0;
    double verify_ms = 0.0;
};

struct Verdict {
    std::string claim;
    std::vector<Candidate> candidates;
    std::optional<double> p_truth;
    Label label = Label::NoEvidence;
    double tau_b = 0.5;
    double threshold_t = 0.0;
    std::vector<index::RetrievalHit> retrieved;  // unfiltered top-k, for diagnosing stage-A misses
    StageTimings timings;
    std::optional<std::string> error;
};

/// Mean of the probabilities; nullopt when empty.
std::optional<double> aggregate_truth(std::span<const double> probabilities);
/// p >= tau_b is True (ties included).
Label label_for(double p_truth, double tau_b);

std::string verdict_to_json(const Verdict& verdict, int indent = -1);

/// Immutable once built; check_claim is reentrant.
class Pipeline {
public:
    Pipeline(std::shared_ptr<const encoder::Encoder> encoder, std::shared_ptr<const index::EmbeddingIndex> index,
             std::unordered_map<std::string, std::string> explanation_texts, std::shared_ptr<const Verifier> verifier,
             index::Threshold threshold, double tau_b = 0.5, std::size_t k = 10);

    /// Encode, top-k, keep hits with similarity > t, score survivors, average.
    /// Encoder or verifier failures produce a NoEvidence verdict with `error` set.
    Verdict check_claim(std::string_view claim) const;
    std::vector<Verdict> check_batch(std::span<const std::string> claims) const;

    const encoder::Encoder& encoder() const noexcept { return *encoder_; }
    const index::EmbeddingIndex& index() const noexcept { return *index_; }
    const Verifier& verifier() const noexcept { return *verifier_; }
    const index::Threshold& threshold() const noexcept { return threshold_; }
    double tau_b() const noexcept { return tau_b_; }
    std::size_t k() const noexcept { return k_; }

private:
    std::shared_ptr<const encoder::Encoder> encoder_;
    std::shared_ptr<const index::EmbeddingIndex> index_;
    std::unordered_map<std::string, std::string> explanation_texts_;
    std::shared_ptr<const Verifier> verifier_;
    index::Threshold threshold_;
    double tau_b_;
    std::size_t k_;
};

std::unordered_map<std::string, std::string> explanation_texts(const corpus::Corpus& corpus);

}  // namespace factcheck::pipeline
