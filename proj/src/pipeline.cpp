#include "factcheck/pipeline.hpp"

#include <chrono>

#include <json.hpp>

namespace factcheck::pipeline {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

std::string_view kind_name(VerifierKind kind) {
    switch (kind) {
        case VerifierKind::BaselineTfidfNet: return "baseline_tfidf_net";
        case VerifierKind::BaselineWordvecNet: return "baseline_wordvec_net";
        case VerifierKind::External: return "external";
        case VerifierKind::Custom: return "custom";
    }
    return "unknown";
}

double Verifier::probability(const std::string& claim, const std::string& explanation) const {
    const TextPair p{claim, explanation};
    return probabilities(std::span<const TextPair>(&p, 1)).front();
}

Eigen::VectorXd tfidf_pair_features(std::string_view claim, std::string_view explanation,
                                    const features::Vocabulary& vocab) {
    const auto ct = features::tokenize(claim);
    const auto et = features::tokenize(explanation);
    return features::assemble_baseline_features(ct, et, vocab);
}

Eigen::VectorXd wordvec_pair_features(std::string_view claim, std::string_view explanation,
                                      const encoder::Encoder& encoder) {
    const auto c = encoder.encode(claim);
    const auto e = encoder.encode(explanation);
    Eigen::VectorXd out(c.size() + e.size());
    out << c, e;
    return out;
}

TfidfNetVerifier::TfidfNetVerifier(features::Vocabulary vocab, nn::DenseNet<double> net)
    : vocab_(std::move(vocab)), net_(std::move(net)) {
    if (net_.input_dim() != features::kBaselineFeatureDim) {
        throw Error("TF-IDF verifier network expects " + std::to_string(net_.input_dim()) + " inputs, not " +
                    std::to_string(features::kBaselineFeatureDim));
    }
}

std::vector<double> TfidfNetVerifier::probabilities(std::span<const TextPair> pairs) const {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& [claim, explanation] : pairs) {
        out.push_back(nn::predict_prob(net_, tfidf_pair_features(claim, explanation, vocab_)));
    }
    return out;
}

WordvecNetVerifier::WordvecNetVerifier(std::shared_ptr<const encoder::Encoder> encoder, nn::DenseNet<double> net)
    : encoder_(std::move(encoder)), net_(std::move(net)) {
    if (net_.input_dim() != 2 * encoder_->dimension()) {
        throw Error("word-vector verifier network expects " + std::to_string(net_.input_dim()) +
                    " inputs, encoder gives pairs of " + std::to_string(encoder_->dimension()));
    }
}

std::vector<double> WordvecNetVerifier::probabilities(std::span<const TextPair> pairs) const {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& [claim, explanation] : pairs) {
        out.push_back(nn::predict_prob(net_, wordvec_pair_features(claim, explanation, *encoder_)));
    }
    return out;
}

ExternalVerifier::ExternalVerifier(std::shared_ptr<const encoder::ExternalClient> client)
    : client_(std::move(client)) {}

std::vector<double> ExternalVerifier::probabilities(std::span<const TextPair> pairs) const {
    return client_->classify(pairs);
}

std::vector<double> FunctionVerifier::probabilities(std::span<const TextPair> pairs) const {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& [claim, explanation] : pairs) {
        const double p = fn_(claim, explanation);
        if (!(p >= 0.0 && p <= 1.0)) {
            throw Error("verifier returned probability outside [0, 1]");
        }
        out.push_back(p);
    }
    return out;
}

BoundaryCalibration boundary_from_means(double mean_aligned, double mean_unaligned) {
    BoundaryCalibration b;
    b.mean_aligned = mean_aligned;
    b.mean_unaligned = mean_unaligned;
    if (mean_aligned > mean_unaligned) {
        b.tau_b = (mean_aligned + mean_unaligned) / 2.0;
    } else {
        b.tau_b = 0.5;
        b.fell_back = true;
        b.warning = "aligned mean " + std::to_string(mean_aligned) + " does not exceed unaligned mean " +
                    std::to_string(mean_unaligned) + "; using 0.5";
    }
    return b;
}

BoundaryCalibration calibrate_verifier_boundary(const Verifier& verifier,
                                                std::span<const corpus::PairExample> validation) {
    std::vector<TextPair> pairs;
    pairs.reserve(validation.size());
    for (const auto& p : validation) pairs.emplace_back(p.claim_text, p.explanation_text);
    const auto probs = verifier.probabilities(pairs);
    double sum[2] = {0.0, 0.0};
    std::size_t count[2] = {0, 0};
    for (std::size_t i = 0; i < validation.size(); ++i) {
        const int y = validation[i].label;
        if (y != 0 && y != 1) {
            throw std::invalid_argument("calibrate_verifier_boundary: label out of range");
        }
        sum[y] += probs[i];
        ++count[y];
    }
    if (count[0] == 0 || count[1] == 0) {
        throw Error("calibrate_verifier_boundary: validation set must contain both labels");
    }
    return boundary_from_means(sum[1] / static_cast<double>(count[1]), sum[0] / static_cast<double>(count[0]));
}

std::string_view label_name(Label label) {
    switch (label) {
        case Label::True: return "True";
        case Label::False: return "False";
        case Label::NoEvidence: return "NoEvidence";
    }
    return "unknown";
}

std::optional<double> aggregate_truth(std::span<const double> probabilities) {
    if (probabilities.empty()) return std::nullopt;
    double sum = 0.0;
    for (double p : probabilities) sum += p;
    return sum / static_cast<double>(probabilities.size());
}

Label label_for(double p_truth, double tau_b) {
    return p_truth >= tau_b ? Label::True : Label::False;
}

std::string verdict_to_json(const Verdict& v, int indent) {
    nlohmann::json candidates = nlohmann::json::array();
    for (const auto& c : v.candidates) {
        candidates.push_back({{"id", c.explanation_id}, {"similarity", c.similarity}, {"prob", c.probability}});
    }
    nlohmann::json j = {
        {"claim", v.claim},
        {"label", label_name(v.label)},
        {"p_truth", v.p_truth ? nlohmann::json(*v.p_truth) : nlohmann::json(nullptr)},
        {"tau_b", v.tau_b},
        {"threshold_t", v.threshold_t},
        {"candidates", candidates},
        {"timings_ms",
         {{"encode", v.timings.encode_ms}, {"retrieve", v.timings.retrieve_ms}, {"verify", v.timings.verify_ms}}},
    };
    if (v.error) j["error"] = *v.error;
    return j.dump(indent);
}

Pipeline::Pipeline(std::shared_ptr<const encoder::Encoder> encoder, std::shared_ptr<const index::EmbeddingIndex> index,
                   std::unordered_map<std::string, std::string> explanation_texts,
                   std::shared_ptr<const Verifier> verifier, index::Threshold threshold, double tau_b, std::size_t k)
    : encoder_(std::move(encoder)), index_(std::move(index)), explanation_texts_(std::move(explanation_texts)),
      verifier_(std::move(verifier)), threshold_(threshold), tau_b_(tau_b), k_(k) {
    if (!encoder_ || !index_ || !verifier_) {
        throw std::invalid_argument("Pipeline: encoder, index and verifier are required");
    }
    if (index_->empty()) {
        throw Error("Pipeline: empty knowledge base");
    }
    if (!(tau_b_ > 0.0 && tau_b_ < 1.0)) {
        throw std::invalid_argument("Pipeline: tau_b must lie in (0, 1)");
    }
    for (const auto& id : index_->ids()) {
        if (!explanation_texts_.contains(id)) {
            throw Error("Pipeline: no text for indexed explanation " + id);
        }
    }
}

Verdict Pipeline::check_claim(std::string_view claim) const {
    Verdict v;
    v.claim = std::string(claim);
    v.tau_b = tau_b_;
    v.threshold_t = threshold_.t;
    std::vector<index::RetrievalHit> kept;
    try {
        auto t0 = Clock::now();
        const auto embedding = encoder_->encode(claim);
        v.timings.encode_ms = ms_since(t0);

        t0 = Clock::now();
        v.retrieved = index::query_top_k(*index_, embedding, k_);
        kept = index::filter_hits(v.retrieved, threshold_);
        v.timings.retrieve_ms = ms_since(t0);
    } catch (const std::exception& e) {
        v.error = std::string("encode/retrieve failed: ") + e.what();
        return v;
    }

    if (kept.empty()) {
        return v;
    }
    std::vector<TextPair> pairs;
    pairs.reserve(kept.size());
    for (const auto& h : kept) pairs.emplace_back(v.claim, explanation_texts_.at(h.explanation_id));
    std::vector<double> probs;
    try {
        const auto t0 = Clock::now();
        probs = verifier_->probabilities(pairs);
        v.timings.verify_ms = ms_since(t0);
        if (probs.size() != kept.size()) {
            throw Error("verifier returned " + std::to_string(probs.size()) + " probabilities for " +
                        std::to_string(kept.size()) + " pairs");
        }
    } catch (const std::exception& e) {
        v.error = std::string("verify failed: ") + e.what();
        return v;
    }
    for (std::size_t i = 0; i < kept.size(); ++i) {
        v.candidates.push_back({kept[i].explanation_id, kept[i].similarity, probs[i], kept[i].rank});
    }
    v.p_truth = aggregate_truth(probs);
    v.label = label_for(*v.p_truth, tau_b_);
    return v;
}

std::vector<Verdict> Pipeline::check_batch(std::span<const std::string> claims) const {
    std::vector<Verdict> out;
    out.reserve(claims.size());
    for (const auto& c : claims) out.push_back(check_claim(c));
    return out;
}

std::unordered_map<std::string, std::string> explanation_texts(const corpus::Corpus& corpus) {
    std::unordered_map<std::string, std::string> out;
    for (const auto& e : corpus.explanations()) out.emplace(e.id, e.text);
    return out;
}

}  // namespace factcheck::pipeline
