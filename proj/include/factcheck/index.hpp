#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "factcheck/common.hpp"
#include "factcheck/corpus.hpp"
#include "factcheck/encoder.hpp"

namespace factcheck::index {

struct RetrievalHit {
    std::string explanation_id;
    double similarity = 0.0;
    std::size_t rank = 0;  // 1-based

    friend bool operator==(const RetrievalHit&, const RetrievalHit&) = default;
};

struct Threshold {
    double t = 0.0;
    double mean = 0.0;
    double std = 0.0;
    std::size_t n_calibration = 0;
};

/// Cached explanation embeddings for exhaustive cosine retrieval.
///
/// Vectors are unit-normalized at build time and rounded to float32, the
/// on-disk precision, so an index loaded from file is bit-identical to the one
/// that was saved. Zero embeddings stay zero and score 0 against any query.
class EmbeddingIndex {
public:
    EmbeddingIndex() = default;
    EmbeddingIndex(std::vector<std::string> ids, const Eigen::MatrixXd& vectors, std::string encoder_identity);

    Eigen::Index dimension() const noexcept { return vectors_.rows(); }
    std::size_t size() const noexcept { return ids_.size(); }
    bool empty() const noexcept { return ids_.empty(); }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    /// One stored vector per column.
    const Eigen::MatrixXd& vectors() const noexcept { return vectors_; }
    const std::string& encoder_identity() const noexcept { return encoder_identity_; }
    std::chrono::system_clock::time_point built_at() const noexcept { return built_at_; }

    /// Column of `id`, or -1.
    Eigen::Index position(std::string_view id) const;

    /// Cosine of `query` against every stored vector (0 where either is zero).
    Eigen::VectorXd similarities(const Eigen::Ref<const Eigen::VectorXd>& query) const;

    std::string serialize() const;
    static EmbeddingIndex deserialize(std::string_view bytes);
    void save(const std::string& path) const;
    static EmbeddingIndex load(const std::string& path);

private:
    std::vector<std::string> ids_;
    Eigen::MatrixXd vectors_;
    Eigen::VectorXd norms_;
    std::string encoder_identity_;
    std::chrono::system_clock::time_point built_at_{};
    std::unordered_map<std::string, Eigen::Index> position_;

    void finish();
};

/// Encodes every explanation once (in corpus order) and stores it normalized.
EmbeddingIndex build_index(std::span<const corpus::ExplanationRecord> explanations, const encoder::Encoder& encoder);

/// Exact top-k by exhaustive scan. Ties are broken by explanation id.
std::vector<RetrievalHit> query_top_k(const EmbeddingIndex& index, const Eigen::Ref<const Eigen::VectorXd>& query,
                                      std::size_t k = 10);

/// t = mean - population standard deviation.
Threshold threshold_from_similarities(std::span<const double> similarities);

struct CalibrationPair {
    std::string claim_text;
    std::string gold_explanation_id;
};

/// Cosine between each claim and its gold explanation's stored vector, then
/// `threshold_from_similarities`.
Threshold calibrate_threshold(const EmbeddingIndex& index, const encoder::Encoder& encoder,
                              std::span<const CalibrationPair> validation);

/// Hits with similarity strictly above t, order preserved.
std::vector<RetrievalHit> filter_hits(std::span<const RetrievalHit> hits, const Threshold& threshold);

}  // namespace factcheck::index
