#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "factcheck/common.hpp"

namespace factcheck::features {

using Tokens = std::vector<std::string>;
using SparseVector = Eigen::SparseVector<double>;
using StopWords = std::unordered_set<std::string>;

/// Width of each TF block in the classical baseline feature vector.
inline constexpr Eigen::Index kBaselineTerms = 5000;
inline constexpr Eigen::Index kBaselineFeatureDim = 2 * kBaselineTerms + 1;

/// Lowercases ASCII and splits on every run of non-alphanumeric bytes. Bytes
/// >= 0x80 count as word characters so UTF-8 words stay whole.
Tokens tokenize(std::string_view text);

StopWords load_stop_words(const std::string& path);
/// The bundled English list shipped under data/.
const StopWords& default_stop_words();

class Vocabulary {
public:
    Vocabulary() = default;

    /// Keeps the `max_terms` most frequent non-stop-word terms (total count,
    /// ties broken lexicographically) and records per-term document frequency.
    static Vocabulary build(std::span<const Tokens> documents, std::size_t max_terms,
                            const StopWords& stop_words);

    Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(terms_.size()); }
    std::size_t corpus_size() const noexcept { return corpus_size_; }
    const std::vector<std::string>& terms() const noexcept { return terms_; }

    /// -1 when the term is out of vocabulary.
    Eigen::Index index_of(std::string_view term) const;
    std::uint64_t document_frequency(Eigen::Index index) const { return df_.at(static_cast<std::size_t>(index)); }

    /// Smoothed inverse document frequency ln((1 + N) / (1 + df)) + 1.
    double idf(Eigen::Index index) const;

    std::string to_json() const;
    static Vocabulary from_json(std::string_view text);

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
        return a.terms_ == b.terms_ && a.df_ == b.df_ && a.corpus_size_ == b.corpus_size_;
    }

private:
    void reindex();

    std::vector<std::string> terms_;
    std::vector<std::uint64_t> df_;
    std::size_t corpus_size_ = 0;
    std::unordered_map<std::string, Eigen::Index> index_;
};

/// Raw in-vocabulary counts.
SparseVector tf_vector(std::span<const std::string> tokens, const Vocabulary& vocab);

/// tf * idf, scaled to unit L2 norm. All-zero input stays all-zero.
SparseVector tfidf_vector(std::span<const std::string> tokens, const Vocabulary& vocab);

/// dot(a, b) / (|a| |b|), 0 when either norm is zero. Accepts any pair of
/// Eigen vector expressions, dense or sparse.
template <typename VecA, typename VecB>
double cosine(const VecA& a, const VecB& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("cosine: dimension mismatch (" + std::to_string(a.size()) +
                                    " vs " + std::to_string(b.size()) + ")");
    }
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    double c;
    if constexpr (std::is_base_of_v<Eigen::SparseMatrixBase<VecA>, VecA> &&
                  !std::is_base_of_v<Eigen::SparseMatrixBase<VecB>, VecB>) {
        c = a.dot(b) / (na * nb);
    } else if constexpr (!std::is_base_of_v<Eigen::SparseMatrixBase<VecA>, VecA> &&
                         std::is_base_of_v<Eigen::SparseMatrixBase<VecB>, VecB>) {
        c = b.dot(a) / (na * nb);
    } else {
        c = a.dot(b) / (na * nb);
    }
    return std::clamp(c, -1.0, 1.0);
}

/// [claim TF | explanation TF | TF-IDF cosine], each TF block padded to
/// kBaselineTerms slots.
Eigen::VectorXd assemble_baseline_features(std::span<const std::string> claim_tokens,
                                           std::span<const std::string> explanation_tokens,
                                           const Vocabulary& vocab);

}  // namespace factcheck::features
