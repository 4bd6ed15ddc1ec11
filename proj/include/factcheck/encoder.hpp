#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "factcheck/common.hpp"

namespace factcheck::encoder {

using Embedding = Eigen::VectorXd;

enum class EncoderKind { WordVectors, Hashed, External };

std::string_view kind_name(EncoderKind kind);

struct EncoderDescriptor {
    EncoderKind kind;
    Eigen::Index dimension;
    std::string identity;  // stable for a given configuration
};

/// Text -> fixed-width vector. Implementations are immutable once built and
/// safe to call concurrently.
class Encoder {
public:
    virtual ~Encoder() = default;

    virtual Embedding encode(std::string_view text) const = 0;

    /// Order-preserving; equal to repeated `encode`. A failure is rethrown
    /// with the index of the offending text.
    virtual std::vector<Embedding> encode_batch(std::span<const std::string> texts) const;

    virtual EncoderDescriptor descriptor() const = 0;
    Eigen::Index dimension() const { return descriptor().dimension; }
};

/// Mean of pretrained token vectors (GloVe text format). Tokens missing from
/// the table are skipped; text with no known token maps to the zero vector.
class WordVectorEncoder final : public Encoder {
public:
    WordVectorEncoder(std::unordered_map<std::string, Eigen::VectorXd> table, Eigen::Index dimension,
                      std::string identity);

    Embedding encode(std::string_view text) const override;
    EncoderDescriptor descriptor() const override;

    std::size_t vocabulary_size() const noexcept { return table_.size(); }
    const Eigen::VectorXd* lookup(std::string_view token) const;

private:
    std::unordered_map<std::string, Eigen::VectorXd> table_;
    Eigen::Index dimension_;
    std::string identity_;
};

/// Reads "token c1 ... cD" lines. With expected_dimension == 0 the width of
/// the first line sets D.
std::shared_ptr<WordVectorEncoder> load_word_vectors(const std::string& path,
                                                     Eigen::Index expected_dimension = 0);

/// Hermetic stand-in for a learned encoder: every token maps to a
/// pseudo-random unit vector seeded by a 64-bit hash of the token, and a text
/// maps to the mean of its token vectors.
class HashedEncoder final : public Encoder {
public:
    explicit HashedEncoder(Eigen::Index dimension = 300, std::uint64_t seed = 0);

    Embedding encode(std::string_view text) const override;
    EncoderDescriptor descriptor() const override;

    Eigen::VectorXd token_vector(std::string_view token) const;

private:
    Eigen::Index dimension_;
    std::uint64_t seed_;
};

/// Mean pooling with multiplicity weights: sum_i (count_i / total) * v_i over
/// distinct tokens in first-occurrence order. Repeating a single token k times
/// reproduces its vector exactly.
template <typename Lookup>
Embedding mean_pool(std::span<const std::string> tokens, Eigen::Index dimension, Lookup&& lookup) {
    std::vector<std::pair<std::string_view, std::size_t>> counts;
    std::unordered_map<std::string_view, std::size_t> position;
    std::size_t total = 0;
    for (const auto& t : tokens) {
        if (!lookup.known(t)) continue;
        ++total;
        if (auto [it, inserted] = position.emplace(t, counts.size()); inserted) {
            counts.emplace_back(t, 1);
        } else {
            ++counts[it->second].second;
        }
    }
    Embedding out = Embedding::Zero(dimension);
    for (const auto& [token, count] : counts) {
        out += (static_cast<double>(count) / static_cast<double>(total)) * lookup.vector(token);
    }
    return out;
}

struct ExternalOptions {
    std::string endpoint;  // e.g. http://127.0.0.1:8500
    std::chrono::milliseconds timeout{10000};
    std::ptrdiff_t max_in_flight = 4;
};

/// HTTP client for the sidecar wire protocol (/embed, /classify, /health).
/// Concurrent callers are bounded by `max_in_flight`.
class ExternalClient {
public:
    explicit ExternalClient(ExternalOptions options);
    ~ExternalClient();

    /// POST /embed. Checks that every vector has the reported width.
    std::vector<Embedding> embed(std::span<const std::string> texts) const;
    /// POST /classify; alignment probability per (claim, explanation).
    std::vector<double> classify(std::span<const std::pair<std::string, std::string>> pairs) const;
    /// GET /health; returns the reported model name.
    std::string health() const;

    const ExternalOptions& options() const noexcept { return options_; }

private:
    std::string post(const std::string& path, const std::string& body) const;

    ExternalOptions options_;
    std::unique_ptr<std::counting_semaphore<>> in_flight_;
};

/// Encoder backed by the sidecar. Dimension is learned from the first
/// response (or a one-text probe) and enforced afterwards.
class ExternalEncoder final : public Encoder {
public:
    explicit ExternalEncoder(std::shared_ptr<const ExternalClient> client, Eigen::Index dimension = 0);

    Embedding encode(std::string_view text) const override;
    std::vector<Embedding> encode_batch(std::span<const std::string> texts) const override;
    EncoderDescriptor descriptor() const override;

private:
    std::shared_ptr<const ExternalClient> client_;
    mutable std::atomic<Eigen::Index> dimension_;
};

}  // namespace factcheck::encoder
