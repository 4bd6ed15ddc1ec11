#include "factcheck/index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "factcheck/featurizer.hpp"

namespace factcheck::index {

namespace {

constexpr std::uint16_t kIndexVersion = 1;

bool ranks_before(double sa, const std::string& ia, double sb, const std::string& ib) {
    if (sa != sb) return sa > sb;
    return ia < ib;
}

}  // namespace

EmbeddingIndex::EmbeddingIndex(std::vector<std::string> ids, const Eigen::MatrixXd& vectors,
                               std::string encoder_identity)
    : ids_(std::move(ids)), vectors_(vectors.rows(), vectors.cols()), encoder_identity_(std::move(encoder_identity)),
      built_at_(std::chrono::system_clock::now()) {
    if (static_cast<Eigen::Index>(ids_.size()) != vectors.cols()) {
        throw std::invalid_argument("EmbeddingIndex: id count does not match vector count");
    }
    for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
        const auto col = vectors.col(c);
        if (!col.allFinite()) {
            throw Error("EmbeddingIndex: non-finite embedding for " + ids_[static_cast<std::size_t>(c)]);
        }
        const double n = col.norm();
        Eigen::VectorXd unit = n > 0.0 ? Eigen::VectorXd(col / n) : Eigen::VectorXd::Zero(col.size());
        vectors_.col(c) = unit.cast<float>().cast<double>();
    }
    finish();
}

void EmbeddingIndex::finish() {
    position_.clear();
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (!position_.emplace(ids_[i], static_cast<Eigen::Index>(i)).second) {
            throw Error("EmbeddingIndex: duplicate id " + ids_[i]);
        }
    }
    norms_ = vectors_.colwise().norm().transpose();
}

Eigen::Index EmbeddingIndex::position(std::string_view id) const {
    auto it = position_.find(std::string(id));
    return it == position_.end() ? -1 : it->second;
}

Eigen::VectorXd EmbeddingIndex::similarities(const Eigen::Ref<const Eigen::VectorXd>& query) const {
    if (query.size() != dimension()) {
        throw std::invalid_argument("query dimension " + std::to_string(query.size()) + " does not match index " +
                                    std::to_string(dimension()));
    }
    const double qn = query.norm();
    if (qn == 0.0) {
        return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size()));
    }
    Eigen::VectorXd dots = vectors_.transpose() * query;
    for (Eigen::Index i = 0; i < dots.size(); ++i) {
        dots(i) = norms_(i) > 0.0 ? std::clamp(dots(i) / (norms_(i) * qn), -1.0, 1.0) : 0.0;
    }
    return dots;
}

std::string EmbeddingIndex::serialize() const {
    std::ostringstream out(std::ios::binary);
    out.write("FCIX", 4);
    binio::write_le<std::uint16_t>(out, kIndexVersion);
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(dimension()));
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(size()));
    binio::write_string(out, encoder_identity_);
    for (const auto& id : ids_) binio::write_string(out, id);
    for (Eigen::Index c = 0; c < vectors_.cols(); ++c) {
        for (Eigen::Index r = 0; r < vectors_.rows(); ++r) {
            binio::write_le<float>(out, static_cast<float>(vectors_(r, c)));
        }
    }
    return out.str();
}

EmbeddingIndex EmbeddingIndex::deserialize(std::string_view bytes) {
    std::istringstream in{std::string(bytes), std::ios::binary};
    binio::expect_magic(in, "FCIX", "index");
    const auto version = binio::read_le<std::uint16_t>(in);
    if (version != kIndexVersion) {
        throw Error("index: unsupported version " + std::to_string(version));
    }
    const auto dim = binio::read_le<std::uint32_t>(in);
    const auto count = binio::read_le<std::uint32_t>(in);
    const std::uint64_t payload = std::uint64_t{dim} * count * sizeof(float);
    if (payload > bytes.size()) {
        throw Error("index: header claims more vector data than the file holds");
    }
    EmbeddingIndex idx;
    idx.encoder_identity_ = binio::read_string(in);
    idx.ids_.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) idx.ids_.push_back(binio::read_string(in));
    idx.vectors_.resize(dim, count);
    for (std::uint32_t c = 0; c < count; ++c) {
        for (std::uint32_t r = 0; r < dim; ++r) {
            const float v = binio::read_le<float>(in);
            if (!std::isfinite(v)) throw Error("index: non-finite vector component");
            idx.vectors_(r, c) = static_cast<double>(v);
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw Error("index: trailing bytes after vector data");
    }
    idx.finish();
    return idx;
}

void EmbeddingIndex::save(const std::string& path) const {
    write_file_atomic(path, serialize());
}

EmbeddingIndex EmbeddingIndex::load(const std::string& path) {
    auto idx = deserialize(read_file(path));
    idx.built_at_ = std::chrono::system_clock::now();
    return idx;
}

EmbeddingIndex build_index(std::span<const corpus::ExplanationRecord> explanations, const encoder::Encoder& encoder) {
    if (explanations.empty()) {
        throw std::invalid_argument("build_index: no explanations");
    }
    std::vector<std::string> ids;
    std::vector<std::string> texts;
    ids.reserve(explanations.size());
    texts.reserve(explanations.size());
    for (const auto& e : explanations) {
        ids.push_back(e.id);
        texts.push_back(e.text);
    }
    const auto embeddings = encoder.encode_batch(texts);
    const auto desc = encoder.descriptor();
    Eigen::MatrixXd vectors(desc.dimension, static_cast<Eigen::Index>(embeddings.size()));
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        if (embeddings[i].size() != desc.dimension) {
            throw Error("build_index: embedding " + ids[i] + " has dimension " + std::to_string(embeddings[i].size()));
        }
        vectors.col(static_cast<Eigen::Index>(i)) = embeddings[i];
    }
    return EmbeddingIndex(std::move(ids), vectors, desc.identity);
}

std::vector<RetrievalHit> query_top_k(const EmbeddingIndex& index, const Eigen::Ref<const Eigen::VectorXd>& query,
                                      std::size_t k) {
    if (index.empty()) {
        throw Error("query_top_k: empty index");
    }
    const Eigen::VectorXd sims = index.similarities(query);
    const auto& ids = index.ids();
    std::vector<Eigen::Index> order(ids.size());
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const auto n = std::min(k, order.size());
    auto cmp = [&](Eigen::Index a, Eigen::Index b) {
        return ranks_before(sims(a), ids[static_cast<std::size_t>(a)], sims(b), ids[static_cast<std::size_t>(b)]);
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(), cmp);
    std::vector<RetrievalHit> hits;
    hits.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        hits.push_back({ids[static_cast<std::size_t>(order[r])], sims(order[r]), r + 1});
    }
    return hits;
}

Threshold threshold_from_similarities(std::span<const double> similarities) {
    if (similarities.size() < 2) {
        throw Error("insufficient calibration data");
    }
    const double n = static_cast<double>(similarities.size());
    double sum = 0.0;
    for (double s : similarities) sum += s;
    const double mean = sum / n;
    double sq = 0.0;
    for (double s : similarities) sq += (s - mean) * (s - mean);
    const double sd = std::sqrt(sq / n);
    return {mean - sd, mean, sd, similarities.size()};
}

Threshold calibrate_threshold(const EmbeddingIndex& index, const encoder::Encoder& encoder,
                              std::span<const CalibrationPair> validation) {
    if (validation.size() < 2) {
        throw Error("insufficient calibration data");
    }
    std::vector<std::string> claims;
    std::vector<Eigen::Index> gold;
    for (const auto& p : validation) {
        const auto pos = index.position(p.gold_explanation_id);
        if (pos < 0) {
            throw Error("calibrate_threshold: gold explanation " + p.gold_explanation_id + " is not in the index");
        }
        claims.push_back(p.claim_text);
        gold.push_back(pos);
    }
    const auto embeddings = encoder.encode_batch(claims);
    std::vector<double> sims;
    sims.reserve(embeddings.size());
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        sims.push_back(features::cosine(embeddings[i], index.vectors().col(gold[i])));
    }
    return threshold_from_similarities(sims);
}

std::vector<RetrievalHit> filter_hits(std::span<const RetrievalHit> hits, const Threshold& threshold) {
    std::vector<RetrievalHit> out;
    std::copy_if(hits.begin(), hits.end(), std::back_inserter(out),
                 [&](const RetrievalHit& h) { return h.similarity > threshold.t; });
    return out;
}

}  // namespace factcheck::index
