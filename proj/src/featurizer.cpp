#include "factcheck/featurizer.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include <json.hpp>

namespace factcheck::features {

namespace detail {
extern const char* const kBundledStopWords;
}

namespace {

bool word_byte(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

StopWords parse_stop_words(std::string_view text) {
    StopWords words;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
        if (!line.empty()) words.emplace(line);
        start = end + 1;
    }
    return words;
}

SparseVector from_counts(const std::map<Eigen::Index, double>& counts, Eigen::Index dim) {
    SparseVector v(dim);
    v.reserve(static_cast<Eigen::Index>(counts.size()));
    for (const auto& [index, weight] : counts) {
        v.insertBack(index) = weight;
    }
    return v;
}

std::map<Eigen::Index, double> count_terms(std::span<const std::string> tokens, const Vocabulary& vocab) {
    std::map<Eigen::Index, double> counts;
    for (const auto& t : tokens) {
        if (auto i = vocab.index_of(t); i >= 0) {
            counts[i] += 1.0;
        }
    }
    return counts;
}

}  // namespace

Tokens tokenize(std::string_view text) {
    Tokens tokens;
    std::string current;
    for (unsigned char c : text) {
        if (word_byte(c)) {
            current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

StopWords load_stop_words(const std::string& path) {
    return parse_stop_words(read_file(path));
}

const StopWords& default_stop_words() {
    static const StopWords words = parse_stop_words(detail::kBundledStopWords);
    return words;
}

Vocabulary Vocabulary::build(std::span<const Tokens> documents, std::size_t max_terms,
                             const StopWords& stop_words) {
    if (documents.empty()) {
        throw std::invalid_argument("build_vocabulary: no documents");
    }
    std::unordered_map<std::string, std::pair<std::uint64_t, std::uint64_t>> stats;  // total, df
    for (const auto& doc : documents) {
        std::unordered_set<std::string_view> in_doc;
        for (const auto& t : doc) {
            if (stop_words.contains(t)) continue;
            auto& s = stats[t];
            ++s.first;
            if (in_doc.insert(t).second) ++s.second;
        }
    }
    if (stats.empty()) {
        throw Error("build_vocabulary: no terms left after stop-word removal");
    }
    std::vector<std::pair<std::string, std::pair<std::uint64_t, std::uint64_t>>> ranked(stats.begin(), stats.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second.first != b.second.first) return a.second.first > b.second.first;
        return a.first < b.first;
    });
    if (ranked.size() > max_terms) ranked.resize(max_terms);

    Vocabulary v;
    v.corpus_size_ = documents.size();
    for (auto& [term, s] : ranked) {
        v.terms_.push_back(term);
        v.df_.push_back(s.second);
    }
    v.reindex();
    return v;
}

void Vocabulary::reindex() {
    index_.clear();
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        index_.emplace(terms_[i], static_cast<Eigen::Index>(i));
    }
}

Eigen::Index Vocabulary::index_of(std::string_view term) const {
    auto it = index_.find(std::string(term));
    return it == index_.end() ? -1 : it->second;
}

double Vocabulary::idf(Eigen::Index index) const {
    const double n = static_cast<double>(corpus_size_);
    const double df = static_cast<double>(df_.at(static_cast<std::size_t>(index)));
    return std::log((1.0 + n) / (1.0 + df)) + 1.0;
}

std::string Vocabulary::to_json() const {
    nlohmann::json terms = nlohmann::json::array();
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        terms.push_back({{"term", terms_[i]}, {"index", i}, {"df", df_[i]}});
    }
    return nlohmann::json{{"corpus_size", corpus_size_}, {"terms", terms}}.dump(1) + "\n";
}

Vocabulary Vocabulary::from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(std::string("malformed vocabulary file: ") + e.what());
    }
    Vocabulary v;
    v.corpus_size_ = j.at("corpus_size").get<std::size_t>();
    const auto& terms = j.at("terms");
    v.terms_.resize(terms.size());
    v.df_.resize(terms.size());
    std::vector<bool> filled(terms.size(), false);
    for (const auto& t : terms) {
        const auto i = t.at("index").get<std::size_t>();
        if (i >= terms.size() || filled[i]) {
            throw Error("vocabulary indices must be dense and unique");
        }
        filled[i] = true;
        v.terms_[i] = t.at("term").get<std::string>();
        v.df_[i] = t.at("df").get<std::uint64_t>();
    }
    v.reindex();
    return v;
}

SparseVector tf_vector(std::span<const std::string> tokens, const Vocabulary& vocab) {
    return from_counts(count_terms(tokens, vocab), vocab.size());
}

SparseVector tfidf_vector(std::span<const std::string> tokens, const Vocabulary& vocab) {
    auto counts = count_terms(tokens, vocab);
    double sq = 0.0;
    for (auto& [index, w] : counts) {
        w *= vocab.idf(index);
        sq += w * w;
    }
    if (sq > 0.0) {
        const double norm = std::sqrt(sq);
        for (auto& [index, w] : counts) w /= norm;
    }
    return from_counts(counts, vocab.size());
}

Eigen::VectorXd assemble_baseline_features(std::span<const std::string> claim_tokens,
                                           std::span<const std::string> explanation_tokens,
                                           const Vocabulary& vocab) {
    if (vocab.size() > kBaselineTerms) {
        throw std::invalid_argument("assemble_baseline_features: vocabulary exceeds " +
                                    std::to_string(kBaselineTerms) + " terms");
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(kBaselineFeatureDim);
    const SparseVector claim_tf = tf_vector(claim_tokens, vocab);
    const SparseVector explanation_tf = tf_vector(explanation_tokens, vocab);
    for (SparseVector::InnerIterator it(claim_tf); it; ++it) {
        out[it.index()] = it.value();
    }
    for (SparseVector::InnerIterator it(explanation_tf); it; ++it) {
        out[kBaselineTerms + it.index()] = it.value();
    }
    out[2 * kBaselineTerms] =
        cosine(tfidf_vector(claim_tokens, vocab), tfidf_vector(explanation_tokens, vocab));
    return out;
}

}  // namespace factcheck::features
