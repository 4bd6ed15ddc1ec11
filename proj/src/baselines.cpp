#include "factcheck/baselines.hpp"

#include <set>
#include <unordered_map>

namespace factcheck::baselines {

namespace {

struct TokenizedPair {
    features::Tokens claim;
    features::Tokens explanation;
    int label;
};

std::vector<TokenizedPair> tokenize_pairs(std::span<const corpus::PairExample> pairs) {
    std::vector<TokenizedPair> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        out.push_back({features::tokenize(p.claim_text), features::tokenize(p.explanation_text), p.label});
    }
    return out;
}

struct EncodedPair {
    Eigen::VectorXd features;
    int label;
};

std::vector<EncodedPair> encode_pairs(std::span<const corpus::PairExample> pairs, const encoder::Encoder& encoder,
                                      std::unordered_map<std::string, Eigen::VectorXd>& cache) {
    auto embed = [&](const std::string& text) -> const Eigen::VectorXd& {
        auto it = cache.find(text);
        if (it == cache.end()) it = cache.emplace(text, encoder.encode(text)).first;
        return it->second;
    };
    std::vector<EncodedPair> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        const auto& c = embed(p.claim_text);
        const auto& e = embed(p.explanation_text);
        Eigen::VectorXd f(c.size() + e.size());
        f << c, e;
        out.push_back({std::move(f), p.label});
    }
    return out;
}

template <typename Example>
TrainedBaseline fit(nn::DenseNet<double> net, const std::vector<Example>& train, const std::vector<Example>& validation,
                    const nn::Featurizer<Example>& featurize, const nn::TrainConfig& config) {
    auto label_of = [](const Example& e) { return e.label; };
    TrainedBaseline out;
    out.history = nn::train(net, std::span<const Example>(train), featurize, label_of, config,
                            std::span<const Example>(validation));
    out.train_accuracy = nn::accuracy(net, std::span<const Example>(train), featurize, label_of);
    if (!validation.empty()) {
        out.validation_accuracy = nn::accuracy(net, std::span<const Example>(validation), featurize, label_of);
    }
    out.net = std::move(net);
    return out;
}

}  // namespace

features::Vocabulary pair_vocabulary(std::span<const corpus::PairExample> pairs, const features::StopWords& stop_words,
                                     std::size_t max_terms) {
    std::set<std::string_view> texts;
    for (const auto& p : pairs) {
        texts.insert(p.claim_text);
        texts.insert(p.explanation_text);
    }
    std::vector<features::Tokens> docs;
    docs.reserve(texts.size());
    for (auto t : texts) docs.push_back(features::tokenize(t));
    return features::Vocabulary::build(docs, max_terms, stop_words);
}

TrainedBaseline train_tfidf_baseline(std::span<const corpus::PairExample> train,
                                     std::span<const corpus::PairExample> validation,
                                     const features::Vocabulary& vocab, const nn::TrainConfig& config) {
    const auto train_tok = tokenize_pairs(train);
    const auto val_tok = tokenize_pairs(validation);
    nn::Featurizer<TokenizedPair> featurize = [&vocab](const TokenizedPair& p) {
        return features::assemble_baseline_features(p.claim, p.explanation, vocab);
    };
    nn::DenseNet<double> net(nn::tfidf_baseline_layers(features::kBaselineFeatureDim), config.seed);
    return fit(std::move(net), train_tok, val_tok, featurize, config);
}

TrainedBaseline train_wordvec_baseline(std::span<const corpus::PairExample> train,
                                       std::span<const corpus::PairExample> validation,
                                       const encoder::Encoder& encoder, const nn::TrainConfig& config) {
    std::unordered_map<std::string, Eigen::VectorXd> cache;
    const auto train_enc = encode_pairs(train, encoder, cache);
    const auto val_enc = encode_pairs(validation, encoder, cache);
    nn::Featurizer<EncodedPair> featurize = [](const EncodedPair& p) { return p.features; };
    nn::DenseNet<double> net(nn::wordvec_baseline_layers(2 * encoder.dimension()), config.seed);
    return fit(std::move(net), train_enc, val_enc, featurize, config);
}

}  // namespace factcheck::baselines
