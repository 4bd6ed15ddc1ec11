#pragma once

#include <optional>
#include <span>

#include "factcheck/corpus.hpp"
#include "factcheck/encoder.hpp"
#include "factcheck/featurizer.hpp"
#include "factcheck/nn.hpp"

namespace factcheck::baselines {

/// Vocabulary over the distinct claim and explanation texts of `pairs`.
features::Vocabulary pair_vocabulary(std::span<const corpus::PairExample> pairs,
                                     const features::StopWords& stop_words = features::default_stop_words(),
                                     std::size_t max_terms = features::kBaselineTerms);

struct TrainedBaseline {
    nn::DenseNet<double> net;
    nn::TrainResult history;
    double train_accuracy = 0.0;
    std::optional<double> validation_accuracy;
};

/// TF / TF-IDF classifier: 10,001 features into 50 -> 20 -> 2.
TrainedBaseline train_tfidf_baseline(std::span<const corpus::PairExample> train,
                                     std::span<const corpus::PairExample> validation,
                                     const features::Vocabulary& vocab, const nn::TrainConfig& config);

/// Averaged word vectors: [claim | explanation] into 200 -> 100 -> 50 -> 2.
TrainedBaseline train_wordvec_baseline(std::span<const corpus::PairExample> train,
                                       std::span<const corpus::PairExample> validation,
                                       const encoder::Encoder& encoder, const nn::TrainConfig& config);

}  // namespace factcheck::baselines
