#pragma once

// Brute-force retrieval metrics computed from whole ranked lists, plus a
// random fixture generator.

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "factcheck/common.hpp"
#include "factcheck/eval.hpp"

namespace oracle {

struct RankedList {
    std::string gold;
    std::vector<std::string> ranked;  // full ranking, best first
};

inline std::vector<RankedList> random_lists(std::size_t n_claims, std::size_t n_explanations, factcheck::Rng& rng) {
    std::vector<std::string> ids(n_explanations);
    for (std::size_t i = 0; i < n_explanations; ++i) ids[i] = "e" + std::to_string(i);
    std::vector<RankedList> out;
    for (std::size_t c = 0; c < n_claims; ++c) {
        RankedList l;
        l.ranked = ids;
        factcheck::seeded_shuffle(l.ranked, rng);
        // One claim in five points at an explanation that is not in the list.
        l.gold = factcheck::uniform_index(rng, 5) == 0 ? "missing" : ids[factcheck::uniform_index(rng, n_explanations)];
        out.push_back(std::move(l));
    }
    return out;
}

/// Rank as the library would report it from a top-k list: 1-based position in
/// the first k entries, absent otherwise.
inline std::vector<factcheck::eval::RankingOutcome> outcomes_from(const std::vector<RankedList>& lists,
                                                                  std::size_t k) {
    std::vector<factcheck::eval::RankingOutcome> out;
    for (std::size_t c = 0; c < lists.size(); ++c) {
        factcheck::eval::RankingOutcome o{"c" + std::to_string(c), lists[c].gold, std::nullopt};
        for (std::size_t i = 0; i < std::min(k, lists[c].ranked.size()); ++i) {
            if (lists[c].ranked[i] == lists[c].gold) {
                o.rank = i + 1;
                break;
            }
        }
        out.push_back(o);
    }
    return out;
}

/// Reciprocal ranks summed in long double, scanning each full list.
inline double brute_mrr(const std::vector<RankedList>& lists, std::size_t k) {
    long double sum = 0.0L;
    for (const auto& l : lists) {
        for (std::size_t i = 0; i < l.ranked.size(); ++i) {
            if (l.ranked[i] == l.gold) {
                if (i < k) sum += 1.0L / static_cast<long double>(i + 1);
                break;
            }
        }
    }
    return static_cast<double>(sum / static_cast<long double>(lists.size()));
}

inline double brute_recall(const std::vector<RankedList>& lists, std::size_t k) {
    std::size_t hits = 0;
    for (const auto& l : lists) {
        const auto end = l.ranked.begin() + static_cast<std::ptrdiff_t>(std::min(k, l.ranked.size()));
        if (std::find(l.ranked.begin(), end, l.gold) != end) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(lists.size());
}

}  // namespace oracle
