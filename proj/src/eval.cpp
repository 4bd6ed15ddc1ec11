#include "factcheck/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <sys/resource.h>

#include <json.hpp>

namespace factcheck::eval {

double mrr(std::span<const RankingOutcome> outcomes) {
    if (outcomes.empty()) {
        throw std::invalid_argument("mrr: no outcomes");
    }
    double sum = 0.0;
    for (const auto& o : outcomes) {
        if (o.rank) {
            if (*o.rank == 0) throw std::invalid_argument("mrr: ranks are 1-based");
            sum += 1.0 / static_cast<double>(*o.rank);
        }
    }
    return sum / static_cast<double>(outcomes.size());
}

double recall_at_k(std::span<const RankingOutcome> outcomes, std::size_t k) {
    if (outcomes.empty()) {
        throw std::invalid_argument("recall_at_k: no outcomes");
    }
    std::size_t hits = 0;
    for (const auto& o : outcomes) {
        if (o.rank && *o.rank >= 1 && *o.rank <= k) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(outcomes.size());
}

ClassificationSummary accuracy(std::span<const pipeline::Verdict> verdicts, std::span<const pipeline::Label> gold) {
    if (verdicts.size() != gold.size()) {
        throw std::invalid_argument("accuracy: " + std::to_string(verdicts.size()) + " verdicts but " +
                                    std::to_string(gold.size()) + " gold labels");
    }
    ClassificationSummary s;
    auto& c = s.confusion;
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
        if (gold[i] == pipeline::Label::NoEvidence) {
            throw std::invalid_argument("accuracy: gold labels must be True or False");
        }
        const bool truth = gold[i] == pipeline::Label::True;
        const auto& v = verdicts[i];
        if (v.error) ++c.errors;
        switch (v.label) {
            case pipeline::Label::NoEvidence: ++c.no_evidence; break;
            case pipeline::Label::True: ++(truth ? c.tp : c.fp); break;
            case pipeline::Label::False: ++(truth ? c.fn : c.tn); break;
        }
    }
    if (c.scored() > 0) {
        s.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.scored());
    }
    return s;
}

StageStats summarize(std::vector<double> samples) {
    StageStats s;
    s.samples = samples.size();
    if (samples.empty()) return s;
    std::sort(samples.begin(), samples.end());
    const auto n = samples.size();
    s.median_ms = n % 2 == 1 ? samples[n / 2] : (samples[n / 2 - 1] + samples[n / 2]) / 2.0;
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
    s.p95_ms = samples[std::max<std::size_t>(rank, 1) - 1];
    return s;
}

std::optional<long> peak_rss_kb() {
    rusage usage{};
    if (getrusage(RUSAGE_SELF, &usage) != 0 || usage.ru_maxrss <= 0) {
        return std::nullopt;
    }
    return usage.ru_maxrss;  // kilobytes on Linux
}

namespace {

nlohmann::json stage_json(const StageStats& s) {
    return {{"samples", s.samples}, {"median_ms", s.median_ms}, {"p95_ms", s.p95_ms}};
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

}  // namespace

std::string EvalReport::to_json(bool include_latency, int indent) const {
    nlohmann::json j = {
        {"mrr", mrr},
        {"recall_at_10", recall_at_10},
        {"n_claims", n_claims},
        {"accuracy", accuracy ? nlohmann::json(*accuracy) : nlohmann::json(nullptr)},
        {"confusion",
         {{"tp", confusion.tp},
          {"fp", confusion.fp},
          {"tn", confusion.tn},
          {"fn", confusion.fn},
          {"no_evidence", confusion.no_evidence},
          {"errors", confusion.errors}}},
        {"excluded", excluded},
        {"warnings", warnings},
    };
    if (include_latency) {
        j["latency"] = {{"encode", stage_json(latency.encode)},
                        {"retrieve", stage_json(latency.retrieve)},
                        {"verify", stage_json(latency.verify)},
                        {"total", stage_json(latency.total)},
                        {"peak_rss_kb", latency.peak_rss_kb ? nlohmann::json(*latency.peak_rss_kb)
                                                            : nlohmann::json("unavailable")}};
    }
    return j.dump(indent) + "\n";
}

std::string EvalReport::to_text() const {
    std::ostringstream out;
    auto row = [&](const std::string& name, const std::string& value) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%-14s %12s\n", name.c_str(), value.c_str());
        out << buf;
    };
    row("claims", std::to_string(n_claims));
    row("MRR", fmt("%.4f", mrr));
    row("Recall@10", fmt("%.4f", recall_at_10));
    row("Accuracy", accuracy ? fmt("%.4f", *accuracy) : "n/a");
    if (accuracy) {
        row("tp/fp/tn/fn", std::to_string(confusion.tp) + "/" + std::to_string(confusion.fp) + "/" +
                               std::to_string(confusion.tn) + "/" + std::to_string(confusion.fn));
        row("no_evidence", std::to_string(confusion.no_evidence));
        row("errors", std::to_string(confusion.errors));
    }
    if (excluded > 0) row("excluded", std::to_string(excluded));
    if (latency.total.samples > 0) {
        out << "\n";
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-10s %8s %12s %12s\n", "stage", "samples", "median_ms", "p95_ms");
        out << buf;
        const std::pair<const char*, const StageStats*> stages[] = {
            {"encode", &latency.encode}, {"retrieve", &latency.retrieve}, {"verify", &latency.verify},
            {"total", &latency.total}};
        for (const auto& [name, s] : stages) {
            std::snprintf(buf, sizeof(buf), "%-10s %8zu %12.4f %12.4f\n", name, s->samples, s->median_ms, s->p95_ms);
            out << buf;
        }
        out << "peak_rss_kb " << (latency.peak_rss_kb ? std::to_string(*latency.peak_rss_kb) : "unavailable") << "\n";
    }
    for (const auto& w : warnings) out << "warning: " << w << "\n";
    return out.str();
}

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << "metric,value\n";
    out << "n_claims," << n_claims << "\n";
    out << "mrr," << fmt("%.17g", mrr) << "\n";
    out << "recall_at_10," << fmt("%.17g", recall_at_10) << "\n";
    out << "accuracy," << (accuracy ? fmt("%.17g", *accuracy) : "") << "\n";
    out << "tp," << confusion.tp << "\nfp," << confusion.fp << "\ntn," << confusion.tn << "\nfn," << confusion.fn
        << "\n";
    out << "no_evidence," << confusion.no_evidence << "\nerrors," << confusion.errors << "\n";
    out << "excluded," << excluded << "\n";
    out << "median_total_ms," << fmt("%.6f", latency.total.median_ms) << "\n";
    out << "p95_total_ms," << fmt("%.6f", latency.total.p95_ms) << "\n";
    return out.str();
}

std::vector<RankingOutcome> ranking_outcomes(const encoder::Encoder& encoder, const index::EmbeddingIndex& index,
                                             std::span<const corpus::ClaimRecord> claims, std::size_t k,
                                             std::vector<std::string>* warnings) {
    std::vector<RankingOutcome> outcomes;
    std::vector<std::string> texts;
    std::vector<const corpus::ClaimRecord*> kept;
    for (const auto& c : claims) {
        if (index.position(c.gold_explanation_id) < 0) {
            if (warnings) {
                warnings->push_back("claim " + c.id + ": gold explanation " + c.gold_explanation_id +
                                    " is not in the index; excluded");
            }
            continue;
        }
        texts.push_back(c.text);
        kept.push_back(&c);
    }
    const auto embeddings = encoder.encode_batch(texts);
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const auto hits = index::query_top_k(index, embeddings[i], k);
        RankingOutcome o{kept[i]->id, kept[i]->gold_explanation_id, std::nullopt};
        for (const auto& h : hits) {
            if (h.explanation_id == o.gold_explanation_id) {
                o.rank = h.rank;
                break;
            }
        }
        outcomes.push_back(std::move(o));
    }
    return outcomes;
}

EvalReport evaluate_retrieval(const encoder::Encoder& encoder, const index::EmbeddingIndex& index,
                              std::span<const corpus::ClaimRecord> claims) {
    EvalReport r;
    const auto outcomes = ranking_outcomes(encoder, index, claims, 10, &r.warnings);
    r.excluded = claims.size() - outcomes.size();
    r.n_claims = outcomes.size();
    if (outcomes.empty()) {
        r.warnings.push_back("no claim has its gold explanation in the index");
        return r;
    }
    r.mrr = mrr(outcomes);
    r.recall_at_10 = recall_at_10(outcomes);
    return r;
}

EvalReport evaluate_pipeline(const pipeline::Pipeline& pipe, std::span<const corpus::ClaimRecord> claims) {
    EvalReport r = evaluate_retrieval(pipe.encoder(), pipe.index(), claims);

    std::vector<pipeline::Verdict> verdicts;
    std::vector<pipeline::Label> gold;
    std::vector<double> encode, retrieve, verify, total;
    std::size_t unlabeled = 0;
    for (const auto& c : claims) {
        if (pipe.index().position(c.gold_explanation_id) < 0) continue;
        if (!c.veracity) {
            ++unlabeled;
            continue;
        }
        auto v = pipe.check_claim(c.text);
        encode.push_back(v.timings.encode_ms);
        retrieve.push_back(v.timings.retrieve_ms);
        verify.push_back(v.timings.verify_ms);
        total.push_back(v.timings.encode_ms + v.timings.retrieve_ms + v.timings.verify_ms);
        verdicts.push_back(std::move(v));
        gold.push_back(*c.veracity ? pipeline::Label::True : pipeline::Label::False);
    }
    if (unlabeled > 0) {
        r.warnings.push_back(std::to_string(unlabeled) + " claim(s) without veracity labels left out of accuracy");
    }
    const auto summary = accuracy(verdicts, gold);
    r.accuracy = summary.accuracy;
    r.confusion = summary.confusion;
    r.latency.encode = summarize(std::move(encode));
    r.latency.retrieve = summarize(std::move(retrieve));
    r.latency.verify = summarize(std::move(verify));
    r.latency.total = summarize(std::move(total));
    r.latency.peak_rss_kb = peak_rss_kb();
    return r;
}

LatencySummary bench_latency(const pipeline::Pipeline& pipe, std::span<const std::string> claims,
                             std::size_t repetitions) {
    std::vector<double> encode, retrieve, verify, total;
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
        for (const auto& claim : claims) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto v = pipe.check_claim(claim);
            const auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0);
            encode.push_back(v.timings.encode_ms);
            retrieve.push_back(v.timings.retrieve_ms);
            verify.push_back(v.timings.verify_ms);
            total.push_back(elapsed.count());
        }
    }
    LatencySummary s;
    s.encode = summarize(std::move(encode));
    s.retrieve = summarize(std::move(retrieve));
    s.verify = summarize(std::move(verify));
    s.total = summarize(std::move(total));
    s.peak_rss_kb = peak_rss_kb();
    return s;
}

StageStats bench_retrieval(const index::EmbeddingIndex& index, std::span<const Eigen::VectorXd> queries,
                           std::size_t k, std::size_t repetitions) {
    std::vector<double> samples;
    samples.reserve(queries.size() * repetitions);
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
        for (const auto& q : queries) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto hits = index::query_top_k(index, q, k);
            samples.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
            if (hits.empty()) throw Error("bench_retrieval: query returned no hits");
        }
    }
    return summarize(std::move(samples));
}

}  // namespace factcheck::eval
