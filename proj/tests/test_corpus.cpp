#include <doctest.h>

#include <algorithm>
#include <set>

#include "factcheck/corpus.hpp"
#include "test_util.hpp"

using namespace factcheck;
using namespace factcheck::corpus;
using testutil::ymd;

namespace {

std::string expl_line(const std::string& id, const std::string& text) {
    return R"({"kind":"explanation","id":")" + id + R"(","text":")" + text + "\"}\n";
}

std::string claim_line(const std::string& id, const std::string& text, const std::string& gold,
                       const std::string& date, const char* veracity = "false") {
    return R"({"kind":"claim","id":")" + id + R"(","text":")" + text + R"(","gold_explanation_id":")" + gold +
           R"(","date":")" + date + R"(","veracity":)" + veracity + "}\n";
}

Corpus dated_corpus(std::size_t train_n, std::size_t test_n, std::size_t gap_n = 0) {
    std::vector<ExplanationRecord> ex{{"e0", "vaccines do not alter dna", std::nullopt, ""},
                                      {"e1", "masks reduce transmission", std::nullopt, ""}};
    std::vector<ClaimRecord> cl;
    std::size_t id = 0;
    auto add = [&](std::size_t n, Date d) {
        for (std::size_t i = 0; i < n; ++i, ++id) {
            cl.push_back({"c" + std::to_string(id), "claim " + std::to_string(id), id % 2 == 0,
                          "e" + std::to_string(id % 2), d, ""});
        }
    };
    add(train_n, ymd(2020, 3, 10));
    add(test_n, ymd(2020, 6, 1));
    add(gap_n, ymd(2020, 5, 16));
    return Corpus(ex, cl);
}

}  // namespace

TEST_CASE("load_corpus resolves references and reports counts") {
    testutil::TempDir dir;
    const auto path = dir.write("kb.jsonl", expl_line("e1", "Garlic does not cure COVID-19.") +
                                                "\n" +  // blank lines are skipped
                                                claim_line("c1", "Garlic cures COVID-19", "e1", "2020-03-02") +
                                                claim_line("c2", "Garlic does not cure it", "e1", "2020-03-02", "true"));
    const auto kb = load_corpus(path);
    CHECK(kb.explanations().size() == 1);
    CHECK(kb.claims().size() == 2);
    CHECK(kb.gold_of(kb.claims()[0]).text == "Garlic does not cure COVID-19.");
    CHECK(kb.claims()[1].veracity == true);
    CHECK(kb.claims()[0].date == ymd(2020, 3, 2));
}

TEST_CASE("load_corpus error paths") {
    SUBCASE("empty file") {
        CHECK_THROWS_WITH_AS(parse_corpus_jsonl(""), "empty corpus", CorpusError);
        CHECK_THROWS_WITH_AS(parse_corpus_jsonl("\n  \n"), "empty corpus", CorpusError);
    }
    SUBCASE("duplicate id is named with its line") {
        const auto text = expl_line("e1", "a") + expl_line("e2", "b") + expl_line("e1", "c");
        try {
            parse_corpus_jsonl(text);
            FAIL("expected CorpusError");
        } catch (const CorpusError& e) {
            CHECK(e.line() == 3);
            CHECK(std::string(e.what()).find("duplicate id e1") != std::string::npos);
        }
    }
    SUBCASE("malformed line reports its number") {
        const auto text = expl_line("e1", "a") + "{not json\n";
        try {
            parse_corpus_jsonl(text);
            FAIL("expected CorpusError");
        } catch (const CorpusError& e) {
            CHECK(e.line() == 2);
        }
    }
    SUBCASE("dangling gold explanation") {
        const auto text = expl_line("e1", "a") + claim_line("c1", "x", "e9", "2020-03-01");
        CHECK_THROWS_WITH_AS(parse_corpus_jsonl(text), doctest::Contains("dangling gold_explanation_id e9"),
                             CorpusError);
    }
    SUBCASE("bad date and empty text") {
        CHECK_THROWS_AS(parse_corpus_jsonl(expl_line("e1", "a") + claim_line("c1", "x", "e1", "2020-02-30")),
                        CorpusError);
        CHECK_THROWS_AS(parse_corpus_jsonl(expl_line("e1", "   ")), CorpusError);
    }
}

TEST_CASE("CSV importer expands rows into one explanation and two claims") {
    const std::string csv =
        "false_claim,true_claim,explanation,date,source\n"
        "\"Drinking bleach, they say, cures it\",Bleach is poisonous,\"Bleach is toxic; \"\"never\"\" drink it\","
        "2020-04-01,poynter\r\n"
        "5G spreads the virus,,Radio waves cannot carry viruses,2020-06-02,\n";
    const auto kb = parse_corpus_csv(csv);
    REQUIRE(kb.explanations().size() == 2);
    REQUIRE(kb.claims().size() == 3);
    CHECK(kb.explanations()[0].text == "Bleach is toxic; \"never\" drink it");
    CHECK(kb.claims()[0].id == "c1f");
    CHECK(kb.claims()[0].text == "Drinking bleach, they say, cures it");
    CHECK(kb.claims()[0].veracity == false);
    CHECK(kb.claims()[1].id == "c1t");
    CHECK(kb.claims()[1].veracity == true);
    CHECK(kb.claims()[2].gold_explanation_id == "e2");

    // The JSONL writer and reader agree on the normalized form.
    const auto again = parse_corpus_jsonl(kb.to_jsonl());
    CHECK(again.to_jsonl() == kb.to_jsonl());
}

TEST_CASE("5500 false-claim rows load as 5500 claim/explanation pairs") {
    std::string csv = "false_claim,true_claim,explanation,date,source\n";
    for (int i = 0; i < 5500; ++i) {
        csv += "false claim " + std::to_string(i) + ",,explanation " + std::to_string(i) + ",2020-04-01,\n";
    }
    const auto kb = parse_corpus_csv(csv);
    CHECK(kb.explanations().size() == 5500);
    CHECK(kb.claims().size() == 5500);
}

TEST_CASE("temporal_split") {
    SUBCASE("train and test periods") {
        const auto kb = dated_corpus(1000, 200);
        const auto s = temporal_split(kb, ymd(2020, 5, 15), ymd(2020, 5, 18), 0.0, 1);
        CHECK(s.train.size() == 1000);
        CHECK(s.validation.empty());
        CHECK(s.test.size() == 200);
    }
    SUBCASE("records in the gap are excluded and reported") {
        const auto kb = dated_corpus(10, 5, 3);
        const auto s = temporal_split(kb, ymd(2020, 5, 15), ymd(2020, 5, 18), 0.0, 1);
        CHECK(s.train.size() == 10);
        CHECK(s.test.size() == 5);
        CHECK(s.excluded_ids.size() == 3);
        CHECK_FALSE(s.warnings.empty());
    }
    SUBCASE("every record outside both periods gives an empty split with a warning") {
        const auto kb = dated_corpus(0, 0, 4);
        const auto s = temporal_split(kb, ymd(2020, 5, 15), ymd(2020, 5, 18), 0.1, 1);
        CHECK(s.train.empty());
        CHECK(s.test.empty());
        CHECK(s.warnings.size() == 2);
    }
    SUBCASE("seeded validation sample is stable") {
        const auto kb = dated_corpus(10, 0);
        const auto a = temporal_split(kb, ymd(2020, 5, 15), ymd(2020, 5, 18), 0.2, 99);
        const auto b = temporal_split(kb, ymd(2020, 5, 15), ymd(2020, 5, 18), 0.2, 99);
        REQUIRE(a.validation.size() == 2);
        CHECK(a.validation[0].id == b.validation[0].id);
        CHECK(a.validation[1].id == b.validation[1].id);
        CHECK(a.train.size() == 8);
    }
    SUBCASE("preconditions") {
        const auto kb = dated_corpus(2, 0);
        CHECK_THROWS_AS(temporal_split(kb, ymd(2020, 5, 18), ymd(2020, 5, 15), 0.1, 0), std::invalid_argument);
        CHECK_THROWS_AS(temporal_split(kb, ymd(2020, 5, 15), ymd(2020, 5, 18), 0.6, 0), std::invalid_argument);
    }
    SUBCASE("partitions are disjoint and respect the cutoffs for any seed") {
        const auto kb = dated_corpus(40, 20, 5);
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto s = temporal_split(kb, ymd(2020, 5, 15), ymd(2020, 5, 18), 0.25, seed);
            std::set<std::string> ids;
            for (const auto* part : {&s.train, &s.validation, &s.test}) {
                for (const auto& c : *part) CHECK(ids.insert(c.id).second);
            }
            for (const auto& c : s.train) CHECK(c.date <= s.cutoff_train_end);
            for (const auto& c : s.validation) CHECK(c.date <= s.cutoff_train_end);
            for (const auto& c : s.test) CHECK(c.date >= s.cutoff_test_start);
            CHECK(s.validation.size() == 10);
        }
    }
    SUBCASE("split file round trip") {
        const auto kb = dated_corpus(10, 4);
        const auto s = temporal_split(kb, ymd(2020, 5, 15), ymd(2020, 5, 18), 0.2, 3);
        const auto back = split_from_json(kb, split_to_json(s));
        CHECK(split_to_json(back) == split_to_json(s));
    }
}

TEST_CASE("generate_stage_a_pairs") {
    SUBCASE("5000 positives at ratio 1 give 10000 balanced pairs") {
        const auto kb = dated_corpus(5000, 0);
        const auto pairs = generate_stage_a_pairs(kb, kb.claims(), 5);
        CHECK(pairs.size() == 10000);
        const auto positives = std::count_if(pairs.begin(), pairs.end(), [](const auto& p) { return p.label == 1; });
        CHECK(positives == 5000);
    }
    SUBCASE("ratio 0 yields positives only") {
        const auto kb = testutil::planted_corpus(6);
        const auto pairs = generate_stage_a_pairs(kb, kb.claims(), 5, 0);
        CHECK(pairs.size() == 6);
        CHECK(std::all_of(pairs.begin(), pairs.end(), [](const auto& p) { return p.label == 1; }));
    }
    SUBCASE("3 claims, 3 explanations, seed 7: reproducible and never the gold") {
        const auto kb = testutil::planted_corpus(3, false);
        const auto a = generate_stage_a_pairs(kb, kb.claims(), 7);
        const auto b = generate_stage_a_pairs(kb, kb.claims(), 7);
        CHECK(a == b);
        REQUIRE(a.size() == 6);
        // Enumerate: each claim appears once with its gold and once with one of
        // the two other explanations.
        for (const auto& claim : kb.claims()) {
            int pos = 0, neg = 0;
            for (const auto& p : a) {
                if (p.claim_text != claim.text) continue;
                const bool gold = p.explanation_text == kb.gold_of(claim).text;
                CHECK(gold == (p.label == 1));
                (p.label == 1 ? pos : neg)++;
            }
            CHECK(pos == 1);
            CHECK(neg == 1);
        }
    }
    SUBCASE("negatives never pair a claim with its gold across seeds and ratios") {
        const auto kb = testutil::planted_corpus(5, false);
        for (std::uint64_t seed = 0; seed < 25; ++seed) {
            for (const auto& p : generate_stage_a_pairs(kb, kb.claims(), seed, 3)) {
                if (p.label == 0) {
                    const auto& claim = *std::find_if(kb.claims().begin(), kb.claims().end(),
                                                      [&](const auto& c) { return c.text == p.claim_text; });
                    CHECK(p.explanation_text != kb.gold_of(claim).text);
                }
            }
        }
    }
    SUBCASE("a single explanation cannot produce negatives") {
        const auto kb = testutil::planted_corpus(1);
        CHECK_THROWS_AS(generate_stage_a_pairs(kb, kb.claims(), 1), CorpusError);
        CHECK(generate_stage_a_pairs(kb, kb.claims(), 1, 0).size() == 1);
    }
}

TEST_CASE("generate_stage_b_pairs") {
    SUBCASE("one pair per labelled claim") {
        const auto kb = dated_corpus(800, 0);
        const auto out = generate_stage_b_pairs(kb, kb.claims());
        CHECK(out.pairs.size() == 800);
        CHECK(out.warnings.empty());
    }
    SUBCASE("veracity maps to the label; balanced fixture has mean 0.5") {
        const auto kb = testutil::planted_corpus(8);
        const auto out = generate_stage_b_pairs(kb, kb.claims());
        double sum = 0;
        for (std::size_t i = 0; i < out.pairs.size(); ++i) {
            CHECK(out.pairs[i].label == (*kb.claims()[i].veracity ? 1 : 0));
            CHECK(out.pairs[i].stage == Stage::B);
            sum += out.pairs[i].label;
        }
        CHECK(sum / 8.0 == 0.5);
    }
    SUBCASE("claims without veracity are skipped with a warning") {
        std::vector<ExplanationRecord> ex{{"e0", "text", std::nullopt, ""}};
        std::vector<ClaimRecord> cl{{"c0", "a", true, "e0", ymd(2020, 3, 1), ""},
                                    {"c1", "b", std::nullopt, "e0", ymd(2020, 3, 1), ""}};
        const Corpus kb(ex, cl);
        const auto out = generate_stage_b_pairs(kb, kb.claims());
        CHECK(out.pairs.size() == 1);
        CHECK(out.warnings.size() == 1);
    }
}
