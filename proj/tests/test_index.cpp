#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "factcheck/index.hpp"
#include "test_util.hpp"

using namespace factcheck;
using namespace factcheck::index;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 2.0 * uniform_unit(rng) - 1.0;
    return m;
}

std::vector<std::string> numbered_ids(std::size_t n) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("x" + std::to_string(i));
    return ids;
}

// Exhaustive reference: loop-computed cosine against each stored vector,
// stable sort by (similarity desc, id asc).
std::vector<RetrievalHit> brute_force(const EmbeddingIndex& idx, const Eigen::VectorXd& q, std::size_t k) {
    std::vector<RetrievalHit> all;
    double qq = 0.0;
    for (Eigen::Index r = 0; r < q.size(); ++r) qq += q(r) * q(r);
    for (std::size_t c = 0; c < idx.size(); ++c) {
        double dot = 0.0, vv = 0.0;
        for (Eigen::Index r = 0; r < q.size(); ++r) {
            const double v = idx.vectors()(r, static_cast<Eigen::Index>(c));
            dot += v * q(r);
            vv += v * v;
        }
        const double s = (qq == 0.0 || vv == 0.0) ? 0.0 : dot / std::sqrt(qq * vv);
        all.push_back({idx.ids()[c], s, 0});
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.explanation_id < b.explanation_id;
    });
    all.resize(std::min(k, all.size()));
    for (std::size_t i = 0; i < all.size(); ++i) all[i].rank = i + 1;
    return all;
}

}  // namespace

TEST_CASE("planted evidence is ranked first") {
    const auto kb = testutil::planted_corpus(50);
    const encoder::HashedEncoder enc(300, 0);
    const auto idx = build_index(kb.explanations(), enc);
    CHECK(idx.size() == 50);
    CHECK(idx.dimension() == 300);
    CHECK(idx.encoder_identity() == enc.descriptor().identity);
    for (const auto& claim : kb.claims()) {
        const auto hits = query_top_k(idx, enc.encode(claim.text), 10);
        REQUIRE(hits.size() == 10);
        CHECK(hits[0].explanation_id == claim.gold_explanation_id);
        CHECK(hits[0].rank == 1);
        CHECK(hits[0].similarity == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("query edge cases") {
    Rng rng(2);
    const EmbeddingIndex idx(numbered_ids(5), random_matrix(4, 5, rng), "test");
    SUBCASE("zero query scores zero everywhere and ties fall back to id order") {
        const auto hits = query_top_k(idx, Eigen::VectorXd::Zero(4), 3);
        REQUIRE(hits.size() == 3);
        for (const auto& h : hits) CHECK(h.similarity == 0.0);
        CHECK(hits[0].explanation_id == "x0");
        CHECK(hits[1].explanation_id == "x1");
        CHECK(hits[2].explanation_id == "x2");
    }
    SUBCASE("k larger than the index returns everything") {
        CHECK(query_top_k(idx, Eigen::VectorXd::Ones(4), 10).size() == 5);
        CHECK(query_top_k(idx, Eigen::VectorXd::Ones(4), 0).empty());
    }
    SUBCASE("dimension mismatch") {
        CHECK_THROWS_AS(query_top_k(idx, Eigen::VectorXd::Ones(3), 2), std::invalid_argument);
    }
    SUBCASE("empty index") {
        const EmbeddingIndex empty(std::vector<std::string>{}, Eigen::MatrixXd(4, 0), "test");
        CHECK_THROWS_WITH_AS(query_top_k(empty, Eigen::VectorXd::Ones(4), 2), "query_top_k: empty index", Error);
    }
    SUBCASE("identical vectors tie-break by id") {
        Eigen::MatrixXd m(2, 3);
        m << 1, 0, 1, 0, 1, 0;
        const EmbeddingIndex tied({"b", "c", "a"}, m, "test");
        const auto hits = query_top_k(tied, Eigen::Vector2d(1, 0), 3);
        CHECK(hits[0].explanation_id == "a");
        CHECK(hits[1].explanation_id == "b");
        CHECK(hits[2].explanation_id == "c");
    }
    SUBCASE("duplicate ids are rejected") {
        CHECK_THROWS_AS(EmbeddingIndex({"a", "a"}, Eigen::MatrixXd::Ones(2, 2), "test"), Error);
    }
}

TEST_CASE("top-k agrees with a brute-force scan") {
    Rng rng(31);
    for (int trial = 0; trial < 40; ++trial) {
        const auto n = static_cast<std::size_t>(1 + uniform_index(rng, 1000));
        const auto dim = static_cast<Eigen::Index>(1 + uniform_index(rng, 24));
        const auto k = static_cast<std::size_t>(uniform_index(rng, 15));
        const EmbeddingIndex idx(numbered_ids(n), random_matrix(dim, static_cast<Eigen::Index>(n), rng), "test");
        const Eigen::VectorXd q = random_matrix(dim, 1, rng);
        const auto got = query_top_k(idx, q, k);
        const auto want = brute_force(idx, q, k);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].explanation_id == want[i].explanation_id);
            CHECK(got[i].rank == want[i].rank);
            CHECK(std::abs(got[i].similarity - want[i].similarity) <= 1e-12);
        }
    }
}

TEST_CASE("rankings ignore vector scale") {
    Rng rng(4);
    const auto m = random_matrix(16, 200, rng);
    Eigen::MatrixXd scaled = m;
    for (Eigen::Index c = 0; c < scaled.cols(); ++c) scaled.col(c) *= 0.01 + 100.0 * uniform_unit(rng);
    const EmbeddingIndex a(numbered_ids(200), m, "test");
    const EmbeddingIndex b(numbered_ids(200), scaled, "test");
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::VectorXd q = random_matrix(16, 1, rng);
        const auto ha = query_top_k(a, q, 10);
        const auto hb = query_top_k(b, 7.5 * q, 10);
        REQUIRE(ha.size() == hb.size());
        for (std::size_t i = 0; i < ha.size(); ++i) {
            CHECK(ha[i].explanation_id == hb[i].explanation_id);
            CHECK(std::abs(ha[i].similarity - hb[i].similarity) <= 1e-6);
        }
    }
}

TEST_CASE("persistence") {
    testutil::TempDir dir;
    Rng rng(8);
    const EmbeddingIndex idx(numbered_ids(30), random_matrix(12, 30, rng), "hashed:d=12:seed=0");

    SUBCASE("round trip is bit-identical") {
        idx.save(dir.file("i.fcix"));
        const auto back = EmbeddingIndex::load(dir.file("i.fcix"));
        CHECK(back.ids() == idx.ids());
        CHECK(back.encoder_identity() == idx.encoder_identity());
        CHECK(back.vectors() == idx.vectors());
        for (int trial = 0; trial < 10; ++trial) {
            const Eigen::VectorXd q = random_matrix(12, 1, rng);
            CHECK(query_top_k(back, q, 10) == query_top_k(idx, q, 10));
        }
        CHECK(back.serialize() == idx.serialize());
    }
    SUBCASE("layout") {
        const auto bytes = idx.serialize();
        CHECK(bytes.substr(0, 4) == "FCIX");
        std::size_t expected = 4 + 2 + 4 + 4 + 4 + idx.encoder_identity().size();
        for (const auto& id : idx.ids()) expected += 4 + id.size();
        expected += 4 * 12 * 30;
        CHECK(bytes.size() == expected);
    }
    SUBCASE("rebuilding from the same corpus is byte-identical") {
        const auto kb = testutil::planted_corpus(20, false);
        const encoder::HashedEncoder enc(64, 3);
        CHECK(build_index(kb.explanations(), enc).serialize() == build_index(kb.explanations(), enc).serialize());
    }
    SUBCASE("corrupt files") {
        auto bytes = idx.serialize();
        CHECK_THROWS_AS(EmbeddingIndex::deserialize(bytes.substr(0, bytes.size() - 1)), Error);
        CHECK_THROWS_AS(EmbeddingIndex::deserialize(bytes + "z"), Error);
        CHECK_THROWS_AS(EmbeddingIndex::deserialize("FCI"), Error);
        bytes[0] = 'Q';
        CHECK_THROWS_AS(EmbeddingIndex::deserialize(bytes), Error);
        CHECK_THROWS_AS(EmbeddingIndex::load(dir.file("missing.fcix")), Error);
    }
}

TEST_CASE("threshold calibration") {
    SUBCASE("mean minus population standard deviation") {
        const std::vector<double> s{0.9, 0.7};
        const auto t = threshold_from_similarities(s);
        CHECK(t.t == 0.7);
        CHECK(t.mean == doctest::Approx(0.8).epsilon(1e-15));
        CHECK(t.std == doctest::Approx(0.1).epsilon(1e-14));
        CHECK(t.n_calibration == 2);

        const std::vector<double> r{0.2, 0.4, 0.9, 0.5};
        const double mean = (0.2 + 0.4 + 0.9 + 0.5) / 4.0;
        double var = 0.0;
        for (double v : r) var += (v - mean) * (v - mean);
        CHECK(threshold_from_similarities(r).t == doctest::Approx(mean - std::sqrt(var / 4.0)).epsilon(1e-15));
    }
    SUBCASE("needs at least two pairs") {
        const std::vector<double> one{0.5};
        CHECK_THROWS_WITH_AS(threshold_from_similarities(one), doctest::Contains("insufficient calibration data"),
                             Error);
        CHECK_THROWS_AS(threshold_from_similarities({}), Error);
    }
    SUBCASE("calibrating against an index") {
        const auto kb = testutil::planted_corpus(10, false);
        const encoder::HashedEncoder enc(128, 0);
        const auto idx = build_index(kb.explanations(), enc);
        std::vector<CalibrationPair> pairs;
        std::vector<double> sims;
        for (const auto& c : kb.claims()) {
            pairs.push_back({c.text, c.gold_explanation_id});
            sims.push_back(idx.similarities(enc.encode(c.text))(idx.position(c.gold_explanation_id)));
        }
        const auto t = calibrate_threshold(idx, enc, pairs);
        CHECK(t.t == doctest::Approx(threshold_from_similarities(sims).t).epsilon(1e-15));
        CHECK(t.n_calibration == 10);
    }
}

TEST_CASE("filter_hits is strict and keeps order") {
    const std::vector<RetrievalHit> hits{{"a", 0.9, 1}, {"b", 0.7, 2}, {"c", 0.5, 3}};
    Threshold t;
    t.t = 0.7;
    const auto kept = filter_hits(hits, t);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].explanation_id == "a");
    t.t = 0.95;
    CHECK(filter_hits(hits, t).empty());
    t.t = -1.0;
    CHECK(filter_hits(hits, t).size() == 3);
}
