#include "factcheck/encoder.hpp"

#include <charconv>
#include <fstream>

// Eigen's sparse module must precede httplib.h: <resolv.h> defines a `_res`
// macro that collides with Eigen internals.
#include "factcheck/featurizer.hpp"

#include <httplib.h>
#include <json.hpp>

namespace factcheck::encoder {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class SemaphoreGuard {
public:
    explicit SemaphoreGuard(std::counting_semaphore<>& s) : s_(s) { s_.acquire(); }
    ~SemaphoreGuard() { s_.release(); }
    SemaphoreGuard(const SemaphoreGuard&) = delete;
    SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

private:
    std::counting_semaphore<>& s_;
};

}  // namespace

std::string_view kind_name(EncoderKind kind) {
    switch (kind) {
        case EncoderKind::WordVectors: return "word_vectors";
        case EncoderKind::Hashed: return "hashed";
        case EncoderKind::External: return "external";
    }
    return "unknown";
}

std::vector<Embedding> Encoder::encode_batch(std::span<const std::string> texts) const {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        try {
            out.push_back(encode(texts[i]));
        } catch (const std::exception& e) {
            throw Error("encode_batch: text " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

// --- word vectors -----------------------------------------------------------

WordVectorEncoder::WordVectorEncoder(std::unordered_map<std::string, Eigen::VectorXd> table,
                                     Eigen::Index dimension, std::string identity)
    : table_(std::move(table)), dimension_(dimension), identity_(std::move(identity)) {}

const Eigen::VectorXd* WordVectorEncoder::lookup(std::string_view token) const {
    auto it = table_.find(std::string(token));
    return it == table_.end() ? nullptr : &it->second;
}

Embedding WordVectorEncoder::encode(std::string_view text) const {
    struct Lookup {
        const WordVectorEncoder& self;
        bool known(std::string_view t) const { return self.lookup(t) != nullptr; }
        const Eigen::VectorXd& vector(std::string_view t) const { return *self.lookup(t); }
    };
    const auto tokens = features::tokenize(text);
    return mean_pool(tokens, dimension_, Lookup{*this});
}

EncoderDescriptor WordVectorEncoder::descriptor() const {
    return {EncoderKind::WordVectors, dimension_, identity_};
}

std::shared_ptr<WordVectorEncoder> load_word_vectors(const std::string& path, Eigen::Index expected_dimension) {
    const std::string contents = read_file(path);
    std::unordered_map<std::string, Eigen::VectorXd> table;
    Eigen::Index dim = expected_dimension;
    std::size_t line_no = 0;
    std::size_t start = 0;
    std::vector<double> values;
    while (start < contents.size()) {
        auto end = contents.find('\n', start);
        if (end == std::string::npos) end = contents.size();
        std::string_view line(contents.data() + start, end - start);
        start = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

        auto next_field = [&line]() -> std::string_view {
            const auto b = line.find_first_not_of(" \t");
            if (b == std::string_view::npos) {
                line = {};
                return {};
            }
            auto e = line.find_first_of(" \t", b);
            if (e == std::string_view::npos) e = line.size();
            auto f = line.substr(b, e - b);
            line.remove_prefix(e);
            return f;
        };
        const std::string token(next_field());
        values.clear();
        for (auto f = next_field(); !f.empty(); f = next_field()) {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
                throw Error(path + ": line " + std::to_string(line_no) + ": cannot parse component \"" +
                            std::string(f) + "\"");
            }
            values.push_back(v);
        }
        if (dim == 0) dim = static_cast<Eigen::Index>(values.size());
        if (static_cast<Eigen::Index>(values.size()) != dim || dim == 0) {
            throw Error(path + ": line " + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                        " components, found " + std::to_string(values.size()));
        }
        table.insert_or_assign(token, Eigen::Map<const Eigen::VectorXd>(values.data(), dim));
    }
    if (table.empty()) {
        throw Error(path + ": no word vectors found");
    }
    const auto identity = "wordvec:" + hex64(fnv1a64(contents));
    return std::make_shared<WordVectorEncoder>(std::move(table), dim, identity);
}

// --- hashed -----------------------------------------------------------------

HashedEncoder::HashedEncoder(Eigen::Index dimension, std::uint64_t seed) : dimension_(dimension), seed_(seed) {
    if (dimension <= 0) {
        throw std::invalid_argument("HashedEncoder: dimension must be positive");
    }
}

Eigen::VectorXd HashedEncoder::token_vector(std::string_view token) const {
    std::uint64_t state = fnv1a64(token) ^ (seed_ * 0x9e3779b97f4a7c15ULL);
    Eigen::VectorXd v(dimension_);
    double sq = 0.0;
    do {
        for (Eigen::Index i = 0; i < dimension_; ++i) {
            v(i) = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-52 - 1.0;
        }
        sq = v.squaredNorm();
    } while (sq == 0.0);
    return v / std::sqrt(sq);
}

Embedding HashedEncoder::encode(std::string_view text) const {
    struct Lookup {
        const HashedEncoder& self;
        bool known(std::string_view) const { return true; }
        Eigen::VectorXd vector(std::string_view t) const { return self.token_vector(t); }
    };
    const auto tokens = features::tokenize(text);
    return mean_pool(tokens, dimension_, Lookup{*this});
}

EncoderDescriptor HashedEncoder::descriptor() const {
    return {EncoderKind::Hashed, dimension_,
            "hashed:d=" + std::to_string(dimension_) + ":seed=" + std::to_string(seed_)};
}

// --- external ---------------------------------------------------------------

ExternalClient::ExternalClient(ExternalOptions options)
    : options_(std::move(options)),
      in_flight_(std::make_unique<std::counting_semaphore<>>(std::max<std::ptrdiff_t>(1, options_.max_in_flight))) {
    if (options_.endpoint.empty()) {
        throw std::invalid_argument("ExternalClient: endpoint required");
    }
}

ExternalClient::~ExternalClient() = default;

namespace {

httplib::Client make_client(const ExternalOptions& o) {
    httplib::Client cli(o.endpoint);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(o.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(o.timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());
    return cli;
}

std::string describe_failure(const httplib::Result& res) {
    if (!res) {
        return "request failed: " + httplib::to_string(res.error());
    }
    std::string msg = "HTTP " + std::to_string(res->status);
    auto j = json::parse(res->body, nullptr, false);
    if (j.is_object() && j.contains("error") && j["error"].is_string()) {
        msg += ": " + j["error"].get<std::string>();
    }
    return msg;
}

json parse_response(const std::string& body, const std::string& what) {
    auto j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw Error(what + ": malformed response body");
    }
    return j;
}

}  // namespace

std::string ExternalClient::post(const std::string& path, const std::string& body) const {
    SemaphoreGuard guard(*in_flight_);
    auto cli = make_client(options_);
    auto res = cli.Post(path, body, "application/json");
    if (!res || res->status != 200) {
        throw Error("external " + path + ": " + describe_failure(res));
    }
    return res->body;
}

std::vector<Embedding> ExternalClient::embed(std::span<const std::string> texts) const {
    if (texts.empty()) return {};
    const auto j = parse_response(post("/embed", json{{"texts", texts}}.dump()), "/embed");
    if (!j.contains("dim") || !j["dim"].is_number_integer() || !j.contains("vectors") || !j["vectors"].is_array()) {
        throw Error("/embed: response missing \"dim\" or \"vectors\"");
    }
    const auto dim = j["dim"].get<Eigen::Index>();
    const auto& vectors = j["vectors"];
    if (dim <= 0 || vectors.size() != texts.size()) {
        throw Error("/embed: expected " + std::to_string(texts.size()) + " vectors of positive width");
    }
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& v : vectors) {
        if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != dim) {
            throw Error("/embed: vector length does not match dim " + std::to_string(dim));
        }
        Embedding e(dim);
        for (Eigen::Index i = 0; i < dim; ++i) {
            const auto& x = v[static_cast<std::size_t>(i)];
            if (!x.is_number() || !std::isfinite(x.get<double>())) {
                throw Error("/embed: non-finite or non-numeric component");
            }
            e(i) = x.get<double>();
        }
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<double> ExternalClient::classify(std::span<const std::pair<std::string, std::string>> pairs) const {
    if (pairs.empty()) return {};
    json body = json::array();
    for (const auto& [claim, explanation] : pairs) body.push_back({claim, explanation});
    const auto j = parse_response(post("/classify", json{{"pairs", body}}.dump()), "/classify");
    if (!j.contains("probs") || !j["probs"].is_array() || j["probs"].size() != pairs.size()) {
        throw Error("/classify: expected " + std::to_string(pairs.size()) + " probabilities");
    }
    std::vector<double> out;
    for (const auto& p : j["probs"]) {
        if (!p.is_number()) throw Error("/classify: non-numeric probability");
        const double v = p.get<double>();
        if (!(v >= 0.0 && v <= 1.0)) throw Error("/classify: probability outside [0, 1]");
        out.push_back(v);
    }
    return out;
}

std::string ExternalClient::health() const {
    SemaphoreGuard guard(*in_flight_);
    auto cli = make_client(options_);
    auto res = cli.Get("/health");
    if (!res || res->status != 200) {
        throw Error("external /health: " + describe_failure(res));
    }
    const auto j = parse_response(res->body, "/health");
    if (j.value("status", "") != "ok") {
        throw Error("external /health: status is not ok");
    }
    return j.value("model", "");
}

ExternalEncoder::ExternalEncoder(std::shared_ptr<const ExternalClient> client, Eigen::Index dimension)
    : client_(std::move(client)), dimension_(dimension) {}

Embedding ExternalEncoder::encode(std::string_view text) const {
    const std::string t(text);
    return std::move(encode_batch(std::span<const std::string>(&t, 1)).front());
}

std::vector<Embedding> ExternalEncoder::encode_batch(std::span<const std::string> texts) const {
    auto out = client_->embed(texts);
    if (out.empty()) return out;
    Eigen::Index expected = 0;
    const Eigen::Index got = out.front().size();
    if (!dimension_.compare_exchange_strong(expected, got) && expected != got) {
        throw Error("external encoder changed dimension from " + std::to_string(expected) + " to " +
                    std::to_string(got));
    }
    return out;
}

EncoderDescriptor ExternalEncoder::descriptor() const {
    if (dimension_.load() == 0) {
        encode("dimension probe");
    }
    return {EncoderKind::External, dimension_.load(), "external:" + client_->options().endpoint};
}

}  // namespace factcheck::encoder
