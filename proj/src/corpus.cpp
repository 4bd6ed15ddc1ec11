#include "factcheck/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <json.hpp>

namespace factcheck::corpus {

using nlohmann::json;

namespace {

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

std::vector<std::string_view> split_lines(std::string_view contents) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= contents.size()) {
        auto end = contents.find('\n', start);
        if (end == std::string_view::npos) {
            end = contents.size();
        }
        auto line = contents.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        lines.push_back(line);
        start = end + 1;
    }
    return lines;
}

std::string required_string(const json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) {
        throw CorpusError(std::string("missing or non-string field \"") + key + "\"", line);
    }
    return it->get<std::string>();
}

std::string optional_string(const json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        return {};
    }
    if (!it->is_string()) {
        throw CorpusError(std::string("field \"") + key + "\" must be a string", line);
    }
    return it->get<std::string>();
}

Date required_date(const std::string& text, std::size_t line) {
    auto d = parse_date(text);
    if (!d) {
        throw CorpusError("invalid date \"" + text + "\" (expected YYYY-MM-DD)", line);
    }
    return *d;
}

// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF rows.
std::vector<std::vector<std::string>> parse_csv_rows(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        any = true;
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
                ++i;
            }
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
            any = false;
        } else {
            field.push_back(c);
        }
    }
    if (quoted) {
        throw CorpusError("unterminated quoted CSV field");
    }
    if (any) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string trim(std::string s) {
    auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && ws(static_cast<unsigned char>(s.back()))) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && ws(static_cast<unsigned char>(s[i]))) ++i;
    return s.substr(i);
}

}  // namespace

Corpus::Corpus(std::vector<ExplanationRecord> explanations, std::vector<ClaimRecord> claims)
    : explanations_(std::move(explanations)), claims_(std::move(claims)) {
    if (explanations_.empty() && claims_.empty()) {
        throw CorpusError("empty corpus");
    }
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < explanations_.size(); ++i) {
        const auto& e = explanations_[i];
        if (blank(e.text)) {
            throw CorpusError("explanation " + e.id + " has empty text");
        }
        if (!seen.insert(e.id).second) {
            throw CorpusError("duplicate id " + e.id);
        }
        explanation_pos_.emplace(e.id, i);
    }
    for (const auto& c : claims_) {
        if (blank(c.text)) {
            throw CorpusError("claim " + c.id + " has empty text");
        }
        if (!seen.insert(c.id).second) {
            throw CorpusError("duplicate id " + c.id);
        }
        if (!explanation_pos_.contains(c.gold_explanation_id)) {
            throw CorpusError("claim " + c.id + " references unknown explanation " +
                              c.gold_explanation_id);
        }
    }
}

const ExplanationRecord* Corpus::find_explanation(std::string_view id) const {
    auto it = explanation_pos_.find(std::string(id));
    return it == explanation_pos_.end() ? nullptr : &explanations_[it->second];
}

const ExplanationRecord& Corpus::gold_of(const ClaimRecord& claim) const {
    const auto* e = find_explanation(claim.gold_explanation_id);
    if (e == nullptr) {
        throw CorpusError("claim " + claim.id + " references unknown explanation " +
                          claim.gold_explanation_id);
    }
    return *e;
}

std::string Corpus::to_jsonl() const {
    std::string out;
    for (const auto& e : explanations_) {
        json j = {{"kind", "explanation"}, {"id", e.id}, {"text", e.text}};
        if (e.date) j["date"] = format_date(*e.date);
        if (!e.source.empty()) j["source"] = e.source;
        out += j.dump();
        out += '\n';
    }
    for (const auto& c : claims_) {
        json j = {{"kind", "claim"}, {"id", c.id}, {"text", c.text},
                  {"gold_explanation_id", c.gold_explanation_id}, {"date", format_date(c.date)}};
        if (c.veracity) j["veracity"] = *c.veracity;
        if (!c.source.empty()) j["source"] = c.source;
        out += j.dump();
        out += '\n';
    }
    return out;
}

Corpus parse_corpus_jsonl(std::string_view contents) {
    std::vector<ExplanationRecord> explanations;
    std::vector<ClaimRecord> claims;
    std::unordered_map<std::string, std::size_t> first_line;
    std::vector<std::pair<std::string, std::size_t>> references;

    const auto lines = split_lines(contents);
    for (std::size_t n = 0; n < lines.size(); ++n) {
        const std::size_t line_no = n + 1;
        if (blank(lines[n])) {
            continue;
        }
        json obj;
        try {
            obj = json::parse(lines[n]);
        } catch (const json::parse_error& e) {
            throw CorpusError(std::string("malformed JSON: ") + e.what(), line_no);
        }
        if (!obj.is_object()) {
            throw CorpusError("record is not a JSON object", line_no);
        }
        const auto kind = required_string(obj, "kind", line_no);
        auto id = required_string(obj, "id", line_no);
        if (id.empty()) {
            throw CorpusError("empty id", line_no);
        }
        auto text = required_string(obj, "text", line_no);
        if (blank(text)) {
            throw CorpusError("empty text for id " + id, line_no);
        }
        if (auto [it, inserted] = first_line.emplace(id, line_no); !inserted) {
            throw CorpusError("duplicate id " + id + " (first seen on line " +
                                  std::to_string(it->second) + ")",
                              line_no);
        }
        if (kind == "explanation") {
            ExplanationRecord e{std::move(id), std::move(text), std::nullopt,
                                optional_string(obj, "source", line_no)};
            if (auto d = optional_string(obj, "date", line_no); !d.empty()) {
                e.date = required_date(d, line_no);
            }
            explanations.push_back(std::move(e));
        } else if (kind == "claim") {
            ClaimRecord c;
            c.id = std::move(id);
            c.text = std::move(text);
            c.gold_explanation_id = required_string(obj, "gold_explanation_id", line_no);
            c.date = required_date(required_string(obj, "date", line_no), line_no);
            c.source = optional_string(obj, "source", line_no);
            if (auto it = obj.find("veracity"); it != obj.end() && !it->is_null()) {
                if (!it->is_boolean()) {
                    throw CorpusError("field \"veracity\" must be true or false", line_no);
                }
                c.veracity = it->get<bool>();
            }
            references.emplace_back(c.gold_explanation_id, line_no);
            claims.push_back(std::move(c));
        } else {
            throw CorpusError("unknown kind \"" + kind + "\"", line_no);
        }
    }
    if (explanations.empty() && claims.empty()) {
        throw CorpusError("empty corpus");
    }
    std::unordered_set<std::string> explanation_ids;
    for (const auto& e : explanations) explanation_ids.insert(e.id);
    for (const auto& [ref, line_no] : references) {
        if (!explanation_ids.contains(ref)) {
            throw CorpusError("dangling gold_explanation_id " + ref, line_no);
        }
    }
    return Corpus(std::move(explanations), std::move(claims));
}

Corpus load_corpus(const std::string& path) {
    return parse_corpus_jsonl(read_file(path));
}

Corpus parse_corpus_csv(std::string_view contents) {
    auto rows = parse_csv_rows(contents);
    if (rows.empty()) {
        throw CorpusError("empty corpus");
    }
    const auto& header = rows.front();
    auto column = [&](std::string_view name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (trim(header[i]) == name) return i;
        }
        return std::nullopt;
    };
    const auto false_col = column("false_claim");
    const auto true_col = column("true_claim");
    const auto expl_col = column("explanation");
    const auto date_col = column("date");
    const auto source_col = column("source");
    if (!false_col || !expl_col || !date_col) {
        throw CorpusError("CSV header must name false_claim, explanation and date columns", 1);
    }

    std::vector<ExplanationRecord> explanations;
    std::vector<ClaimRecord> claims;
    std::size_t record = 0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::size_t line_no = r + 1;
        if (row.size() == 1 && blank(row[0])) {
            continue;
        }
        auto cell = [&](std::optional<std::size_t> col) -> std::string {
            if (!col || *col >= row.size()) return {};
            return trim(row[*col]);
        };
        ++record;
        const auto n = std::to_string(record);
        auto expl = cell(expl_col);
        auto false_claim = cell(false_col);
        if (expl.empty() || false_claim.empty()) {
            throw CorpusError("row needs non-empty false_claim and explanation", line_no);
        }
        const auto date = required_date(cell(date_col), line_no);
        const auto source = cell(source_col);
        explanations.push_back({"e" + n, std::move(expl), date, source});
        claims.push_back({"c" + n + "f", std::move(false_claim), false, "e" + n, date, source});
        if (auto true_claim = cell(true_col); !true_claim.empty()) {
            claims.push_back({"c" + n + "t", std::move(true_claim), true, "e" + n, date, source});
        }
    }
    return Corpus(std::move(explanations), std::move(claims));
}

Corpus import_csv(const std::string& path) {
    return parse_corpus_csv(read_file(path));
}

Corpus load_any(const std::string& path) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) {
        return import_csv(path);
    }
    return load_corpus(path);
}

CorpusSplit temporal_split(const Corpus& corpus, Date cutoff_train_end, Date cutoff_test_start,
                           double val_fraction, std::uint64_t seed) {
    if (!(std::chrono::sys_days{cutoff_train_end} < std::chrono::sys_days{cutoff_test_start})) {
        throw std::invalid_argument("temporal_split: train cutoff must precede test cutoff");
    }
    if (!(val_fraction >= 0.0 && val_fraction <= 0.5)) {
        throw std::invalid_argument("temporal_split: val_fraction must lie in [0, 0.5]");
    }
    CorpusSplit split;
    split.cutoff_train_end = cutoff_train_end;
    split.cutoff_test_start = cutoff_test_start;

    std::vector<ClaimRecord> train_period;
    for (const auto& c : corpus.claims()) {
        if (c.date <= cutoff_train_end) {
            train_period.push_back(c);
        } else if (c.date >= cutoff_test_start) {
            split.test.push_back(c);
        } else {
            split.excluded_ids.push_back(c.id);
        }
    }
    if (!split.excluded_ids.empty()) {
        split.warnings.push_back(std::to_string(split.excluded_ids.size()) +
                                 " claim(s) dated between the cutoffs were excluded");
    }

    const auto n_val = static_cast<std::size_t>(
        std::llround(val_fraction * static_cast<double>(train_period.size())));
    std::vector<std::size_t> order(train_period.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    seeded_shuffle(order, rng);
    std::vector<bool> is_val(train_period.size(), false);
    for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;
    for (std::size_t i = 0; i < train_period.size(); ++i) {
        (is_val[i] ? split.validation : split.train).push_back(std::move(train_period[i]));
    }

    if (split.train.empty() && split.validation.empty() && split.test.empty()) {
        split.warnings.push_back("split is empty: no claim falls inside either period");
    }
    return split;
}

std::vector<PairExample> generate_stage_a_pairs(const Corpus& corpus,
                                                std::span<const ClaimRecord> claims,
                                                std::uint64_t seed,
                                                std::size_t negatives_per_positive) {
    if (claims.empty()) {
        throw std::invalid_argument("generate_stage_a_pairs: no claims");
    }
    const auto& pool = corpus.explanations();
    if (negatives_per_positive > 0 && pool.size() < 2) {
        throw CorpusError("cannot sample negatives from a corpus with a single explanation");
    }
    Rng rng(seed);
    std::vector<PairExample> pairs;
    pairs.reserve(claims.size() * (1 + negatives_per_positive));
    for (const auto& claim : claims) {
        const auto& gold = corpus.gold_of(claim);
        pairs.push_back({claim.text, gold.text, 1, Stage::A});
        for (std::size_t k = 0; k < negatives_per_positive; ++k) {
            const ExplanationRecord* neg = nullptr;
            do {
                neg = &pool[uniform_index(rng, pool.size())];
            } while (neg->id == gold.id);
            pairs.push_back({claim.text, neg->text, 0, Stage::A});
        }
    }
    seeded_shuffle(pairs, rng);
    return pairs;
}

StageBPairs generate_stage_b_pairs(const Corpus& corpus, std::span<const ClaimRecord> claims) {
    StageBPairs out;
    for (const auto& claim : claims) {
        if (!claim.veracity) {
            out.warnings.push_back("claim " + claim.id + " has no veracity label; skipped");
            continue;
        }
        out.pairs.push_back({claim.text, corpus.gold_of(claim).text, *claim.veracity ? 1 : 0,
                             Stage::B});
    }
    return out;
}

std::string split_to_json(const CorpusSplit& split) {
    auto ids = [](const std::vector<ClaimRecord>& records) {
        json a = json::array();
        for (const auto& r : records) a.push_back(r.id);
        return a;
    };
    json j = {{"cutoff_train_end", format_date(split.cutoff_train_end)},
              {"cutoff_test_start", format_date(split.cutoff_test_start)},
              {"train", ids(split.train)},
              {"validation", ids(split.validation)},
              {"test", ids(split.test)},
              {"excluded", split.excluded_ids}};
    return j.dump(2) + "\n";
}

CorpusSplit split_from_json(const Corpus& corpus, std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw CorpusError(std::string("malformed split file: ") + e.what());
    }
    std::unordered_map<std::string, const ClaimRecord*> by_id;
    for (const auto& c : corpus.claims()) by_id.emplace(c.id, &c);
    auto resolve = [&](const char* key) {
        std::vector<ClaimRecord> out;
        for (const auto& id : j.at(key)) {
            auto it = by_id.find(id.get<std::string>());
            if (it == by_id.end()) {
                throw CorpusError("split references unknown claim " + id.get<std::string>());
            }
            out.push_back(*it->second);
        }
        return out;
    };
    CorpusSplit split;
    split.cutoff_train_end = required_date(j.at("cutoff_train_end").get<std::string>(), 0);
    split.cutoff_test_start = required_date(j.at("cutoff_test_start").get<std::string>(), 0);
    split.train = resolve("train");
    split.validation = resolve("validation");
    split.test = resolve("test");
    if (j.contains("excluded")) split.excluded_ids = j.at("excluded").get<std::vector<std::string>>();
    return split;
}

}  // namespace factcheck::corpus
