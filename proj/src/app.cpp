#include "factcheck/app.hpp"

#include <charconv>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <thread>

#include <pthread.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "factcheck/baselines.hpp"
#include "factcheck/eval.hpp"
#include "factcheck/index.hpp"
#include "factcheck/service.hpp"

namespace factcheck::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    const auto v = trim(value);
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw UsageError("invalid value \"" + v + "\" for " + std::string(key));
    }
    return out;
}

void require_one_of(std::string_view key, const std::string& value, std::initializer_list<std::string_view> allowed) {
    for (auto a : allowed) {
        if (value == a) return;
    }
    std::string msg = "invalid " + std::string(key) + " \"" + value + "\"; expected one of:";
    for (auto a : allowed) msg += " " + std::string(a);
    throw UsageError(msg);
}

void require_file(const std::string& path, std::string_view what) {
    if (path.empty() || !fs::exists(path)) {
        throw UsageError(std::string(what) + " not found: " + (path.empty() ? "(not configured)" : path) +
                         "; run the step that produces it or pass its path");
    }
}

Date require_date(std::string_view key, const std::string& text) {
    auto d = parse_date(text);
    if (!d) throw UsageError("invalid date for " + std::string(key) + ": " + text);
    return *d;
}

corpus::Corpus load_workdir_corpus(const AppConfig& c) {
    require_file(c.corpus_path(), "corpus");
    return corpus::load_corpus(c.corpus_path());
}

corpus::CorpusSplit load_split(const AppConfig& c, const corpus::Corpus& kb) {
    const auto path = c.artifact(kSplitFile);
    require_file(path, "split file");
    return corpus::split_from_json(kb, read_file(path));
}

nn::TrainConfig train_config(const AppConfig& c, std::uint64_t seed_offset) {
    nn::TrainConfig t;
    t.lr = c.lr;
    t.batch_size = c.batch_size;
    t.epochs = c.epochs;
    t.seed = c.seed + seed_offset;
    t.patience = c.patience;
    return t;
}

json history_json(const baselines::TrainedBaseline& b) {
    json j = {{"epoch_loss", b.history.epoch_loss},
              {"validation_loss", b.history.validation_loss},
              {"steps", b.history.steps},
              {"best_epoch", b.history.best_epoch},
              {"train_accuracy", b.train_accuracy}};
    j["validation_accuracy"] = b.validation_accuracy ? json(*b.validation_accuracy) : json(nullptr);
    return j;
}

std::string fixed(double v, int digits = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

// --- subcommands -------------------------------------------------------------

void cmd_ingest(const AppConfig& c, const std::string& source, std::ostream& out) {
    require_file(source, "ingest source");
    const auto kb = corpus::load_any(source);
    fs::create_directories(c.workdir);
    write_file_atomic(c.corpus_path(), kb.to_jsonl());
    std::size_t labeled = 0;
    for (const auto& cl : kb.claims()) labeled += cl.veracity ? 1 : 0;
    out << "ingested " << kb.explanations().size() << " explanations, " << kb.claims().size() << " claims ("
        << labeled << " with veracity) -> " << c.corpus_path() << "\n";
}

void cmd_split(const AppConfig& c, std::ostream& out, std::ostream& err) {
    const auto kb = load_workdir_corpus(c);
    const auto split = corpus::temporal_split(kb, require_date("train_end", c.train_end),
                                              require_date("test_start", c.test_start), c.val_fraction, c.seed);
    write_file_atomic(c.artifact(kSplitFile), corpus::split_to_json(split));
    for (const auto& w : split.warnings) err << "warning: " << w << "\n";
    out << "split train=" << split.train.size() << " validation=" << split.validation.size()
        << " test=" << split.test.size() << " excluded=" << split.excluded_ids.size() << "\n";
}

void cmd_train(const AppConfig& c, std::string_view stage, const std::string& model, std::ostream& out,
               std::ostream& err) {
    require_one_of("--model", model, {"tfidf", "wordvec"});
    const auto kb = load_workdir_corpus(c);
    const auto split = load_split(c, kb);
    if (split.train.empty()) throw Error("training split is empty");

    std::vector<corpus::PairExample> train, validation;
    if (stage == "stage_a") {
        train = corpus::generate_stage_a_pairs(kb, split.train, c.seed, c.negatives);
        if (!split.validation.empty()) {
            validation = corpus::generate_stage_a_pairs(kb, split.validation, c.seed + 1, c.negatives);
        }
    } else {
        auto t = corpus::generate_stage_b_pairs(kb, split.train);
        auto v = corpus::generate_stage_b_pairs(kb, split.validation);
        for (const auto& w : t.warnings) err << "warning: " << w << "\n";
        train = std::move(t.pairs);
        validation = std::move(v.pairs);
        if (train.empty()) throw Error("no veracity-labelled claims in the training split");
    }

    const auto paths = model_paths(c, stage);
    const auto cfg = train_config(c, stage == "stage_a" ? 0 : 1000);
    baselines::TrainedBaseline trained;
    if (model == "tfidf") {
        const auto vocab = baselines::pair_vocabulary(train);
        trained = baselines::train_tfidf_baseline(train, validation, vocab, cfg);
        write_file_atomic(paths.vocab, vocab.to_json());
    } else {
        std::shared_ptr<const encoder::Encoder> wv;
        if (c.encoder == "wordvec") {
            wv = make_encoder(c);
        } else {
            require_file(c.wordvec_path, "word-vector file");
            wv = encoder::load_word_vectors(c.wordvec_path);
        }
        trained = baselines::train_wordvec_baseline(train, validation, *wv, cfg);
    }
    nn::save_checkpoint(paths.checkpoint, trained.net);
    json report = history_json(trained);
    report["model"] = model;
    report["stage"] = stage;
    report["train_pairs"] = train.size();
    report["validation_pairs"] = validation.size();
    write_file_atomic(paths.report, report.dump(2) + "\n");

    out << stage << " " << model << " baseline: " << train.size() << " train pairs, " << trained.history.steps
        << " steps, train accuracy " << fixed(trained.train_accuracy);
    if (trained.validation_accuracy) out << ", validation accuracy " << fixed(*trained.validation_accuracy);
    out << " -> " << paths.checkpoint << "\n";
}

void cmd_build_index(const AppConfig& c, std::ostream& out) {
    const auto kb = load_workdir_corpus(c);
    const auto enc = make_encoder(c);
    const auto idx = index::build_index(kb.explanations(), *enc);
    idx.save(c.index_path());
    out << "indexed " << idx.size() << " explanations (dim " << idx.dimension() << ", "
        << idx.encoder_identity() << ") -> " << c.index_path() << "\n";
}

std::optional<std::shared_ptr<const pipeline::Verifier>> try_verifier(
    const AppConfig& c, const std::shared_ptr<const encoder::Encoder>& enc, std::ostream& err) {
    try {
        return make_verifier(c, enc);
    } catch (const UsageError& e) {
        err << "note: " << e.what() << "\n";
        return std::nullopt;
    }
}

void cmd_calibrate(const AppConfig& c, std::ostream& out, std::ostream& err) {
    const auto kb = load_workdir_corpus(c);
    const auto split = load_split(c, kb);
    const auto enc = make_encoder(c);
    require_file(c.index_path(), "index");
    const auto idx = index::EmbeddingIndex::load(c.index_path());

    const auto* claims = &split.validation;
    if (claims->size() < 2) {
        err << "warning: fewer than 2 validation claims; calibrating on the training split\n";
        claims = &split.train;
    }
    std::vector<index::CalibrationPair> pairs;
    for (const auto& cl : *claims) pairs.push_back({cl.text, cl.gold_explanation_id});
    const auto threshold = index::calibrate_threshold(idx, *enc, pairs);

    json j = {{"threshold",
               {{"t", threshold.t}, {"mean", threshold.mean}, {"std", threshold.std}, {"n", threshold.n_calibration}}},
              {"encoder", idx.encoder_identity()}};
    pipeline::BoundaryCalibration boundary;
    if (auto verifier = try_verifier(c, enc, err)) {
        auto stage_b = corpus::generate_stage_b_pairs(kb, *claims).pairs;
        bool both = false;
        for (int label : {0, 1}) {
            both = std::any_of(stage_b.begin(), stage_b.end(), [&](const auto& p) { return p.label == label; });
            if (!both) break;
        }
        if (!both) {
            err << "warning: validation claims lack both veracity labels; calibrating tau_b on the training split\n";
            stage_b = corpus::generate_stage_b_pairs(kb, split.train).pairs;
        }
        boundary = pipeline::calibrate_verifier_boundary(**verifier, stage_b);
        if (boundary.fell_back) err << "warning: " << boundary.warning << "\n";
        j["verifier"] = pipeline::kind_name((*verifier)->kind());
    } else {
        boundary.fell_back = true;
        boundary.warning = "no verifier available; tau_b left at 0.5";
        err << "warning: " << boundary.warning << "\n";
        j["verifier"] = nullptr;
    }
    j["tau_b"] = boundary.tau_b;
    j["boundary"] = {{"mean_aligned", boundary.mean_aligned},
                     {"mean_unaligned", boundary.mean_unaligned},
                     {"fell_back", boundary.fell_back}};
    write_file_atomic(c.artifact(kCalibrationFile), j.dump(2) + "\n");
    out << "threshold t = " << fixed(threshold.t) << " (mean " << fixed(threshold.mean) << ", std "
        << fixed(threshold.std) << ", n " << threshold.n_calibration << "), tau_b = " << fixed(boundary.tau_b)
        << "\n";
}

void print_verdict(const pipeline::Verdict& v, const std::unordered_map<std::string, std::string>& texts,
                   std::ostream& out) {
    out << "claim:   " << v.claim << "\n";
    out << "verdict: " << pipeline::label_name(v.label);
    if (v.p_truth) out << "  (p_truth " << fixed(*v.p_truth) << ", tau_b " << fixed(v.tau_b) << ")";
    out << "\n";
    if (v.error) out << "error:   " << *v.error << "\n";
    out << "threshold t = " << fixed(v.threshold_t) << "; " << v.candidates.size() << " of " << v.retrieved.size()
        << " retrieved explanations kept\n";
    for (const auto& cand : v.candidates) {
        std::string text = texts.count(cand.explanation_id) ? texts.at(cand.explanation_id) : "";
        if (text.size() > 100) text = text.substr(0, 97) + "...";
        out << "  #" << cand.rank << " " << cand.explanation_id << "  sim " << fixed(cand.similarity) << "  prob "
            << fixed(cand.probability) << "  " << text << "\n";
    }
    if (v.candidates.empty() && !v.retrieved.empty()) {
        const auto& top = v.retrieved.front();
        out << "  closest: " << top.explanation_id << " (sim " << fixed(top.similarity) << ") is below t\n";
    }
}

void cmd_check(const AppConfig& c, const std::string& claim, bool as_json, std::ostream& out) {
    if (trim(claim).empty()) throw UsageError("empty claim");
    const auto pipe = load_pipeline(c);
    const auto verdict = pipe->check_claim(claim);
    if (as_json) {
        out << pipeline::verdict_to_json(verdict, 2) << "\n";
    } else {
        print_verdict(verdict, pipeline::explanation_texts(load_workdir_corpus(c)), out);
    }
    if (verdict.error) throw Error(*verdict.error);
}

void emit_report(const eval::EvalReport& r, bool as_json, bool as_csv, std::ostream& out) {
    if (as_json) {
        out << r.to_json();
    } else if (as_csv) {
        out << r.to_csv();
    } else {
        out << r.to_text();
    }
}

void cmd_eval(const AppConfig& c, bool as_json, bool as_csv, std::ostream& out, std::ostream& err) {
    const auto kb = load_workdir_corpus(c);
    const auto split = load_split(c, kb);
    if (split.test.empty()) throw Error("test split is empty");

    eval::EvalReport report;
    const bool have_calibration = fs::exists(c.artifact(kCalibrationFile)) || (c.t && c.tau_b);
    std::shared_ptr<const pipeline::Pipeline> pipe;
    if (have_calibration) {
        try {
            pipe = load_pipeline(c);
        } catch (const UsageError& e) {
            err << "note: " << e.what() << "\n";
        }
    }
    if (pipe) {
        report = eval::evaluate_pipeline(*pipe, split.test);
    } else {
        err << "note: no calibrated verifier; reporting retrieval metrics only\n";
        require_file(c.index_path(), "index");
        const auto enc = make_encoder(c);
        const auto idx = index::EmbeddingIndex::load(c.index_path());
        report = eval::evaluate_retrieval(*enc, idx, split.test);
    }
    write_file_atomic(c.artifact(kEvalReportFile), report.to_json(false));
    emit_report(report, as_json, as_csv, out);
}

void cmd_bench(const AppConfig& c, std::size_t n, bool as_json, std::ostream& out) {
    if (n == 0) throw UsageError("--n must be positive");
    const auto kb = load_workdir_corpus(c);
    const auto pipe = load_pipeline(c);
    std::vector<std::string> pool;
    if (fs::exists(c.artifact(kSplitFile))) {
        for (const auto& cl : load_split(c, kb).test) pool.push_back(cl.text);
    }
    if (pool.empty()) {
        for (const auto& cl : kb.claims()) pool.push_back(cl.text);
    }
    if (pool.empty()) throw Error("no claims to benchmark");
    std::vector<std::string> claims;
    for (std::size_t i = 0; i < n; ++i) claims.push_back(pool[i % pool.size()]);
    eval::EvalReport r;
    r.latency = eval::bench_latency(*pipe, claims, 1);
    if (as_json) {
        json j = json::parse(r.to_json(true))["latency"];
        out << j.dump(2) << "\n";
        return;
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-10s %8s %12s %12s\n", "stage", "samples", "median_ms", "p95_ms");
    out << buf;
    const std::pair<const char*, const eval::StageStats*> stages[] = {{"encode", &r.latency.encode},
                                                                       {"retrieve", &r.latency.retrieve},
                                                                       {"verify", &r.latency.verify},
                                                                       {"total", &r.latency.total}};
    for (const auto& [name, s] : stages) {
        std::snprintf(buf, sizeof(buf), "%-10s %8zu %12.4f %12.4f\n", name, s->samples, s->median_ms, s->p95_ms);
        out << buf;
    }
    out << "peak_rss_kb " << (r.latency.peak_rss_kb ? std::to_string(*r.latency.peak_rss_kb) : "unavailable") << "\n";
}

void cmd_serve(const AppConfig& c, std::ostream& out, std::ostream& err) {
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    sigaddset(&signals, SIGHUP);
    sigset_t previous;
    pthread_sigmask(SIG_BLOCK, &signals, &previous);

    service::Service svc([c] { return load_pipeline(c); });
    const int port = svc.bind(c.host, c.port);
    out << "serving on http://" << c.host << ":" << port << " (" << svc.current()->index().size()
        << " explanations)" << std::endl;

    std::atomic<bool> done{false};
    std::thread watcher([&] {
        while (true) {
            int sig = 0;
            if (sigwait(&signals, &sig) != 0) continue;
            if (done) return;
            if (sig == SIGHUP) {
                try {
                    svc.reload();
                    err << "reloaded pipeline" << std::endl;
                } catch (const std::exception& e) {
                    err << "reload failed, keeping previous pipeline: " << e.what() << std::endl;
                }
                continue;
            }
            svc.stop();
            return;
        }
    });
    try {
        svc.listen();
    } catch (...) {
        done = true;
        pthread_kill(watcher.native_handle(), SIGTERM);
        watcher.join();
        pthread_sigmask(SIG_SETMASK, &previous, nullptr);
        throw;
    }
    done = true;
    pthread_kill(watcher.native_handle(), SIGTERM);
    watcher.join();
    pthread_sigmask(SIG_SETMASK, &previous, nullptr);
    out << "shut down" << std::endl;
}

}  // namespace

// --- configuration ------------------------------------------------------------

std::string AppConfig::corpus_path() const {
    return corpus.empty() ? artifact("corpus.jsonl") : corpus;
}

std::string AppConfig::index_path() const {
    return index.empty() ? artifact("index.fcix") : index;
}

std::string AppConfig::artifact(std::string_view name) const {
    return (fs::path(workdir) / name).string();
}

void AppConfig::set(std::string_view raw_key, std::string_view raw_value) {
    std::string key = trim(raw_key);
    std::replace(key.begin(), key.end(), '-', '_');
    const std::string value = trim(raw_value);
    if (key == "workdir") workdir = value;
    else if (key == "corpus") corpus = value;
    else if (key == "index") index = value;
    else if (key == "encoder") {
        require_one_of("encoder", value, {"wordvec", "hashed", "external"});
        encoder = value;
    } else if (key == "wordvec_path") wordvec_path = value;
    else if (key == "endpoint") endpoint = value;
    else if (key == "verifier") {
        require_one_of("verifier", value, {"tfidf", "wordvec", "external"});
        verifier = value;
    } else if (key == "hashed_dim") hashed_dim = parse_number<std::int64_t>(key, value);
    else if (key == "k") k = parse_number<std::size_t>(key, value);
    else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
    else if (key == "port") port = parse_number<int>(key, value);
    else if (key == "host") host = value;
    else if (key == "train_end") train_end = value;
    else if (key == "test_start") test_start = value;
    else if (key == "val_fraction") val_fraction = parse_number<double>(key, value);
    else if (key == "negatives") negatives = parse_number<std::size_t>(key, value);
    else if (key == "epochs") epochs = parse_number<std::size_t>(key, value);
    else if (key == "batch_size") batch_size = parse_number<std::size_t>(key, value);
    else if (key == "lr") lr = parse_number<double>(key, value);
    else if (key == "patience") patience = parse_number<std::size_t>(key, value);
    else if (key == "t") t = parse_number<double>(key, value);
    else if (key == "tau_b") tau_b = parse_number<double>(key, value);
    else if (key == "timeout_ms") timeout_ms = parse_number<std::size_t>(key, value);
    else throw UsageError("unknown configuration key \"" + key + "\"");
}

void apply_config_text(AppConfig& config, std::string_view text) {
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        config.set(line.substr(0, eq), line.substr(eq + 1));
    }
}

ModelPaths model_paths(const AppConfig& config, std::string_view stage) {
    const std::string prefix(stage);
    return {config.artifact(prefix + ".vocab.json"), config.artifact(prefix + ".fcnn"),
            config.artifact(prefix + ".report.json")};
}

std::shared_ptr<const encoder::Encoder> make_encoder(const AppConfig& c) {
    if (c.encoder == "hashed") {
        return std::make_shared<encoder::HashedEncoder>(c.hashed_dim, c.seed);
    }
    if (c.encoder == "wordvec") {
        require_file(c.wordvec_path, "word-vector file");
        return encoder::load_word_vectors(c.wordvec_path);
    }
    if (c.endpoint.empty()) throw UsageError("--endpoint is required for the external encoder");
    auto client = std::make_shared<encoder::ExternalClient>(
        encoder::ExternalOptions{c.endpoint, std::chrono::milliseconds(c.timeout_ms), 4});
    return std::make_shared<encoder::ExternalEncoder>(std::move(client));
}

std::shared_ptr<const pipeline::Verifier> make_verifier(const AppConfig& c,
                                                        const std::shared_ptr<const encoder::Encoder>& stage_a) {
    const auto paths = model_paths(c, "stage_b");
    if (c.verifier == "tfidf") {
        require_file(paths.checkpoint, "stage-B checkpoint");
        require_file(paths.vocab, "stage-B vocabulary");
        return std::make_shared<pipeline::TfidfNetVerifier>(features::Vocabulary::from_json(read_file(paths.vocab)),
                                                            nn::load_checkpoint<double>(paths.checkpoint));
    }
    if (c.verifier == "wordvec") {
        require_file(paths.checkpoint, "stage-B checkpoint");
        std::shared_ptr<const encoder::Encoder> wv;
        if (c.encoder == "wordvec" && stage_a) {
            wv = stage_a;
        } else {
            require_file(c.wordvec_path, "word-vector file");
            wv = encoder::load_word_vectors(c.wordvec_path);
        }
        return std::make_shared<pipeline::WordvecNetVerifier>(wv, nn::load_checkpoint<double>(paths.checkpoint));
    }
    if (c.endpoint.empty()) throw UsageError("--endpoint is required for the external verifier");
    return std::make_shared<pipeline::ExternalVerifier>(std::make_shared<encoder::ExternalClient>(
        encoder::ExternalOptions{c.endpoint, std::chrono::milliseconds(c.timeout_ms), 4}));
}

std::shared_ptr<const pipeline::Pipeline> load_pipeline(const AppConfig& c) {
    const auto kb = load_workdir_corpus(c);
    require_file(c.index_path(), "index");
    auto idx = std::make_shared<index::EmbeddingIndex>(index::EmbeddingIndex::load(c.index_path()));
    auto enc = make_encoder(c);
    const auto desc = enc->descriptor();
    if (desc.identity != idx->encoder_identity()) {
        throw Error("index was built with encoder \"" + idx->encoder_identity() + "\" but the configured encoder is \"" +
                    desc.identity + "\"; rebuild the index");
    }
    auto verifier = make_verifier(c, enc);

    index::Threshold threshold;
    double tau_b = 0.5;
    const auto calibration = c.artifact(kCalibrationFile);
    if (fs::exists(calibration)) {
        const auto j = json::parse(read_file(calibration));
        const auto& t = j.at("threshold");
        threshold = {t.at("t").get<double>(), t.at("mean").get<double>(), t.at("std").get<double>(),
                     t.at("n").get<std::size_t>()};
        tau_b = j.at("tau_b").get<double>();
    } else if (!(c.t && c.tau_b)) {
        throw UsageError("calibration not found: " + calibration + "; run `calibrate` or pass t and tau_b");
    }
    if (c.t) threshold.t = *c.t;
    if (c.tau_b) tau_b = *c.tau_b;
    return std::make_shared<pipeline::Pipeline>(std::move(enc), std::move(idx), pipeline::explanation_texts(kb),
                                                std::move(verifier), threshold, tau_b, c.k);
}

// --- entry point ----------------------------------------------------------------

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App cli{"Two-stage claim checking: explanation retrieval and entailment scoring", "factcheck"};
    cli.require_subcommand(1);
    cli.fallthrough();

    std::vector<std::pair<std::string, std::string>> overrides;
    std::string config_path;
    bool as_json = false;
    bool as_csv = false;
    cli.add_option("--config", config_path, "key = value configuration file (default: $FACTCHECK_CONFIG)");
    auto setting = [&](const std::string& flag, const std::string& key, const std::string& help) {
        cli.add_option_function<std::string>(
            flag, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); }, help);
    };
    setting("--workdir", "workdir", "directory holding corpus, split, models, index and calibration");
    setting("--corpus", "corpus", "normalized corpus JSONL (default <workdir>/corpus.jsonl)");
    setting("--encoder", "encoder", "wordvec | hashed | external");
    setting("--wordvec-path", "wordvec_path", "GloVe-format text file");
    setting("--endpoint", "endpoint", "sidecar base URL, e.g. http://127.0.0.1:8500");
    setting("--index", "index", "index file (default <workdir>/index.fcix)");
    setting("--verifier", "verifier", "tfidf | wordvec | external");
    setting("--k", "k", "explanations retrieved per claim");
    setting("--seed", "seed", "seed for every stochastic step");
    setting("--port", "port", "service port");
    setting("--host", "host", "service bind address");
    setting("--hashed-dim", "hashed_dim", "hashed encoder dimension");
    setting("--train-end", "train_end", "last date of the training period (YYYY-MM-DD)");
    setting("--test-start", "test_start", "first date of the test period (YYYY-MM-DD)");
    setting("--val-fraction", "val_fraction", "share of training-period claims held out for calibration");
    setting("--negatives", "negatives", "stage-A negatives per positive");
    setting("--epochs", "epochs", "training epochs");
    setting("--batch-size", "batch_size", "mini-batch size");
    setting("--lr", "lr", "Adam learning rate");
    setting("--patience", "patience", "early-stopping patience in epochs (0 disables)");
    setting("--t", "t", "override the similarity threshold");
    setting("--tau-b", "tau_b", "override the stage-B decision boundary");
    cli.add_flag("--json", as_json, "JSON output");
    cli.add_flag("--csv", as_csv, "CSV output (eval)");

    std::string ingest_source;
    auto* ingest = cli.add_subcommand("ingest", "validate a JSONL or CSV corpus and store it normalized");
    ingest->add_option("source", ingest_source, "corpus file (.jsonl or .csv)")->required();

    auto* split = cli.add_subcommand("split", "temporal train/validation/test split");

    std::string model_a = "tfidf";
    auto* train_a = cli.add_subcommand("train-a", "train the stage-A baseline pair classifier");
    train_a->add_option("--model", model_a, "tfidf | wordvec");

    auto* build = cli.add_subcommand("build-index", "encode every explanation into the index file");
    auto* calibrate = cli.add_subcommand("calibrate", "similarity threshold and stage-B decision boundary");

    std::string model_b;
    auto* train_b = cli.add_subcommand("train-b", "train the stage-B baseline verifier");
    train_b->add_option("--model", model_b, "tfidf | wordvec (default: configured verifier)");

    std::string claim;
    auto* check = cli.add_subcommand("check", "check one claim");
    check->add_option("claim", claim, "claim text")->required();

    auto* evaluate = cli.add_subcommand("eval", "MRR, Recall@10 and accuracy on the test split");

    std::size_t bench_n = 100;
    auto* bench = cli.add_subcommand("bench", "per-stage latency over test claims");
    bench->add_option("--n", bench_n, "number of checked claims");

    auto* serve = cli.add_subcommand("serve", "HTTP service: /check, /health, /metrics");

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    if (!argv_rev.empty()) argv_rev.pop_back();  // program name
    try {
        cli.parse(argv_rev);
    } catch (const CLI::ParseError& e) {
        return cli.exit(e, out, err) == 0 ? 0 : 1;
    }

    try {
        AppConfig config;
        if (config_path.empty()) {
            if (const char* env = std::getenv("FACTCHECK_CONFIG")) config_path = env;
        }
        if (!config_path.empty()) {
            require_file(config_path, "config file");
            apply_config_text(config, read_file(config_path));
        }
        for (const auto& [key, value] : overrides) config.set(key, value);

        if (*ingest) cmd_ingest(config, ingest_source, out);
        else if (*split) cmd_split(config, out, err);
        else if (*train_a) cmd_train(config, "stage_a", model_a, out, err);
        else if (*build) cmd_build_index(config, out);
        else if (*calibrate) cmd_calibrate(config, out, err);
        else if (*train_b) cmd_train(config, "stage_b", model_b.empty() ? config.verifier : model_b, out, err);
        else if (*check) cmd_check(config, claim, as_json, out);
        else if (*evaluate) cmd_eval(config, as_json, as_csv, out, err);
        else if (*bench) cmd_bench(config, bench_n, as_json, out);
        else if (*serve) cmd_serve(config, out, err);
        return 0;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace factcheck::app
