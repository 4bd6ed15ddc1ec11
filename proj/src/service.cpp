#include "factcheck/service.hpp"

#include <chrono>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "factcheck/eval.hpp"

namespace factcheck::service {

namespace {

constexpr std::size_t kLatencyWindow = 10000;

void send_error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(nlohmann::json{{"error", message}}.dump(), "application/json");
}

}  // namespace

Service::Service(PipelineLoader loader) : loader_(std::move(loader)), server_(std::make_unique<httplib::Server>()) {
    pipeline_ = loader_();
    if (!pipeline_) {
        throw Error("service: pipeline loader returned nothing");
    }
    // httplib's default adds SO_REUSEPORT, which lets a second server bind a
    // port that is already being served.
    server_->set_socket_options([](socket_t sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });

    server_->Post("/check", [this](const httplib::Request& req, httplib::Response& res) {
        const auto t0 = std::chrono::steady_clock::now();
        auto elapsed = [&] {
            return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        };
        const auto body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object()) {
            send_error(res, 400, "malformed JSON body");
            record("check", elapsed(), false);
            return;
        }
        auto it = body.find("claim");
        if (it == body.end() || !it->is_string()) {
            send_error(res, 400, "missing \"claim\" string");
            record("check", elapsed(), false);
            return;
        }
        const auto claim = it->get<std::string>();
        if (claim.find_first_not_of(" \t\r\n") == std::string::npos) {
            send_error(res, 400, "empty claim");
            record("check", elapsed(), false);
            return;
        }
        const auto verdict = current()->check_claim(claim);
        res.set_content(pipeline::verdict_to_json(verdict), "application/json");
        record("check", elapsed(), true);
    });

    server_->Get("/health", [this](const httplib::Request&, httplib::Response& res) {
        const auto p = current();
        nlohmann::json j = {{"status", "ok"},
                            {"index_size", p->index().size()},
                            {"encoder", p->index().encoder_identity()},
                            {"verifier", pipeline::kind_name(p->verifier().kind())},
                            {"threshold_t", p->threshold().t},
                            {"tau_b", p->tau_b()}};
        res.set_content(j.dump(), "application/json");
        record("health", 0.0, true);
    });

    server_->Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
        record("metrics", 0.0, true);
        res.set_content(metrics_json(), "application/json");
    });
}

Service::~Service() {
    stop();
}

int Service::bind(const std::string& host, int port) {
    const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) {
        throw Error("service: cannot bind " + host + ":" + std::to_string(port) + " (port busy?)");
    }
    return bound;
}

void Service::listen() {
    if (!server_->listen_after_bind()) {
        throw Error("service: listen failed");
    }
}

void Service::stop() {
    if (server_) server_->stop();
}

bool Service::running() const {
    return server_ && server_->is_running();
}

void Service::reload() {
    auto fresh = loader_();
    if (!fresh) {
        throw Error("service: pipeline loader returned nothing");
    }
    {
        std::lock_guard lock(pipeline_mutex_);
        pipeline_ = std::move(fresh);
    }
    std::lock_guard lock(metrics_mutex_);
    ++reloads_;
}

std::shared_ptr<const pipeline::Pipeline> Service::current() const {
    std::lock_guard lock(pipeline_mutex_);
    return pipeline_;
}

void Service::record(const std::string& endpoint, double ms, bool ok) {
    std::lock_guard lock(metrics_mutex_);
    if (endpoint == "check") {
        ++check_requests_;
        if (ok) {
            check_latency_ms_.push_back(ms);
            if (check_latency_ms_.size() > kLatencyWindow) check_latency_ms_.pop_front();
        }
    } else if (endpoint == "health") {
        ++health_requests_;
    } else {
        ++metrics_requests_;
    }
    if (!ok) ++client_errors_;
}

std::string Service::metrics_json() const {
    std::lock_guard lock(metrics_mutex_);
    const auto s = eval::summarize(std::vector<double>(check_latency_ms_.begin(), check_latency_ms_.end()));
    nlohmann::json j = {
        {"requests", {{"check", check_requests_}, {"health", health_requests_}, {"metrics", metrics_requests_}}},
        {"client_errors", client_errors_},
        {"reloads", reloads_},
        {"check_latency_ms", {{"samples", s.samples}, {"median", s.median_ms}, {"p95", s.p95_ms}}},
    };
    return j.dump();
}

}  // namespace factcheck::service
