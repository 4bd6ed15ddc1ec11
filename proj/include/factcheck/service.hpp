#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>

#include "factcheck/pipeline.hpp"

namespace httplib {
class Server;
}

namespace factcheck::service {

using PipelineLoader = std::function<std::shared_ptr<const pipeline::Pipeline>()>;

/// Read-only HTTP front end over a loaded pipeline:
///   POST /check   {"claim": string}  -> verdict JSON
///   GET  /health                     -> status, index size, encoder identity
///   GET  /metrics                    -> request counts and latency summary
/// `reload` swaps in a freshly loaded pipeline; in-flight requests finish on
/// the one they started with.
class Service {
public:
    /// Loads the pipeline immediately; a load failure propagates so the
    /// service refuses to start.
    explicit Service(PipelineLoader loader);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds to host:port (port 0 picks a free port). Throws when the port is
    /// unavailable.
    int bind(const std::string& host, int port);
    /// Serves until `stop`. Requires a successful `bind`.
    void listen();
    void stop();
    bool running() const;

    void reload();

    std::shared_ptr<const pipeline::Pipeline> current() const;
    std::string metrics_json() const;

private:
    void record(const std::string& endpoint, double ms, bool ok);

    PipelineLoader loader_;
    std::unique_ptr<httplib::Server> server_;
    mutable std::mutex pipeline_mutex_;
    std::shared_ptr<const pipeline::Pipeline> pipeline_;

    mutable std::mutex metrics_mutex_;
    std::uint64_t check_requests_ = 0;
    std::uint64_t health_requests_ = 0;
    std::uint64_t metrics_requests_ = 0;
    std::uint64_t client_errors_ = 0;
    std::uint64_t reloads_ = 0;
    std::deque<double> check_latency_ms_;  // most recent requests only
};

}  // namespace factcheck::service
