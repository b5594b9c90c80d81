#pragma once

#include <memory>
#include <string>

namespace lifestyle {

struct ServiceOptions {
    std::string host = "127.0.0.1";
    int port = 8080;  ///< 0: pick a free port
    std::string cache_dir;
};

/// HTTP/JSON front end over lifestyle::api:
///
///     GET  /api/health
///     POST /api/allocate
///     POST /api/glidepath
///     POST /api/compare
///
/// Errors are returned as {"error": {"code", "message"}} with status 400,
/// 404, 409, or 500 (the latter with a "correlation_id" also written to stderr).
class Service {
public:
    explicit Service(ServiceOptions options);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds and serves on a background thread; returns the bound port.
    /// Throws std::runtime_error if the address cannot be bound.
    int start();
    /// Binds and serves on the calling thread until stop().
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace lifestyle
