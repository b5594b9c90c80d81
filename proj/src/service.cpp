#include "lifestyle/service.hpp"

#include "lifestyle/api.hpp"
#include "lifestyle/config.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdio>
#include <iostream>
#include <stdexcept>
#include <thread>

namespace lifestyle {

using nlohmann::json;

struct Service::Impl {
    ServiceOptions options;
    httplib::Server server;
    std::thread thread;
    std::atomic<unsigned long> error_counter{0};

    void send(httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
        send(res, status, {{"error", {{"code", code}, {"message", message}}}});
    }

    template <class F>
    void post(const char* path, F&& handler) {
        server.Post(path, [this, handler](const httplib::Request& req, httplib::Response& res) {
            json body;
            try {
                body = json::parse(req.body);
            } catch (const json::parse_error& e) {
                send_error(res, 400, "invalid_json", e.what());
                return;
            }
            try {
                send(res, 200, handler(body));
            } catch (const api::ApiError& e) {
                send_error(res, e.status(), e.code(), e.what());
            } catch (const std::exception& e) {
                char id[32];
                std::snprintf(id, sizeof id, "req-%06lu", ++error_counter);
                std::cerr << "internal error " << id << ": " << e.what() << '\n';
                send(res, 500, {{"error", {{"code", "internal"}, {"message", "internal error"}, {"correlation_id", id}}}});
            }
        });
    }

    explicit Impl(ServiceOptions o) : options(std::move(o)) {
        server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
        server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            res.status = 204;
        });
        server.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
            send(res, 200, {{"status", "ok"}, {"version", std::string(library_version())}});
        });
        post("/api/allocate", [this](const json& b) { return api::allocate(b, options.cache_dir); });
        post("/api/glidepath", [](const json& b) { return api::glidepath(b); });
        post("/api/compare", [this](const json& b) { return api::compare(b, options.cache_dir); });
    }

    int bind() {
        int port = options.port;
        if (port == 0) {
            port = server.bind_to_any_port(options.host);
        } else if (!server.bind_to_port(options.host, port)) {
            port = -1;
        }
        if (port < 0) throw std::runtime_error("cannot bind " + options.host + ":" + std::to_string(options.port));
        return port;
    }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Service::~Service() { stop(); }

int Service::start() {
    const int port = impl_->bind();
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port;
}

void Service::run() {
    impl_->bind();
    impl_->server.listen_after_bind();
}

void Service::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace lifestyle
