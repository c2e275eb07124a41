#include "hear/server.hpp"

#include <httplib.h>

namespace hear {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    send_json(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

nlohmann::json parse_body(const httplib::Request& req) {
    try {
        auto j = nlohmann::json::parse(req.body);
        if (!j.is_object()) throw ServiceError(400, "bad_request", "body must be a JSON object");
        return j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ServiceError(400, "bad_request", std::string("invalid JSON: ") + e.what());
    }
}

std::string string_field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw ServiceError(400, "missing_field", std::string("missing field '") + key + "'");
    if (!j.at(key).is_string()) throw ServiceError(400, "bad_field", std::string("field '") + key + "' must be a string");
    return j.at(key).get<std::string>();
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const ServiceError& e) {
            send_error(res, e.status(), e.code(), e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what());
        }
    };
}

}  // namespace

struct HttpServer::Impl {
    explicit Impl(DialogueService& s) : service(s) {}
    DialogueService& service;
    httplib::Server server;
};

HttpServer::HttpServer(DialogueService& service) : impl_(std::make_unique<Impl>(service)) {
    auto& svc = impl_->service;
    auto& srv = impl_->server;
    srv.set_payload_max_length(64 * 1024);

    srv.Post("/sessions", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                 const auto body = parse_body(req);
                 const std::string clip_id = string_field(body, "clip_id");
                 const std::string id = svc.create_session(clip_id);
                 send_json(res, 201, {{"id", id}, {"clip_id", clip_id}});
             }));
    srv.Post("/sessions/:id/questions", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                 const auto body = parse_body(req);
                 const RoundRecord r = svc.ask(req.path_params.at("id"), string_field(body, "text"));
                 nlohmann::json out = r.to_json();
                 out["answer_text"] = r.answer;
                 send_json(res, 200, out);
             }));
    srv.Get("/sessions/:id", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 200, svc.session(req.path_params.at("id")).to_json());
            }));
    srv.Get("/clips", guarded([&svc](const httplib::Request&, httplib::Response& res) {
                send_json(res, 200, svc.clips_json());
            }));
    srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (!res.body.empty()) return;
        if (res.status == 404) {
            send_error(res, 404, "route_not_found", "no such endpoint");
        } else if (res.status == 413) {
            send_error(res, 413, "payload_too_large", "request body too large");
        }
    });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace hear
