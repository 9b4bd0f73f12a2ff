#pragma once

#include <string>

// before httplib: <resolv.h> defines a _res macro that breaks Eigen
#include "krds/service.hpp"

#include <httplib.h>

namespace krds {

namespace detail {

inline void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

template <class F>
void guarded(httplib::Response& res, F&& f) {
    try {
        f();
    } catch (const ServiceError& e) {
        send_json(res, e.status, json{{"error", e.what()}});
    } catch (const json::exception& e) {
        send_json(res, 400, json{{"error", std::string("malformed JSON body: ") + e.what()}});
    } catch (const std::exception& e) {
        send_json(res, 500, json{{"error", e.what()}});
    }
}

inline std::string string_field(const httplib::Request& req, const char* name) {
    const auto body = json::parse(req.body.empty() ? "{}" : req.body);
    if (!body.is_object()) throw ServiceError(400, "request body must be a JSON object");
    if (!body.contains(name) || !body.at(name).is_string())
        throw ServiceError(400, std::string("field '") + name + "' must be a nonempty string");
    return body.at(name).get<std::string>();
}

} // namespace detail

/// Routes:
///   POST /sessions                {self_report}  -> 201 {id, agent_utterance, status, diagnosis?}
///   POST /sessions/{id}/messages  {text}         -> 200 {id, agent_utterance, status, diagnosis?}
///   GET  /sessions/{id}                          -> 200 session record
inline void register_routes(httplib::Server& server, DiagnosisService& service) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Post("/sessions", [&service](const httplib::Request& req, httplib::Response& res) {
        detail::guarded(res, [&] {
            const auto reply = service.create(detail::string_field(req, "self_report"));
            detail::send_json(res, 201, service.reply_to_json(reply));
        });
    });
    server.Post(R"(/sessions/([^/]+)/messages)", [&service](const httplib::Request& req, httplib::Response& res) {
        detail::guarded(res, [&] {
            const std::string id = req.matches[1];
            service.get(id); // unknown ids answer 404 before the body is inspected
            const auto reply = service.post_message(id, detail::string_field(req, "text"));
            detail::send_json(res, 200, service.reply_to_json(reply));
        });
    });
    server.Get(R"(/sessions/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
        detail::guarded(res, [&] { detail::send_json(res, 200, service.get_json(req.matches[1])); });
    });
}

} // namespace krds
