#pragma once

// Binds a ForecastService to cpp-httplib. Needs vendor/httplib.h on the include path.

#include <string>

// service.hpp (and with it Eigen) is included ahead of httplib.h.
#include "tftm/service.hpp"
#include "httplib.h"

namespace tftm {

/// Routes every supported path to `service`. The server keeps a reference.
inline void mount(httplib::Server& server, const ForecastService& service) {
    auto reply = [&service](const std::string& method) {
        return [&service, method](const httplib::Request& req, httplib::Response& res) {
            auto r = service.handle(method, req.path, req.body);
            res.status = r.status;
            res.set_header("Access-Control-Allow-Origin", "*");
            res.set_content(r.body, "application/json");
        };
    };
    for (const char* path : {"/health", "/subjects", "/importance", "/forecast"}) {
        server.Get(path, reply("GET"));
        server.Post(path, reply("POST"));
    }
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.status = 204;
    });
}

} // namespace tftm
