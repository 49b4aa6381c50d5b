#pragma once

#include <memory>
#include <string>

#include "httplib.h"
#include "pacc/app/service.hpp"

namespace pacc::app {

/// An httplib server forwarding every request to `service`.
inline std::unique_ptr<httplib::Server> make_http_server(Service& service) {
  auto server = std::make_unique<httplib::Server>();
  auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query[k] = v;
    auto out = service.handle(req.method, req.path, query, req.body);
    res.status = out.status;
    res.set_content(out.body.dump(), "application/json");
  };
  server->Get(".*", forward);
  server->Post(".*", forward);
  server->Put(".*", forward);
  server->Delete(".*", forward);
  server->Patch(".*", forward);
  return server;
}

}  // namespace pacc::app
