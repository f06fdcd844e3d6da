#pragma once

#include <memory>
#include <string>

// Eigen must be seen before httplib: <resolv.h> defines a `_res` macro that
// collides with Eigen parameter names.
#include "aqi/service.hpp"

#include <httplib.h>

namespace aqi {

/// Binds every route to Api::handle. The server is returned unstarted so the
/// caller chooses between listen() and bind_to_any_port()/listen_after_bind().
inline std::unique_ptr<httplib::Server> make_http_server(Api& api) {
  auto server = std::make_unique<httplib::Server>();
  auto forward = [&api](const httplib::Request& req, httplib::Response& res) {
    const auto r = api.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server->Get(".*", forward);
  server->Post(".*", forward);
  server->Put(".*", forward);
  server->Delete(".*", forward);
  return server;
}

}  // namespace aqi
