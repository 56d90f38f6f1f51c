#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "ganblend/checkpoint.hpp"

namespace ganblend {

inline constexpr int kDefaultServicePort = 7860;

// GANBLEND_PORT when set to a valid port number, otherwise `fallback`.
int service_port_from_env(int fallback = kDefaultServicePort);

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = kDefaultServicePort;  // 0 picks a free port
  std::filesystem::path static_dir;  // served at / when set
};

// HTTP API v1 under /api. Projections run as background jobs on a single
// worker thread; everything else is answered on the request thread.
class Service {
 public:
  explicit Service(ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  Registry& registry();

  // Binds the listening socket and returns the port. Throws Error(Io) when busy.
  int bind();
  // Serves until stop(); bind() must have succeeded.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ganblend
