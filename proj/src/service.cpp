#include "ganblend/service.hpp"

#include <sys/socket.h>

#include <charconv>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include "ganblend/base64.hpp"
#include "ganblend/blend.hpp"
#include "ganblend/generator.hpp"
#include "ganblend/grid.hpp"
#include "ganblend/png_io.hpp"
#include "ganblend/projector.hpp"
#include "httplib.h"
#include "json.hpp"

namespace ganblend {

using nlohmann::json;

int service_port_from_env(int fallback) {
  const char* env = std::getenv("GANBLEND_PORT");
  if (!env || !*env) return fallback;
  const std::string_view text(env);
  int port = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), port);
  if (ec != std::errc() || ptr != text.data() + text.size() || port < 0 || port > 65535) {
    return fallback;
  }
  return port;
}

namespace {

int http_status(ErrorKind kind) {
  return kind == ErrorKind::NotFound ? 404 : 400;
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view kind, std::string_view message) {
  send_json(res, {{"error", std::string(message)}, {"kind", std::string(kind)}}, status);
}

// Runs a handler, turning exceptions into JSON error responses.
template <class Fn>
auto guarded(Fn fn) {
  return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, http_status(e.kind()), to_string(e.kind()), e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "invalid argument", std::string("bad JSON: ") + e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

json parse_body(const httplib::Request& req) {
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("request body is not JSON: ") + e.what());
  }
}

template <class T>
T query_number(const httplib::Request& req, const char* key, T fallback) {
  if (!req.has_param(key)) return fallback;
  const auto text = req.get_param_value(key);
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorKind::InvalidArgument,
                std::string("query parameter '") + key + "' is not a number: '" + text + "'");
  }
  return value;
}

std::string required_string(const json& body, const char* key) {
  if (!body.contains(key) || !body.at(key).is_string()) {
    throw Error(ErrorKind::InvalidArgument, std::string("missing string field '") + key + "'");
  }
  return body.at(key).get<std::string>();
}

MappingPolicy mapping_from_json(const json& body) {
  if (!body.contains("mapping")) return MappingPolicy::base();
  const auto& m = body.at("mapping");
  if (m.is_string()) return mapping_policy_from_string(m.get<std::string>());
  if (m.is_number()) return mapping_policy_from_string(m.dump());
  throw Error(ErrorKind::InvalidArgument, "mapping must be 'base', 'transfer' or a number");
}

// Schedule from ?schedule=<json> or from flat query parameters (?kind=swap&r_swap=16...).
BlendSchedule schedule_from_query(const httplib::Request& req) {
  if (req.has_param("schedule")) return schedule_from_json(req.get_param_value("schedule"));
  if (!req.has_param("kind")) {
    throw Error(ErrorKind::InvalidArgument, "schedule preview needs 'schedule' or 'kind'");
  }
  json j = json::object();
  for (const auto& [key, value] : req.params) {
    if (key == "model_id") continue;
    if (key == "kind" || key == "low_source") {
      j[key] = value;
      continue;
    }
    double number = 0.0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), number);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
      throw Error(ErrorKind::InvalidArgument,
                  "schedule parameter '" + key + "' is not a number: '" + value + "'");
    }
    if (key.starts_with("r_")) {
      j[key] = static_cast<long long>(number);
    } else {
      j[key] = number;
    }
  }
  return schedule_from_json(j.dump());
}

Image image_from_base64(const std::string& text) {
  const auto bytes = base64_decode(text);
  return from_raster(decode_png_bytes(bytes));
}

std::string image_to_base64(const Image& image) {
  return base64_encode(encode_png_bytes(to_raster(image)));
}

json projection_json(const ProjectionResult& result, const std::string& model_id) {
  json j = json::parse(latent_to_json(result, model_id));
  j["loss_trace"] = result.loss_trace;
  j["reconstruction_png"] = image_to_base64(result.reconstruction);
  return j;
}

struct Job {
  std::string status = "queued";  // queued | running | done | failed
  int step = 0;
  int steps = 0;
  double loss = 0.0;
  json result;
  std::string error;
};

using ProgressSink = std::function<void(int, double)>;
using JobTask = std::function<json(const ProgressSink&)>;

// FIFO of background jobs drained by one worker thread.
class JobQueue {
 public:
  JobQueue() : worker_([this](std::stop_token st) { drain(st); }) {}

  ~JobQueue() {
    worker_.request_stop();
    cv_.notify_all();
  }

  std::string submit(int steps, JobTask task) {
    std::lock_guard lock(mutex_);
    const std::string id = "j" + std::to_string(next_id_++);
    jobs_[id].steps = steps;
    pending_.emplace_back(id, std::move(task));
    cv_.notify_one();
    return id;
  }

  std::optional<Job> get(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) return std::nullopt;
    return it->second;
  }

 private:
  void drain(std::stop_token st) {
    while (true) {
      std::pair<std::string, JobTask> item;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return st.stop_requested() || !pending_.empty(); });
        if (st.stop_requested()) return;
        item = std::move(pending_.front());
        pending_.pop_front();
        jobs_[item.first].status = "running";
      }
      const auto& id = item.first;
      auto progress = [&](int step, double loss) {
        std::lock_guard lock(mutex_);
        auto& job = jobs_[id];
        job.step = step + 1;
        job.loss = loss;
      };
      json result;
      std::string error;
      try {
        result = item.second(progress);
      } catch (const std::exception& e) {
        error = e.what();
      }
      std::lock_guard lock(mutex_);
      auto& job = jobs_[id];
      if (error.empty()) {
        job.status = "done";
        job.result = std::move(result);
      } else {
        job.status = "failed";
        job.error = std::move(error);
      }
    }
  }

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::pair<std::string, JobTask>> pending_;
  std::map<std::string, Job> jobs_;
  std::uint64_t next_id_ = 1;
  std::jthread worker_;  // last, so it stops before the state above is destroyed
};

}  // namespace

struct Service::Impl {
  ServiceOptions options;
  Registry registry;
  httplib::Server server;
  JobQueue jobs;
  int port = -1;

  explicit Impl(ServiceOptions opts) : options(std::move(opts)) {
    // httplib enables SO_REUSEPORT by default, which lets a second server share a busy port.
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    routes();
  }

  std::shared_ptr<const Checkpoint> model(const std::string& id) const { return registry.get(id); }

  void routes() {
    server.Get("/api/models", guarded([this](const httplib::Request&, httplib::Response& res) {
      json models = json::array();
      for (const auto& e : registry.list()) {
        models.push_back({{"id", e.id},
                          {"name", e.name},
                          {"max_resolution", e.checkpoint->meta().max_resolution}});
      }
      send_json(res, {{"models", models}});
    }));

    server.Post("/api/models", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::string name = req.has_param("name") ? req.get_param_value("name") : std::string();
      const auto type = req.get_header_value("Content-Type");
      std::optional<Checkpoint> ckpt;
      if (type.starts_with("application/json")) {
        const auto body = parse_body(req);
        const auto path = required_string(body, "path");
        if (body.contains("name")) name = body.at("name").get<std::string>();
        if (name.empty()) name = std::filesystem::path(path).filename().string();
        ckpt.emplace(load(path));
      } else {
        const auto* data = reinterpret_cast<const std::uint8_t*>(req.body.data());
        ckpt.emplace(decode_gwtc({data, req.body.size()}));
      }
      const auto id = registry.put(std::move(*ckpt), name);
      send_json(res, {{"id", id}});
    }));

    server.Post("/api/blend", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req);
      const auto base = model(required_string(body, "base_id"));
      const auto transfer = model(required_string(body, "transfer_id"));
      if (!body.contains("schedule")) throw Error(ErrorKind::InvalidArgument, "missing 'schedule'");
      const auto& sched = body.at("schedule");
      const auto schedule = schedule_from_json(sched.is_string() ? sched.get<std::string>() : sched.dump());
      auto blended = blend_checkpoints(*base, *transfer, schedule, mapping_from_json(body));
      const std::string name = body.contains("name") ? body.at("name").get<std::string>() : "blend";
      send_json(res, {{"id", registry.put(std::move(blended), name)}});
    }));

    server.Get("/api/models/:id/sample.png",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const auto ckpt = model(req.path_params.at("id"));
                 SampleGridSpec spec;
                 spec.seed = query_number<std::uint64_t>(req, "seed", spec.seed);
                 spec.count = query_number<int>(req, "count", spec.count);
                 spec.columns = query_number<int>(req, "columns", spec.columns);
                 const auto png = encode_png_bytes(sample_grid(*ckpt, spec));
                 res.set_content(reinterpret_cast<const char*>(png.data()), png.size(), "image/png");
               }));

    server.Get("/api/models/:id/activations",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const auto ckpt = model(req.path_params.at("id"));
                 const auto seed = query_number<std::uint64_t>(req, "seed", 0);
                 const int tap_r = query_number<int>(req, "tap_r", ckpt->meta().max_resolution);
                 const auto z = sample_latent(ckpt->meta(), seed, 0);
                 const Tensor t = activations(*ckpt, z, NoiseSpec{seed}, tap_r);
                 const auto v = t.values();
                 double sum = 0.0;
                 float lo = v[0], hi = v[0];
                 for (float x : v) {
                   sum += x;
                   lo = std::min(lo, x);
                   hi = std::max(hi, x);
                 }
                 send_json(res, {{"shape", t.dims()},
                                 {"min", lo},
                                 {"max", hi},
                                 {"mean", sum / static_cast<double>(v.size())}});
               }));

    server.Get("/api/schedule/preview",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const auto schedule = schedule_from_query(req);
                 const GeneratorConfig config =
                     req.has_param("model_id") ? model(req.get_param_value("model_id"))->meta()
                                               : GeneratorConfig{};
                 json rows = json::array();
                 for (const auto& row : describe_schedule(schedule, config)) {
                   rows.push_back({{"r", row.resolution}, {"alpha", row.alpha}});
                 }
                 send_json(res, rows);
               }));

    server.Post("/api/project", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req);
      const auto model_id = required_string(body, "model_id");
      const auto ckpt = model(model_id);
      const auto target = image_from_base64(required_string(body, "png"));
      const auto cfg = projection_config_from_json(body.contains("cfg") ? body.at("cfg").dump() : "{}");
      const auto id = jobs.submit(cfg.steps, [=](const ProgressSink& progress) {
        return projection_json(project(*ckpt, target, cfg, progress), model_id);
      });
      send_json(res, {{"job_id", id}}, 202);
    }));

    server.Post("/api/toonify", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req);
      const auto base_id = required_string(body, "base_id");
      const auto blended_id = required_string(body, "blended_id");
      const auto base = model(base_id);
      const auto blended = model(blended_id);
      if (!(base->meta() == blended->meta())) {
        throw Error(ErrorKind::Config, "base and blended models have different configs");
      }
      const auto target = image_from_base64(required_string(body, "png"));
      const auto cfg = projection_config_from_json(body.contains("cfg") ? body.at("cfg").dump() : "{}");
      const auto id = jobs.submit(cfg.steps, [=](const ProgressSink& progress) {
        auto out = toonify_detailed(*base, *blended, target, cfg, progress);
        json j = projection_json(out.projection, base_id);
        j["blended_id"] = blended_id;
        j["toonified_png"] = image_to_base64(out.image);
        return j;
      });
      send_json(res, {{"job_id", id}}, 202);
    }));

    server.Get("/api/jobs/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto& id = req.path_params.at("id");
      const auto job = jobs.get(id);
      if (!job) throw Error(ErrorKind::NotFound, "unknown job id '" + id + "'");
      json j = {{"job_id", id},
                {"status", job->status},
                {"progress", {{"step", job->step}, {"steps", job->steps}, {"loss", job->loss}}}};
      if (job->status == "done") j["result"] = job->result;
      if (job->status == "failed") j["error"] = job->error;
      send_json(res, j);
    }));

    if (!options.static_dir.empty()) {
      if (!server.set_mount_point("/", options.static_dir.string())) {
        throw Error(ErrorKind::Io, "static directory not found: " + options.static_dir.string());
      }
    }
  }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Service::~Service() { stop(); }

Registry& Service::registry() { return impl_->registry; }

int Service::bind() {
  auto& s = impl_->server;
  const auto& o = impl_->options;
  if (o.port == 0) {
    impl_->port = s.bind_to_any_port(o.host);
  } else {
    impl_->port = s.bind_to_port(o.host, o.port) ? o.port : -1;
  }
  if (impl_->port < 0) {
    throw Error(ErrorKind::Io, "cannot listen on " + o.host + ":" + std::to_string(o.port));
  }
  return impl_->port;
}

void Service::run() {
  if (impl_->port < 0) throw Error(ErrorKind::Io, "service is not bound to a port");
  impl_->server.listen_after_bind();
}

void Service::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace ganblend
