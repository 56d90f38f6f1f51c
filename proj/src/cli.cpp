#include "ganblend/cli.hpp"

#include <atomic>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "ganblend/blend.hpp"
#include "ganblend/checkpoint.hpp"
#include "ganblend/generator.hpp"
#include "ganblend/grid.hpp"
#include "ganblend/manifest.hpp"
#include "ganblend/png_io.hpp"
#include "ganblend/projector.hpp"
#include "ganblend/service.hpp"
#include "ganblend/topology.hpp"

namespace ganblend::cli {
namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
}

// Inline JSON when the argument starts with '{', otherwise a file path.
std::string json_arg(const std::string& arg) {
  const auto first = arg.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && arg[first] == '{') return arg;
  return read_text(arg);
}

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

struct ProjectArgs {
  std::string space = "w";
  int steps = 300;
  float learning_rate = ProjectionConfig{}.learning_rate;
  float fd_step = ProjectionConfig{}.fd_step;
  std::uint64_t seed = 0;
  bool progress = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--space", space, "Latent space to optimize (w or z)")
        ->capture_default_str();
    cmd->add_option("--steps", steps, "Adam steps")->capture_default_str();
    cmd->add_option("--lr", learning_rate, "Adam learning rate")->capture_default_str();
    cmd->add_option("--fd-step", fd_step, "Finite-difference step")->capture_default_str();
    cmd->add_option("--seed", seed, "Noise and initialization seed")->capture_default_str();
    cmd->add_flag("--progress", progress, "Print the loss every 10 steps to stderr");
  }

  ProjectionConfig config() const {
    ProjectionConfig cfg;
    cfg.space = latent_space_from_string(space);
    cfg.steps = steps;
    cfg.learning_rate = learning_rate;
    cfg.fd_step = fd_step;
    cfg.seed = seed;
    cfg.validate();
    return cfg;
  }

  ProgressFn reporter(std::ostream& err) const {
    if (!progress) return {};
    return [&err, total = steps](int step, double loss) {
      if (step % 10 == 0 || step + 1 == total) {
        err << "step " << step << "/" << total << " loss " << std::setprecision(6) << loss << "\n";
      }
    };
  }
};

std::string shape_text(const Shape& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Layer-swapping toolkit for style-based generators"};
  app.name("ganblend");
  app.require_subcommand(1);

  // init-base
  std::string config_arg;
  std::uint64_t init_seed = 0;
  std::string init_out;
  auto* init = app.add_subcommand("init-base", "Create a randomly initialized base model");
  init->add_option("--config", config_arg, "Generator config as JSON text or file (default desk config)");
  init->add_option("--seed", init_seed, "Initialization seed")->capture_default_str();
  init->add_option("-o,--out", init_out, "Output checkpoint")->required();

  // make-transfer
  std::string mt_base, mt_out;
  float mt_strength = 0.5f;
  std::uint64_t mt_seed = 1;
  auto* make_transfer =
      app.add_subcommand("make-transfer", "Derive a synthetic fine-tuned model from a base");
  make_transfer->add_option("--base", mt_base, "Base checkpoint")->required();
  make_transfer->add_option("--strength", mt_strength, "Perturbation strength")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  make_transfer->add_option("--seed", mt_seed, "Perturbation seed")->capture_default_str();
  make_transfer->add_option("-o,--out", mt_out, "Output checkpoint")->required();

  // inspect
  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect", "Print the parameter table of a checkpoint");
  inspect->add_option("model", inspect_path, "Checkpoint")->required();

  // blend
  std::string bl_base, bl_transfer, bl_schedule, bl_out, bl_low = "transfer", bl_mapping = "base";
  int bl_swap = 16;
  auto* blend = app.add_subcommand("blend", "Blend two checkpoints band by band");
  blend->add_option("--base", bl_base, "Base checkpoint")->required();
  blend->add_option("--transfer", bl_transfer, "Transfer checkpoint")->required();
  auto* swap_opt = blend->add_option("--swap-at", bl_swap, "Swap resolution r_swap")
                       ->capture_default_str();
  auto* low_opt = blend->add_option("--low-from", bl_low, "Donor of bands <= r_swap (base or transfer)")
                      ->capture_default_str();
  auto* sched_opt =
      blend->add_option("--schedule", bl_schedule, "Schedule as JSON text or file");
  sched_opt->excludes(swap_opt)->excludes(low_opt);
  blend->add_option("--mapping", bl_mapping, "Mapping network policy: base, transfer or alpha in [0,1]")
      ->capture_default_str();
  blend->add_option("-o,--out", bl_out, "Output checkpoint")->required();

  // sample
  std::string sm_model, sm_out;
  SampleGridSpec grid;
  auto* sample = app.add_subcommand("sample", "Render a grid of uncurated samples");
  sample->add_option("--model", sm_model, "Checkpoint")->required();
  sample->add_option("--seed", grid.seed, "Latent and noise seed")->capture_default_str();
  sample->add_option("--count", grid.count, "Number of samples")->capture_default_str();
  sample->add_option("--columns", grid.columns, "Grid columns")->capture_default_str();
  sample->add_option("-o,--out", sm_out, "Output PNG")->required();

  // project
  std::string pj_model, pj_target, pj_out, pj_recon;
  ProjectArgs pj_args;
  auto* project_cmd = app.add_subcommand("project", "Recover a latent for a target image");
  project_cmd->add_option("--model", pj_model, "Checkpoint")->required();
  project_cmd->add_option("--target", pj_target, "Target PNG at the model resolution")->required();
  project_cmd->add_option("-o,--out", pj_out, "Output latent JSON")->required();
  project_cmd->add_option("--reconstruction", pj_recon, "Also write the reconstruction PNG");
  pj_args.add_to(project_cmd);

  // toonify
  std::string tf_base, tf_blended, tf_target, tf_out, tf_latent, tf_recon;
  ProjectArgs tf_args;
  auto* toonify_cmd =
      app.add_subcommand("toonify", "Project into the base model and render with the blend");
  toonify_cmd->add_option("--base", tf_base, "Base checkpoint")->required();
  toonify_cmd->add_option("--blended", tf_blended, "Blended checkpoint")->required();
  toonify_cmd->add_option("--target", tf_target, "Target PNG at the model resolution")->required();
  toonify_cmd->add_option("-o,--out", tf_out, "Output PNG")->required();
  toonify_cmd->add_option("--latent", tf_latent, "Also write the latent JSON");
  toonify_cmd->add_option("--reconstruction", tf_recon, "Also write the reconstruction PNG");
  tf_args.add_to(toonify_cmd);

  // serve
  ServiceOptions sv;
  sv.port = service_port_from_env();
  std::vector<std::string> sv_models;
  auto* serve = app.add_subcommand("serve", "Run the local HTTP API");
  serve->add_option("--host", sv.host, "Bind address")->capture_default_str();
  serve->add_option("--port", sv.port, "Port (0 picks a free one; GANBLEND_PORT overrides the default)")
      ->capture_default_str()
      ->check(CLI::Range(0, 65535));
  serve->add_option("--static", sv.static_dir, "Directory served at /");
  serve->add_option("--model", sv_models, "Checkpoint to preload (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*init) {
      const GeneratorConfig config =
          config_arg.empty() ? GeneratorConfig{} : config_from_json(json_arg(config_arg));
      config.validate();
      save(init_random(config, init_seed), init_out);
    } else if (*make_transfer) {
      save(synth_transfer(load(mt_base), mt_strength, mt_seed), mt_out);
    } else if (*inspect) {
      const auto ckpt = load(inspect_path);
      out << "# max_resolution " << ckpt.meta().max_resolution << ", " << ckpt.size()
          << " parameters\n";
      for (const auto& spec : manifest(ckpt.meta())) {
        const auto key = classify(spec.name);
        out << spec.name << "\t" << to_string(key.stage) << "\t"
            << (key.resolution ? std::to_string(*key.resolution) : std::string("-")) << "\t"
            << to_string(key.role) << "\t" << shape_text(ckpt.param(spec.name).dims()) << "\n";
      }
    } else if (*blend) {
      const auto base = load(bl_base);
      const auto transfer = load(bl_transfer);
      BlendSchedule schedule;
      if (!bl_schedule.empty()) {
        schedule = schedule_from_json(json_arg(bl_schedule));
      } else {
        Donor low;
        if (bl_low == "transfer") {
          low = Donor::Transfer;
        } else if (bl_low == "base") {
          low = Donor::Base;
        } else {
          throw Error(ErrorKind::InvalidArgument,
                      "--low-from must be 'base' or 'transfer', got '" + bl_low + "'");
        }
        schedule = SwapSchedule{bl_swap, low};
      }
      save(blend_checkpoints(base, transfer, schedule, mapping_policy_from_string(bl_mapping)),
           bl_out);
    } else if (*sample) {
      grid.validate();
      write_png(sample_grid(load(sm_model), grid), sm_out);
    } else if (*project_cmd) {
      const auto ckpt = load(pj_model);
      const auto result =
          project(ckpt, decode_png(pj_target), pj_args.config(), pj_args.reporter(err));
      write_text(pj_out, latent_to_json(result, std::filesystem::path(pj_model).filename().string()));
      if (!pj_recon.empty()) encode_png(result.reconstruction, pj_recon);
      out << "final_loss " << std::setprecision(9) << result.final_loss << "\n";
    } else if (*toonify_cmd) {
      const auto base = load(tf_base);
      const auto blended = load(tf_blended);
      const auto result = toonify_detailed(base, blended, decode_png(tf_target), tf_args.config(),
                                           tf_args.reporter(err));
      encode_png(result.image, tf_out);
      if (!tf_latent.empty()) {
        write_text(tf_latent, latent_to_json(result.projection,
                                             std::filesystem::path(tf_base).filename().string()));
      }
      if (!tf_recon.empty()) encode_png(result.projection.reconstruction, tf_recon);
      out << "final_loss " << std::setprecision(9) << result.projection.final_loss << "\n";
    } else if (*serve) {
      Service service(sv);
      for (const auto& path : sv_models) {
        service.registry().put(load(path), std::filesystem::path(path).filename().string());
      }
      const int port = service.bind();
      out << "serving on http://" << sv.host << ":" << port << "\n" << std::flush;
      g_interrupted = false;
      auto prev_int = std::signal(SIGINT, on_signal);
      auto prev_term = std::signal(SIGTERM, on_signal);
      std::jthread watcher([&service](std::stop_token st) {
        while (!st.stop_requested() && !g_interrupted) {
          std::this_thread::sleep_for(std::chrono::milliseconds(100));
        }
        service.stop();
      });
      service.run();
      watcher.request_stop();
      watcher.join();
      std::signal(SIGINT, prev_int);
      std::signal(SIGTERM, prev_term);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace ganblend::cli
