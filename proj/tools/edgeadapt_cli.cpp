// edgeadapt command-line tool: pretrain, gen-stream, serve, edge, run, report.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "edgeadapt/checkpoint.hpp"
#include "edgeadapt/cloud_service.hpp"
#include "edgeadapt/edge_runtime.hpp"
#include "edgeadapt/experiment.hpp"
#include "edgeadapt/metrics.hpp"
#include "edgeadapt/pretrain.hpp"
#include "edgeadapt/stream.hpp"
#include "edgeadapt/tcp.hpp"

namespace fs = std::filesystem;
using namespace edgeadapt;

namespace {

struct WorldOptions {
  std::string generator = "blobs";
  std::size_t num_classes = 10;
  std::size_t input_dim = 32;
  std::uint64_t world_seed = 1;

  void add(CLI::App* app) {
    app->add_option("--generator", generator, "blobs | rings")->capture_default_str();
    app->add_option("--classes", num_classes, "number of classes")->capture_default_str();
    app->add_option("--input-dim", input_dim, "feature width")->capture_default_str();
    app->add_option("--world-seed", world_seed, "class geometry seed")->capture_default_str();
  }
  StreamSpec spec() const {
    StreamSpec s;
    s.generator = parse_generator(generator);
    s.num_classes = num_classes;
    s.input_dim = input_dim;
    s.world_seed = world_seed;
    return s;
  }
};

struct CorruptionOptions {
  std::string corruption = "affine";
  int severity = 3;
  std::vector<std::string> mixed;

  void add(CLI::App* app) {
    app->add_option("--corruption", corruption, "none | gaussian | dropout | affine")
        ->capture_default_str();
    app->add_option("--severity", severity, "1..5")->check(CLI::Range(0, 5))->capture_default_str();
    app->add_option("--mixed", mixed, "corruptions applied in contiguous segments")->delimiter(',');
  }
  void apply(StreamSpec& s) const {
    s.corruption = Corruption::at(parse_corruption(corruption), severity);
    s.mixed.clear();
    for (const auto& m : mixed) s.mixed.push_back(Corruption::at(parse_corruption(m), severity));
  }
};

struct AdaptOptions {
  AdaptConfig cfg;
  void add(CLI::App* app) {
    app->add_option("--lr", cfg.learning_rate, "adaptation learning rate")->capture_default_str();
    app->add_option("--momentum", cfg.momentum)->capture_default_str();
    app->add_option("--alpha", cfg.alpha, "KL weight")->capture_default_str();
    app->add_option("--beta", cfg.beta, "pseudo-label CE weight")->capture_default_str();
    app->add_option("--upload-batch", cfg.upload_batch, "samples per adaptation step")
        ->capture_default_str();
    app->add_option("--replay-draw", cfg.replay_draw, "replayed samples per step")->capture_default_str();
    app->add_option("--buffer-capacity", cfg.buffer_capacity, "replay buffer capacity")
        ->capture_default_str();
    app->add_option("--adapt-seed", cfg.seed, "replay sampling seed")->capture_default_str();
  }
};

struct FilterOptions {
  FiltrationConfig cfg;
  void add(CLI::App* app) {
    app->add_option("--e-max-factor", cfg.e_max_factor)->capture_default_str();
    app->add_option("--e-min-factor", cfg.e_min_factor)->capture_default_str();
    app->add_option("--lambda", cfg.lambda)->capture_default_str();
    app->add_option("--redundancy", cfg.redundancy_enabled, "cosine redundancy filter (true/false)")
        ->capture_default_str();
    app->add_option("--redundancy-eps", cfg.redundancy_eps)->capture_default_str();
  }
};

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

void write_reports(const fs::path& dir, const std::vector<RunReport>& runs) {
  fs::create_directories(dir);
  write_text(dir / "report.json", report_json(runs) + "\n");
  write_text(dir / "runs.csv", runs_csv(runs));
}

sigset_t termination_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  return set;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cloud-edge elastic model adaptation"};
  app.require_subcommand(1);

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "train foundation and edge checkpoints on clean data");
  WorldOptions pre_world;
  pre_world.add(pre);
  PretrainConfig pre_cfg;
  std::string pre_out = ".";
  std::size_t pre_train = 10000, pre_holdout = 2000;
  pre->add_option("--out-dir", pre_out, "writes foundation.bin and edge.bin")->capture_default_str();
  pre->add_option("--epochs", pre_cfg.epochs)->capture_default_str();
  pre->add_option("--lr", pre_cfg.learning_rate)->capture_default_str();
  pre->add_option("--batch-size", pre_cfg.batch_size)->capture_default_str();
  pre->add_option("--label-smoothing", pre_cfg.label_smoothing)->capture_default_str();
  pre->add_option("--seed", pre_cfg.seed)->capture_default_str();
  pre->add_option("--train-samples", pre_train)->capture_default_str();
  pre->add_option("--holdout-samples", pre_holdout)->capture_default_str();
  pre->add_option("--min-accuracy", pre_cfg.min_accuracy, "held-out accuracy floor (0 disables)")->capture_default_str();

  // gen-stream
  auto* gen = app.add_subcommand("gen-stream", "write a corrupted synthetic stream file");
  WorldOptions gen_world;
  gen_world.add(gen);
  CorruptionOptions gen_corr;
  gen_corr.add(gen);
  std::string gen_out;
  std::size_t gen_samples = 20000;
  std::uint64_t gen_seed = 0;
  gen->add_option("--out", gen_out, "stream file")->required();
  gen->add_option("--samples", gen_samples)->capture_default_str();
  gen->add_option("--seed", gen_seed)->capture_default_str();

  // serve
  auto* serve = app.add_subcommand("serve", "run the cloud adaptation service");
  std::string serve_listen = "127.0.0.1:7070", serve_foundation, serve_edge, serve_log;
  AdaptOptions serve_adapt;
  std::size_t serve_max_sessions = 64;
  serve->add_option("--listen", serve_listen, "host:port (port 0 picks one)")->capture_default_str();
  serve->add_option("--foundation", serve_foundation, "foundation checkpoint")->required();
  serve->add_option("--edge", serve_edge, "edge checkpoint")->required();
  serve->add_option("--max-sessions", serve_max_sessions)->capture_default_str();
  serve->add_option("--step-log", serve_log, "append one JSON line per step to this file");
  serve_adapt.add(serve);

  // edge
  auto* edge = app.add_subcommand("edge", "run an edge node over a stream file");
  std::string edge_cloud, edge_stream, edge_model;
  bool edge_offline = false;
  EdgeConfig edge_cfg;
  FilterOptions edge_filter;
  edge->add_option("--cloud", edge_cloud, "host:port of the cloud service");
  edge->add_option("--stream", edge_stream, "stream file")->required();
  edge->add_option("--model", edge_model, "edge checkpoint")->required();
  edge->add_option("--batch-size", edge_cfg.batch_size)->capture_default_str();
  edge->add_option("--interval", edge_cfg.update_interval, "apply every K-th update")->capture_default_str();
  edge->add_option("--queue-cap", edge_cfg.queue_capacity)->capture_default_str();
  edge->add_option("--edge-id", edge_cfg.edge_id)->capture_default_str();
  edge->add_flag("--lockstep", edge_cfg.lockstep, "wait for each upload's ack before the next batch");
  edge->add_flag("--offline", edge_offline, "infer and filter only");
  edge_filter.add(edge);

  // run
  auto* run = app.add_subcommand("run", "run in-process experiments and print one JSON line per run");
  WorldOptions run_world;
  run_world.add(run);
  CorruptionOptions run_corr;
  run_corr.add(run);
  AdaptOptions run_adapt;
  run_adapt.cfg.learning_rate = kHarnessLearningRate;
  run_adapt.add(run);
  FilterOptions run_filter;
  run_filter.add(run);
  std::string run_foundation, run_edge, run_out;
  std::vector<std::string> run_scenarios = {"no-adapt", "upload-all", "static-threshold",
                                            "dynamic-threshold", "cema"};
  std::size_t run_seeds = 1, run_samples = 20000, run_interval = 1, run_batch = 64;
  std::uint64_t run_first_seed = 0;
  std::string run_label;
  run->add_option("--foundation", run_foundation, "foundation checkpoint (pretrained if omitted)");
  run->add_option("--edge", run_edge, "edge checkpoint (pretrained if omitted)");
  run->add_option("--scenarios", run_scenarios, "scenario list")->delimiter(',')->capture_default_str();
  run->add_option("--seeds", run_seeds, "stream seeds per scenario")->capture_default_str();
  run->add_option("--first-seed", run_first_seed)->capture_default_str();
  run->add_option("--samples", run_samples)->capture_default_str();
  run->add_option("--interval", run_interval)->capture_default_str();
  run->add_option("--batch-size", run_batch)->capture_default_str();
  run->add_option("--label", run_label);
  run->add_option("--out", run_out, "also write report.json and runs.csv to this directory");
  PretrainConfig run_pre;
  run->add_option("--pretrain-epochs", run_pre.epochs, "used when checkpoints are omitted")->capture_default_str();
  run->add_option("--min-accuracy", run_pre.min_accuracy, "held-out accuracy floor (0 disables)")
      ->capture_default_str();

  // report
  auto* rep = app.add_subcommand("report", "aggregate JSON-lines run records");
  std::vector<std::string> rep_inputs;
  std::string rep_out;
  rep->add_option("inputs", rep_inputs, "files produced by `run`")->required();
  rep->add_option("--out", rep_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*pre) {
      const StreamSpec world = pre_world.spec();
      const auto pair = pretrain_pair(world, default_foundation_spec(world.input_dim, world.num_classes),
                                      default_edge_spec(world.input_dim, world.num_classes), pre_cfg,
                                      pre_train, pre_holdout);
      fs::create_directories(pre_out);
      save_model(pair.foundation, fs::path(pre_out) / "foundation.bin");
      save_model(pair.edge, fs::path(pre_out) / "edge.bin");
      std::cout << nlohmann::json{{"foundation_accuracy", pair.foundation_accuracy},
                                  {"edge_accuracy", pair.edge_accuracy},
                                  {"foundation_params", pair.foundation.spec.parameter_count()},
                                  {"edge_params", pair.edge.spec.parameter_count()}}
                       .dump()
                << "\n";
      return 0;
    }

    if (*gen) {
      StreamSpec spec = gen_world.spec();
      gen_corr.apply(spec);
      spec.num_samples = gen_samples;
      spec.seed = gen_seed;
      save_stream(gen_out, spec.num_classes, spec.input_dim, gen_stream(spec));
      return 0;
    }

    if (*serve) {
      // Block termination signals before any thread starts; wait for them below.
      sigset_t sigs = termination_signals();
      pthread_sigmask(SIG_BLOCK, &sigs, nullptr);

      ServerConfig scfg;
      scfg.adapt = serve_adapt.cfg;
      scfg.max_sessions = serve_max_sessions;
      std::ofstream step_log;
      if (!serve_log.empty()) {
        step_log.open(serve_log, std::ios::app);
        if (!step_log) throw FormatError("cannot open step log " + serve_log);
        scfg.step_log = &step_log;
      }
      CloudService cloud(load_model(serve_foundation), load_model(serve_edge), scfg);
      auto acceptor = std::make_unique<TcpAcceptor>(parse_endpoint(serve_listen));
      std::cerr << "listening on port " << acceptor->port() << std::endl;
      cloud.start(std::move(acceptor));
      int sig = 0;
      sigwait(&sigs, &sig);
      std::cout << cloud.shutdown().to_json() << "\n";
      return 0;
    }

    if (*edge) {
      const StreamFile stream = load_stream(edge_stream);
      Model model = load_model(edge_model);
      FiltrationConfig fcfg = edge_filter.cfg;
      fcfg.num_classes = model.spec.num_classes;
      std::optional<Connector> connector;
      if (!edge_offline) {
        if (edge_cloud.empty()) throw ConfigError("--cloud is required unless --offline is given");
        const Endpoint ep = parse_endpoint(edge_cloud);
        connector = Connector([ep] { return tcp_connect(ep); });
      }
      EdgeRuntime runtime(std::move(model), fcfg, edge_cfg, connector);
      const EdgeRunResult res = runtime.run_stream(stream.samples);

      nlohmann::json out = nlohmann::json::parse(res.stats.to_json());
      out["predictions"] = res.predictions;
      std::vector<std::uint32_t> labels;
      for (const auto& s : stream.samples) labels.push_back(s.label.value_or(0));
      out["accuracy"] = accuracy(res.predictions, labels);
      out["ece"] = compute_ece(res.confidences, res.predictions, labels);
      std::cout << out.dump() << "\n";
      return 0;
    }

    if (*run) {
      StreamSpec base = run_world.spec();
      run_corr.apply(base);
      base.num_samples = run_samples;
      Model foundation, edge_m;
      if (!run_foundation.empty() && !run_edge.empty()) {
        foundation = load_model(run_foundation);
        edge_m = load_model(run_edge);
      } else {
        auto pair = pretrain_pair(base, default_foundation_spec(base.input_dim, base.num_classes),
                                  default_edge_spec(base.input_dim, base.num_classes), run_pre);
        foundation = std::move(pair.foundation);
        edge_m = std::move(pair.edge);
      }
      std::vector<RunReport> runs;
      for (const auto& name : run_scenarios) {
        for (std::size_t k = 0; k < run_seeds; ++k) {
          StreamSpec spec = base;
          spec.seed = run_first_seed + k;
          ExperimentConfig cfg;
          cfg.scenario = parse_scenario(name);
          cfg.adapt = run_adapt.cfg;
          cfg.filtration = run_filter.cfg;
          cfg.edge.update_interval = run_interval;
          cfg.edge.batch_size = run_batch;
          cfg.label = run_label;
          cfg.severity = run_corr.severity;
          runs.push_back(run_experiment(foundation, edge_m, spec, cfg));
          std::cout << runs.back().to_json() << std::endl;
        }
      }
      if (!run_out.empty()) write_reports(run_out, runs);
      return 0;
    }

    if (*rep) {
      std::vector<RunReport> runs;
      for (const auto& in : rep_inputs) {
        for (const auto& line : read_lines(in)) runs.push_back(RunReport::from_json(line));
      }
      write_reports(rep_out, runs);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
