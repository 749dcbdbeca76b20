#include "edgeadapt/experiment.hpp"

#include <chrono>
#include <iomanip>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "edgeadapt/cloud_service.hpp"
#include "edgeadapt/metrics.hpp"

namespace edgeadapt {
namespace {

nlohmann::json run_to_json(const RunReport& r) {
  nlohmann::json j = {
      {"scenario", r.scenario},
      {"label", r.label},
      {"corruption", r.corruption},
      {"severity", r.severity},
      {"seed", r.seed},
      {"samples", r.samples},
      {"accuracy", r.accuracy},
      {"uploads", r.uploads},
      {"upload_fraction", r.upload_fraction},
      {"queue_drops", r.queue_drops},
      {"ece", r.ece},
      {"payload_bytes", r.payload_bytes},
      {"steps", r.steps},
      {"wall_time_s", r.wall_time_s},
      {"final_version", r.final_version},
      {"status", r.ok ? "ok" : "failed"},
      {"error", r.error},
  };
  return j;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

Scenario parse_scenario(std::string_view name) {
  if (name == "no-adapt") return Scenario::NoAdapt;
  if (name == "upload-all") return Scenario::UploadAll;
  if (name == "static-threshold") return Scenario::StaticThreshold;
  if (name == "dynamic-threshold") return Scenario::DynamicThreshold;
  if (name == "cema") return Scenario::Cema;
  throw ConfigError("unknown scenario '" + std::string(name) + "'");
}

std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::NoAdapt: return "no-adapt";
    case Scenario::UploadAll: return "upload-all";
    case Scenario::StaticThreshold: return "static-threshold";
    case Scenario::DynamicThreshold: return "dynamic-threshold";
    case Scenario::Cema: return "cema";
  }
  return "cema";
}

std::vector<Scenario> all_scenarios() {
  return {Scenario::NoAdapt, Scenario::UploadAll, Scenario::StaticThreshold,
          Scenario::DynamicThreshold, Scenario::Cema};
}

FiltrationConfig filtration_for(Scenario s, FiltrationConfig base) {
  switch (s) {
    case Scenario::NoAdapt:
    case Scenario::Cema:
      break;
    case Scenario::UploadAll:
      base.enabled = false;
      break;
    case Scenario::StaticThreshold:
      base.dynamic_threshold = false;
      base.low_entropy_filter = false;
      break;
    case Scenario::DynamicThreshold:
      base.low_entropy_filter = false;
      break;
  }
  return base;
}

std::string RunReport::to_json() const { return run_to_json(*this).dump(); }

RunReport RunReport::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunReport r;
    r.scenario = j.at("scenario").get<std::string>();
    r.label = j.at("label").get<std::string>();
    r.corruption = j.at("corruption").get<std::string>();
    r.severity = j.at("severity").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.samples = j.at("samples").get<std::uint64_t>();
    r.accuracy = j.at("accuracy").get<double>();
    r.uploads = j.at("uploads").get<std::uint64_t>();
    r.upload_fraction = j.at("upload_fraction").get<double>();
    r.queue_drops = j.at("queue_drops").get<std::uint64_t>();
    r.ece = j.at("ece").get<double>();
    r.payload_bytes = j.at("payload_bytes").get<std::uint64_t>();
    r.steps = j.at("steps").get<std::uint64_t>();
    r.wall_time_s = j.at("wall_time_s").get<double>();
    r.final_version = j.at("final_version").get<std::uint64_t>();
    r.ok = j.at("status").get<std::string>() == "ok";
    r.error = j.at("error").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad run record: ") + e.what());
  }
}

std::string RunReport::csv_header() {
  return "scenario,label,corruption,severity,seed,samples,accuracy,uploads,upload_fraction,"
         "queue_drops,ece,payload_bytes,steps,wall_time_s,final_version,status,error";
}

std::string RunReport::csv_row() const {
  std::ostringstream o;
  o << std::setprecision(10);
  o << csv_field(scenario) << ',' << csv_field(label) << ',' << csv_field(corruption) << ','
    << severity << ',' << seed << ',' << samples << ',' << accuracy << ',' << uploads << ','
    << upload_fraction << ',' << queue_drops << ',' << ece << ',' << payload_bytes << ',' << steps
    << ',' << wall_time_s << ',' << final_version << ',' << (ok ? "ok" : "failed") << ','
    << csv_field(error);
  return o.str();
}

RunReport run_experiment(const Model& foundation, const Model& edge, std::span<const Sample> stream,
                         const ExperimentConfig& cfg) {
  RunReport rep;
  rep.scenario = scenario_name(cfg.scenario);
  rep.label = cfg.label;
  rep.corruption = cfg.corruption;
  rep.severity = cfg.severity;
  rep.seed = cfg.stream_seed;
  rep.samples = stream.size();
  const auto t0 = std::chrono::steady_clock::now();

  try {
    std::vector<std::uint32_t> labels(stream.size());
    for (std::size_t i = 0; i < stream.size(); ++i) {
      if (!stream[i].label) throw ConfigError("experiment streams must carry labels");
      labels[i] = *stream[i].label;
    }
    FiltrationConfig fcfg = filtration_for(cfg.scenario, cfg.filtration);
    fcfg.num_classes = edge.spec.num_classes;

    EdgeRunResult result;
    if (cfg.scenario == Scenario::NoAdapt) {
      EdgeRuntime runtime(edge, fcfg, cfg.edge);
      result = runtime.run_stream(stream);
      rep.final_params = extract_affine(runtime.model(), runtime.version());
    } else {
      ServerConfig scfg;
      scfg.adapt = cfg.adapt;
      CloudService cloud(foundation, edge, scfg);
      auto acceptor = std::make_unique<LoopbackAcceptor>();
      LoopbackAcceptor* loop = acceptor.get();
      cloud.start(std::move(acceptor));
      EdgeRuntime runtime(edge, fcfg, cfg.edge, Connector([loop] { return loop->connect(); }));
      result = runtime.run_stream(stream);
      const ServeReport served = cloud.shutdown();
      if (result.stats.rejected_by_cloud) throw CompatibilityError("cloud rejected the edge model");
      rep.payload_bytes = served.broadcast_payload_bytes;
      rep.steps = served.steps;
      if (served.adapt_errors > 0) {
        throw NumericError(std::to_string(served.adapt_errors) + " adaptation steps aborted");
      }
      rep.final_params = extract_affine(runtime.model(), runtime.version());
    }

    rep.accuracy = accuracy(result.predictions, labels);
    rep.ece = compute_ece(result.confidences, result.predictions, labels);
    rep.uploads = result.stats.uploaded;
    rep.upload_fraction =
        stream.empty() ? 0.0 : static_cast<double>(rep.uploads) / static_cast<double>(stream.size());
    rep.queue_drops = result.stats.queue_drops;
    rep.final_version = result.stats.final_version;
    rep.predictions = std::move(result.predictions);
  } catch (const std::exception& e) {
    rep.ok = false;
    rep.error = e.what();
  }
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

RunReport run_experiment(const Model& foundation, const Model& edge, const StreamSpec& spec,
                         ExperimentConfig cfg) {
  const CorruptionKind kind = spec.mixed.empty() ? spec.corruption.kind : CorruptionKind::None;
  cfg.corruption = spec.mixed.empty() ? corruption_name(kind) : "mixed";
  cfg.stream_seed = spec.seed;
  const auto stream = gen_stream(spec);
  return run_experiment(foundation, edge, std::span<const Sample>(stream), cfg);
}

std::vector<ScenarioSummary> summarize(std::span<const RunReport> runs) {
  std::vector<ScenarioSummary> out;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  std::vector<double> step_bytes_sum;
  std::vector<std::size_t> step_bytes_n;
  for (const auto& r : runs) {
    const auto key = std::make_pair(r.scenario, r.label);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      out.push_back({r.scenario, r.label});
      step_bytes_sum.push_back(0.0);
      step_bytes_n.push_back(0);
    }
    auto& s = out[it->second];
    ++s.runs;
    if (!r.ok) {
      ++s.failed;
      continue;
    }
    s.mean_accuracy += r.accuracy;
    s.mean_uploads += static_cast<double>(r.uploads);
    s.mean_upload_fraction += r.upload_fraction;
    s.mean_ece += r.ece;
    if (r.steps > 0) {
      step_bytes_sum[it->second] += static_cast<double>(r.payload_bytes) / static_cast<double>(r.steps);
      ++step_bytes_n[it->second];
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& s = out[i];
    const double n = static_cast<double>(s.runs - s.failed);
    if (n > 0) {
      s.mean_accuracy /= n;
      s.mean_uploads /= n;
      s.mean_upload_fraction /= n;
      s.mean_ece /= n;
    }
    if (step_bytes_n[i] > 0) {
      s.mean_payload_bytes_per_step = step_bytes_sum[i] / static_cast<double>(step_bytes_n[i]);
    }
  }
  return out;
}

std::string report_json(std::span<const RunReport> runs) {
  nlohmann::json j;
  j["runs"] = nlohmann::json::array();
  for (const auto& r : runs) j["runs"].push_back(run_to_json(r));
  j["summary"] = nlohmann::json::array();
  for (const auto& s : summarize(runs)) {
    j["summary"].push_back({{"scenario", s.scenario},
                            {"label", s.label},
                            {"runs", s.runs},
                            {"failed", s.failed},
                            {"mean_accuracy", s.mean_accuracy},
                            {"mean_uploads", s.mean_uploads},
                            {"mean_upload_fraction", s.mean_upload_fraction},
                            {"mean_ece", s.mean_ece},
                            {"mean_payload_bytes_per_step", s.mean_payload_bytes_per_step}});
  }
  return j.dump(2);
}

std::string runs_csv(std::span<const RunReport> runs) {
  std::string out = RunReport::csv_header() + "\n";
  for (const auto& r : runs) out += r.csv_row() + "\n";
  return out;
}

}  // namespace edgeadapt
