#pragma once

// In-process experiment runner: one cloud service and one edge runtime
// connected over a loopback transport, plus report emission.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "edgeadapt/adapt_engine.hpp"
#include "edgeadapt/edge_runtime.hpp"
#include "edgeadapt/filtration.hpp"
#include "edgeadapt/model.hpp"
#include "edgeadapt/stream.hpp"

namespace edgeadapt {

enum class Scenario {
  NoAdapt,           // frozen edge, nothing uploaded
  UploadAll,         // every sample uploaded
  StaticThreshold,   // fixed e_max, no lower threshold
  DynamicThreshold,  // dynamic e_max, no lower threshold
  Cema,              // dynamic e_max and lower threshold
};

Scenario parse_scenario(std::string_view name);
std::string scenario_name(Scenario s);
std::vector<Scenario> all_scenarios();

/// Applies the scenario's switches on top of `base`.
FiltrationConfig filtration_for(Scenario s, FiltrationConfig base);

// Adaptation step size used by the harness on the synthetic streams. The
// component default stays at 0.00025.
inline constexpr float kHarnessLearningRate = 0.1f;

struct ExperimentConfig {
  Scenario scenario = Scenario::Cema;
  AdaptConfig adapt;
  FiltrationConfig filtration;
  EdgeConfig edge;
  std::string label;
  // Stream metadata copied into the report.
  std::string corruption = "none";
  int severity = 0;
  std::uint64_t stream_seed = 0;

  ExperimentConfig() {
    adapt.learning_rate = kHarnessLearningRate;
    edge.lockstep = true;
  }
};

struct RunReport {
  std::string scenario;
  std::string label;
  std::string corruption;
  int severity = 0;
  std::uint64_t seed = 0;
  std::uint64_t samples = 0;
  double accuracy = 0.0;
  std::uint64_t uploads = 0;
  double upload_fraction = 0.0;
  std::uint64_t queue_drops = 0;
  double ece = 0.0;
  std::uint64_t payload_bytes = 0;
  std::uint64_t steps = 0;
  double wall_time_s = 0.0;
  std::uint64_t final_version = 0;
  bool ok = true;
  std::string error;

  // Not serialized: kept for determinism checks and oracles.
  std::vector<std::uint32_t> predictions;
  std::optional<AffineParamSet> final_params;

  std::string to_json() const;
  /// Parses one object produced by to_json(); throws FormatError.
  static RunReport from_json(const std::string& text);
  static std::string csv_header();
  std::string csv_row() const;
};

RunReport run_experiment(const Model& foundation, const Model& edge, std::span<const Sample> stream,
                         const ExperimentConfig& cfg);

/// Generates the stream from `spec` and fills the stream metadata.
RunReport run_experiment(const Model& foundation, const Model& edge, const StreamSpec& spec,
                         ExperimentConfig cfg);

struct ScenarioSummary {
  std::string scenario;
  std::string label;
  std::size_t runs = 0;
  std::size_t failed = 0;
  double mean_accuracy = 0.0;
  double mean_uploads = 0.0;
  double mean_upload_fraction = 0.0;
  double mean_ece = 0.0;
  double mean_payload_bytes_per_step = 0.0;
};

/// Means over successful runs, grouped by (scenario, label) in first-seen order.
std::vector<ScenarioSummary> summarize(std::span<const RunReport> runs);

/// report.json: {"runs": [...], "summary": [...]}.
std::string report_json(std::span<const RunReport> runs);
std::string runs_csv(std::span<const RunReport> runs);

}  // namespace edgeadapt
