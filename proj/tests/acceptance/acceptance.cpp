// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "edgeadapt/adapt_engine.hpp"
#include "edgeadapt/byte_stream.hpp"
#include "edgeadapt/checkpoint.hpp"
#include "edgeadapt/edge_runtime.hpp"
#include "edgeadapt/experiment.hpp"
#include "edgeadapt/metrics.hpp"
#include "edgeadapt/objectives.hpp"
#include "edgeadapt/pretrain.hpp"
#include "edgeadapt/wire.hpp"
#include "gradient_check.hpp"
#include "oracles.hpp"
#include "stalled_stream.hpp"

namespace {

using namespace edgeadapt;
using Clock = std::chrono::steady_clock;

constexpr std::size_t kStreamLength = 20000;
constexpr std::uint64_t kSeeds[] = {1, 2, 3, 4, 5};

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Pretrained models and a cache of experiment runs keyed by a short tag.
class Bench {
 public:
  Bench() {
    const StreamSpec world;
    pair_ = pretrain_pair(world, default_foundation_spec(), default_edge_spec(), PretrainConfig{});
    std::cout << fmt("# pretrained: foundation %.4f edge %.4f held-out accuracy", pair_.foundation_accuracy,
                     pair_.edge_accuracy)
              << std::endl;
  }
  const Model& foundation() const { return pair_.foundation; }
  const Model& edge() const { return pair_.edge; }

  static StreamSpec stream(int severity, std::uint64_t seed) {
    StreamSpec s;
    s.num_samples = kStreamLength;
    s.seed = seed;
    s.corruption = Corruption::at(CorruptionKind::AffineDistort, severity);
    return s;
  }

  const RunReport& run(const std::string& tag, int severity, std::uint64_t seed, ExperimentConfig cfg) {
    const std::string key = tag + "/" + std::to_string(severity) + "/" + std::to_string(seed);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    cfg.severity = severity;
    cfg.label = tag;
    RunReport r = run_experiment(pair_.foundation, pair_.edge, stream(severity, seed), cfg);
    if (!r.ok) throw std::runtime_error(key + " failed: " + r.error);
    std::cout << "# " << key << fmt(" acc %.4f uploads %llu steps %llu (%.1fs)", r.accuracy,
                                    static_cast<unsigned long long>(r.uploads),
                                    static_cast<unsigned long long>(r.steps), r.wall_time_s)
              << std::endl;
    return cache_.emplace(key, std::move(r)).first->second;
  }

  const RunReport& scenario(Scenario s, int severity, std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.scenario = s;
    return run(scenario_name(s), severity, seed, cfg);
  }

  struct Means {
    double accuracy = 0.0;
    double uploads = 0.0;
  };
  template <class F>
  Means mean_over_seeds(F&& one) {
    Means m;
    for (std::uint64_t seed : kSeeds) {
      const RunReport& r = one(seed);
      m.accuracy += r.accuracy;
      m.uploads += static_cast<double>(r.uploads);
    }
    const double n = static_cast<double>(std::size(kSeeds));
    m.accuracy /= n;
    m.uploads /= n;
    return m;
  }

 private:
  PretrainedPair pair_;
  std::map<std::string, RunReport> cache_;
};

// 1. Analytic affine gradients of both losses against central differences.
Verdict gradient_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst_we = 0.0, worst_kd = 0.0, plain = 0.0;
  std::size_t redraws = 0;
  constexpr int kConfigs = 25;
  for (int i = 0; i < kConfigs; ++i) {
    const auto cfg = gradcheck::random_config(rng);
    const auto we = gradcheck::check_weighted_entropy(rng, cfg);
    const auto kd = gradcheck::check_distillation(rng, cfg);
    worst_we = std::max(worst_we, we.max_rel);
    worst_kd = std::max(worst_kd, kd.max_rel);
    plain = std::max({plain, we.max_rel_plain, kd.max_rel_plain});
    redraws += we.redraws + kd.redraws;
  }
  const double secs = seconds_since(t0);
  return {worst_we < 1e-4 && worst_kd < 1e-4 && secs < 30.0,
          fmt("%d configs per loss, h=1e-3 extrapolated max rel err entropy %.2e distillation %.2e "
              "(single difference %.2e), %zu kink redraws, %.2fs",
              kConfigs, worst_we, worst_kd, plain, redraws, secs)};
}

// 2. Upload ordering static > dynamic > cema with flat accuracy.
Verdict filtration_ordering(Bench& b) {
  const auto st = b.mean_over_seeds([&](auto s) -> auto& { return b.scenario(Scenario::StaticThreshold, 3, s); });
  const auto dy = b.mean_over_seeds([&](auto s) -> auto& { return b.scenario(Scenario::DynamicThreshold, 3, s); });
  const auto ce = b.mean_over_seeds([&](auto s) -> auto& { return b.scenario(Scenario::Cema, 3, s); });
  const double gap = 0.02 * static_cast<double>(kStreamLength);
  const double spread = std::max({st.accuracy, dy.accuracy, ce.accuracy}) -
                        std::min({st.accuracy, dy.accuracy, ce.accuracy});
  const bool ok = st.uploads - dy.uploads > gap && dy.uploads - ce.uploads > gap && spread * 100.0 <= 1.5;
  return {ok, fmt("uploads static %.0f dynamic %.0f cema %.0f (min gap %.0f), accuracy %.2f/%.2f/%.2f spread "
                  "%.2f pts",
                  st.uploads, dy.uploads, ce.uploads, gap, 100 * st.accuracy, 100 * dy.accuracy,
                  100 * ce.accuracy, 100 * spread)};
}

// 3. Adaptation beats the frozen model at the strongest shift.
Verdict adaptation_benefit(Bench& b) {
  const auto na = b.mean_over_seeds([&](auto s) -> auto& { return b.scenario(Scenario::NoAdapt, 5, s); });
  const auto ua = b.mean_over_seeds([&](auto s) -> auto& { return b.scenario(Scenario::UploadAll, 5, s); });
  const auto ce = b.mean_over_seeds([&](auto s) -> auto& { return b.scenario(Scenario::Cema, 5, s); });
  const bool ok = ce.accuracy - na.accuracy >= 0.05 && ua.accuracy > na.accuracy && ce.uploads < 0.6 * ua.uploads;
  return {ok, fmt("accuracy no-adapt %.2f upload-all %.2f cema %.2f, cema uploads %.1f%% of upload-all",
                  100 * na.accuracy, 100 * ua.accuracy, 100 * ce.accuracy, 100 * ce.uploads / ua.uploads)};
}

// 4. Replay buffer helps.
Verdict replay_benefit(Bench& b) {
  const auto with = b.mean_over_seeds([&](auto s) -> auto& { return b.scenario(Scenario::Cema, 5, s); });
  const auto without = b.mean_over_seeds([&](auto s) -> auto& {
    ExperimentConfig cfg;
    cfg.adapt.buffer_capacity = 0;
    return b.run("cema-no-replay", 5, s, cfg);
  });
  const double gain = 100 * (with.accuracy - without.accuracy);
  return {gain >= 1.5, fmt("buffer 10000 %.2f vs buffer 0 %.2f (+%.2f pts)", 100 * with.accuracy,
                           100 * without.accuracy, gain)};
}

// 5. Update payload against the formula and the full checkpoint.
Verdict payload_reduction(Bench& b) {
  const RunReport& r = b.scenario(Scenario::Cema, 5, kSeeds[0]);
  if (r.steps == 0) return {false, "no adaptation steps were run"};
  const double measured = static_cast<double>(r.payload_bytes) / static_cast<double>(r.steps);
  std::size_t analytic = 10 + 8;
  for (std::size_t w : b.edge().spec.hidden_dims) analytic += 2 + 4 + 4 + 8 * w;
  const std::size_t checkpoint = serialize_model(b.edge()).size();
  const double ratio = measured / static_cast<double>(checkpoint);
  const bool ok = measured == static_cast<double>(analytic) && ratio <= 0.01;
  return {ok, fmt("%.0f bytes per update (formula %zu), checkpoint %zu bytes, ratio %.3f%%", measured, analytic,
                  checkpoint, 100 * ratio)};
}

// 6. Wire codec and framing.
wire::Message random_message(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> kind(0, 4), small(0, 8);
  std::normal_distribution<float> normal(0.0f, 5.0f);
  auto vec = [&](std::size_t n) {
    std::vector<float> v(n);
    for (auto& x : v) x = normal(rng);
    return v;
  };
  switch (kind(rng)) {
    case 0:
      return wire::ClientHello{static_cast<std::uint32_t>(rng()), rng()};
    case 1:
      return wire::ServerHello{(rng() & 1) != 0, rng()};
    case 2: {
      wire::SampleBatch m{rng(), {}};
      const std::size_t width = static_cast<std::size_t>(small(rng));
      for (int i = small(rng); i > 0; --i) m.samples.push_back({rng(), vec(width)});
      return m;
    }
    case 3: {
      wire::ParamUpdate m{rng(), {}};
      for (int i = small(rng); i > 0; --i) {
        const std::size_t width = static_cast<std::size_t>(small(rng));
        m.layers.push_back({static_cast<std::uint16_t>(rng()), vec(width), vec(width)});
      }
      return m;
    }
    default:
      return wire::Ack{rng()};
  }
}

std::vector<std::uint8_t> load_hex(const std::string& name) {
  std::ifstream in(std::string(EDGEADAPT_FIXTURE_DIR) + "/" + name + ".hex");
  if (!in) throw std::runtime_error("missing fixture " + name);
  std::string hex;
  in >> hex;
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>(std::stoi(hex.substr(i, 2), nullptr, 16)));
  }
  return out;
}

// Replays bytes in reads of at most `chunk` bytes; records writes.
class ChunkedStream : public ByteStream {
 public:
  ChunkedStream(std::vector<std::uint8_t> bytes, std::size_t chunk) : bytes_(std::move(bytes)), chunk_(chunk) {}
  std::size_t read_some(std::span<std::uint8_t> out) override {
    const std::size_t n = std::min({chunk_, out.size(), bytes_.size() - pos_});
    std::copy_n(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), n, out.begin());
    pos_ += n;
    return n;
  }
  void write_all(std::span<const std::uint8_t> data) override { written.insert(written.end(), data.begin(), data.end()); }
  void close() override {}
  std::vector<std::uint8_t> written;

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t chunk_;
  std::size_t pos_ = 0;
};

Verdict protocol() {
  std::mt19937_64 rng(606);
  constexpr int kFuzz = 10000;
  int identity = 0;
  std::vector<std::vector<std::uint8_t>> payloads;
  for (int i = 0; i < kFuzz; ++i) {
    const auto m = random_message(rng);
    const auto bytes = wire::encode(m);
    const auto back = wire::decode(bytes);
    identity += back == m && wire::encode(back) == bytes;
    if (i < 300) payloads.push_back(bytes);
  }

  const std::vector<std::pair<std::string, wire::Message>> golden{
      {"client_hello", wire::ClientHello{7, 0x0123456789ABCDEFULL}},
      {"server_hello", wire::ServerHello{true, 42}},
      {"sample_batch", wire::SampleBatch{3, {{10, {1.0f, -2.5f}}, {11, {0.5f, 0.25f}}}}},
      {"sample_batch_empty", wire::SampleBatch{9, {}}},
      {"param_update", wire::ParamUpdate{5, {{0, {1.0f, 2.0f}, {0.0f, -1.0f}}, {1, {0.5f}, {0.125f}}}}},
      {"ack_zero", wire::Ack{0}},
      {"ack", wire::Ack{0x1122334455667788ULL}},
  };
  std::size_t golden_ok = 0;
  for (const auto& [name, msg] : golden) {
    const auto want = load_hex(name);
    golden_ok += wire::encode(msg) == want && wire::decode(want) == msg;
  }

  ChunkedStream sink({}, 1);
  for (const auto& p : payloads) write_frame(sink, p);
  std::size_t chunk_ok = 0;
  const std::vector<std::size_t> chunks{1, 2, 3, 7, 64, sink.written.size()};
  for (std::size_t chunk : chunks) {
    ChunkedStream src(sink.written, chunk);
    std::vector<std::vector<std::uint8_t>> got;
    while (auto f = read_frame(src)) got.push_back(std::move(*f));
    chunk_ok += got == payloads;
  }
  const bool ok = identity == kFuzz && golden_ok == golden.size() && chunk_ok == chunks.size();
  return {ok, fmt("fuzz identity %d/%d, golden %zu/%zu, chunked framing %zu/%zu", identity, kFuzz, golden_ok,
                  golden.size(), chunk_ok, chunks.size())};
}

// 7. Stalled transport: every sample predicted, drops follow the policy.
Verdict non_blocking_edge(Bench& b) {
  const auto stream = gen_stream(Bench::stream(5, kSeeds[0]));
  FiltrationConfig f;
  f.num_classes = b.edge().spec.num_classes;
  EdgeConfig cfg;
  cfg.drain_timeout = std::chrono::milliseconds(100);
  Connector stalled = [] { return std::make_unique<testing_support::StalledStream>(); };
  EdgeRuntime rt(b.edge(), f, cfg, stalled);
  const auto t0 = Clock::now();
  const auto res = rt.run_stream(stream);
  const double secs = seconds_since(t0);

  std::vector<std::pair<std::uint64_t, float>> pushes;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    if (res.accepted[i]) pushes.push_back({stream[i].id, res.entropies[i]});
  }
  const auto replay = oracle::replay_stalled_queue(pushes, cfg.queue_capacity);
  bool same = res.dropped.size() == replay.dropped.size();
  for (std::size_t i = 0; same && i < res.dropped.size(); ++i) {
    same = res.dropped[i].sample.id == replay.dropped[i].first && res.dropped[i].entropy == replay.dropped[i].second;
  }
  const bool accounted = res.stats.uploaded + res.stats.queue_drops + res.stats.unsent == pushes.size();
  const bool ok = res.predictions.size() == stream.size() && same && accounted;
  return {ok, fmt("%zu/%zu predicted in %.2fs, %zu accepted, %llu dropped (oracle %zu, order %s), %llu unsent",
                  res.predictions.size(), stream.size(), secs, pushes.size(),
                  static_cast<unsigned long long>(res.stats.queue_drops), replay.dropped.size(),
                  same ? "matches" : "differs", static_cast<unsigned long long>(res.stats.unsent))};
}

// 8. Applying every fifth update costs little accuracy.
Verdict interval_robustness(Bench& b) {
  const auto k1 = b.mean_over_seeds([&](auto s) -> auto& { return b.scenario(Scenario::Cema, 5, s); });
  const auto k5 = b.mean_over_seeds([&](auto s) -> auto& {
    ExperimentConfig cfg;
    cfg.edge.update_interval = 5;
    return b.run("cema-k5", 5, s, cfg);
  });
  const double diff = 100 * std::abs(k1.accuracy - k5.accuracy);
  return {diff <= 1.5, fmt("K=1 %.2f K=5 %.2f (|diff| %.2f pts)", 100 * k1.accuracy, 100 * k5.accuracy, diff)};
}

// 9. A small foundation step does not increase the weighted entropy.
Verdict descent() {
  std::mt19937_64 rng(909);
  int ok = 0;
  constexpr int kTrials = 20;
  for (int t = 0; t < kTrials; ++t) {
    const ModelSpec spec{8, {16, 16}, 5};
    Model m = init_model(spec, rng());
    std::uniform_real_distribution<float> g(0.5f, 2.0f), bb(-0.5f, 0.5f);
    for (auto& blk : m.params.blocks) {
      for (auto& v : blk.gamma) v = g(rng);
      for (auto& v : blk.beta) v = bb(rng);
    }
    std::normal_distribution<float> normal;
    std::vector<Sample> batch(8 + rng() % 25);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      batch[i].id = i;
      batch[i].features.resize(spec.input_dim);
      for (auto& v : batch[i].features) v = normal(rng);
    }
    AdaptConfig cfg;
    cfg.learning_rate = 1e-4f;
    const double e_ref = cfg.resolved_e_max_ref(spec.num_classes);
    const Tensor2 x = stack_features(std::span<const Sample>(batch));
    const auto before_logits = forward_pure(m, x, NormMode::BatchStats).cast<double>();
    std::vector<double> w(batch.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = std::exp(e_ref - static_cast<double>(oracle::entropy(before_logits.row(i))));
    }
    const long double before = oracle::weighted_entropy(before_logits, w);
    SgdMomentum opt(cfg.learning_rate, cfg.momentum);
    adapt_foundation(m, opt, batch, cfg);
    const long double after = oracle::weighted_entropy(forward_pure(m, x, NormMode::BatchStats).cast<double>(), w);
    ok += after <= before;
  }
  return {ok >= 19, fmt("%d/%d trials did not increase the loss", ok, kTrials)};
}

// 10. ECE against brute-force binning.
Verdict ece_oracle() {
  std::mt19937_64 rng(1010);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 2000;
    const std::size_t classes = 2 + rng() % 9;
    const std::size_t bins = 1 + rng() % 30;
    auto z = oracle::random_batch(rng, n, classes).cast<float>();
    const float temp = 0.5f + static_cast<float>(rng() % 8);
    for (auto& v : z.data) v *= temp;
    const auto probs = softmax_entropy(z).probs;
    std::vector<std::uint32_t> labels(n);
    for (auto& y : labels) y = static_cast<std::uint32_t>(rng() % classes);
    std::vector<double> conf(n);
    std::vector<int> correct(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = probs.row(i);
      const auto p = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      conf[i] = row[p];
      correct[i] = p == labels[i];
    }
    worst = std::max(worst, std::abs(compute_ece(probs, labels, bins) - oracle::ece(conf, correct, static_cast<int>(bins))));
  }
  const std::vector<float> ones(300, 1.0f);
  std::vector<std::uint32_t> preds(300), right(300), wrong(300);
  for (std::uint32_t i = 0; i < 300; ++i) {
    preds[i] = right[i] = i % 4;
    wrong[i] = (i + 1) % 4;
  }
  const double perfect = compute_ece(ones, preds, right);
  const double anti = compute_ece(ones, preds, wrong);
  return {worst <= 1e-9 && perfect == 0.0 && anti == 1.0,
          fmt("max |diff| %.2e over 200 random inputs, perfect %.1f, anti-perfect %.1f", worst, perfect, anti)};
}

// 11. Two identical loopback runs agree bit for bit.
Verdict determinism(Bench& b) {
  ExperimentConfig cfg;
  cfg.scenario = Scenario::Cema;
  const auto spec = Bench::stream(4, 11);
  const auto a = run_experiment(b.foundation(), b.edge(), spec, cfg);
  const auto c = run_experiment(b.foundation(), b.edge(), spec, cfg);
  const bool ok = a.ok && c.ok && a.predictions == c.predictions && a.uploads == c.uploads &&
                  a.final_params == c.final_params && a.final_params.has_value() && a.steps > 0;
  return {ok, fmt("predictions %s, uploads %llu vs %llu, final params at v%llu %s",
                  a.predictions == c.predictions ? "identical" : "differ", static_cast<unsigned long long>(a.uploads),
                  static_cast<unsigned long long>(c.uploads), static_cast<unsigned long long>(a.final_version),
                  a.final_params == c.final_params ? "identical" : "differ")};
}

}  // namespace

int main() {
  std::cout.setf(std::ios::unitbuf);
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Verdict()>& check) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failures += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << v.detail << std::endl;
  };

  report(1, "gradient oracle", gradient_oracle);

  std::unique_ptr<Bench> bench;
  try {
    bench = std::make_unique<Bench>();
  } catch (const std::exception& e) {
    std::cout << "# pretraining failed: " << e.what() << std::endl;
  }
  auto with_bench = [&](auto fn) {
    return [&, fn]() -> Verdict {
      if (!bench) return {false, "pretraining failed"};
      return fn(*bench);
    };
  };
  report(2, "filtration ordering", with_bench(filtration_ordering));
  report(3, "adaptation benefit", with_bench(adaptation_benefit));
  report(4, "replay benefit", with_bench(replay_benefit));
  report(5, "payload reduction", with_bench(payload_reduction));
  report(6, "protocol", protocol);
  report(7, "non-blocking edge", with_bench(non_blocking_edge));
  report(8, "interval robustness", with_bench(interval_robustness));
  report(9, "descent", descent);
  report(10, "calibration error oracle", ece_oracle);
  report(11, "determinism", with_bench(determinism));

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
