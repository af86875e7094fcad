#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "diga/diffusion.hpp"
#include "diga/marketstate.hpp"
#include "diga/metaagent.hpp"
#include "diga/stylized.hpp"

namespace diga::pipe {

namespace fs = std::filesystem;

struct ScheduleConfig {
  std::size_t steps = 200;
  double beta_start = 1e-4;
  double beta_end = 0.02;
};

struct SamplerConfig {
  std::size_t ddim_steps = 20;  // 0 selects full ancestral DDPM
  double clamp = 5.0;
};

struct EvalConfig {
  std::vector<double> scales{1, 2, 4, 6, 8};
  std::size_t samples_per_bin = 8;
  std::size_t reference_days = 32;
  std::vector<std::size_t> lags = sf::kDefaultLags;
  std::size_t kl_bins = 50;
  double kl_eps = 1e-9;
};

// Everything a run needs; loaded from a JSON file where every section and key
// is optional and unknown keys are rejected.
struct RunConfig {
  ctl::DenoiserConfig model;
  bool model_length_set = false;
  ScheduleConfig schedule;
  ctl::TrainConfig train;
  ms::Indicator target = ms::Indicator::DailyReturn;
  SamplerConfig sampler;
  agent::MetaAgentParams agent;
  sf::SynthConfig synth;
  EvalConfig eval;
};

RunConfig load_run_config(const fs::path& path);
RunConfig parse_run_config(const std::string& json_text);
std::string run_config_json(const RunConfig& cfg);

// Corpus-derived statistics shipped with every checkpoint. Indicators whose
// values cannot be split into five bins are left out.
struct CorpusStats {
  ms::Normalizer norm;
  std::map<ms::Indicator, ms::ConditionBins> bins;
  std::map<ms::Indicator, ms::ScalarNormalizer> target_norm;
};

CorpusStats fit_stats(const std::vector<ms::MarketStateDay>& days);
std::string stats_json(const CorpusStats& stats);
// Accepts a stats file or a checkpoint sidecar.
CorpusStats parse_stats_json(const std::string& text);

struct ModelMeta {
  ctl::DenoiserConfig model;
  ScheduleConfig schedule;
  ctl::TrainConfig train;
  ms::Indicator target = ms::Indicator::DailyReturn;
  CorpusStats stats;
  std::uint64_t seed = 0;
};

struct Model {
  std::unique_ptr<ctl::Denoiser> net;
  ModelMeta meta;
  ctl::DiffusionSchedule schedule;
};

// Per-day conditioning targets for training: class labels (discrete encoder)
// or z-scored indicator values (continuous encoder).
std::vector<double> training_targets(const ModelMeta& meta,
                                     const std::vector<ms::MarketStateDay>& days);

// Builds and trains a model. The model length follows the corpus unless the
// config pins it, in which case a mismatch is a ConfigError.
Model train_model(const std::vector<ms::MarketStateDay>& days, const RunConfig& cfg,
                  std::uint64_t seed, std::vector<double>* losses = nullptr,
                  const std::function<void(std::size_t, double)>& on_step = {});

// Writes <path> (tensors) and <path>.json (metadata).
void save_model(const fs::path& path, const Model& m);
Model load_model(const fs::path& path);

struct SampleRequest {
  std::optional<std::string> target;  // must match the checkpoint when given
  std::optional<std::size_t> cls;     // class label, discrete models only
  std::optional<double> value;        // raw indicator value, continuous models only
  std::optional<std::size_t> median;  // bin k: class k, or the median of bin k
  double scale = 1.0;
  std::size_t count = 1;
  std::uint64_t seed = 0;
  SamplerConfig sampler;
};

struct SampledState {
  ms::MarketStateDay day;
  std::string target;                // indicator name or "none"
  std::optional<std::size_t> cls;
  std::optional<double> target_value;
  double scale = 0.0;
  std::uint64_t seed = 0;
  std::size_t index = 0;
};

// Unconditional when no condition is set. A class request on a continuous
// model, a value request on a discrete model, or a target other than the
// trained one is a ConfigError. Throws NumericalError on non-finite output.
std::vector<SampledState> sample_states(Model& m, const SampleRequest& req);

std::string state_json(const SampledState& s);
SampledState parse_state_json(const std::string& text);

// One generated day plus its summary.
struct RunRecord {
  std::string name;
  std::string target = "none";
  std::optional<std::size_t> cls;
  std::optional<double> target_value;
  double scale = 0.0;
  std::uint64_t seed = 0;
  ms::IndicatorSet realized;
  std::size_t orders = 0;
  std::size_t trades = 0;
  std::vector<double> minute_prices;
  std::vector<double> oir;
};

RunRecord generate_run(const std::string& name, const ms::MarketStateDay& states,
                       const agent::MetaAgentParams& gamma, std::uint64_t seed,
                       agent::GenerationResult* full = nullptr);
std::string run_json(const RunRecord& r);
RunRecord parse_run_json(const std::string& text);

struct FidelityReport {
  double minr = 0.0;
  double retac = 0.0;
  double volc = 0.0;
  double oir = 0.0;
};

FidelityReport fidelity(const std::vector<RunRecord>& reference,
                        const std::vector<RunRecord>& simulated, const EvalConfig& cfg);

struct ControlCell {
  std::string target;
  double scale = 0.0;  // 0 marks the unconditional baseline
  std::size_t cls = 0;
  double target_value = 0.0;
  double realized_mean = 0.0;
  double mse = 0.0;
  std::size_t runs = 0;
};

// Groups conditional runs by (target, scale, class) and scores them against
// their control target. Unconditional runs are scored against every bin
// median of `bins` so they act as the baseline for each class.
std::vector<ControlCell> controllability(const std::vector<RunRecord>& runs,
                                         const std::map<ms::Indicator, ms::ConditionBins>& bins);

std::string report_json(const FidelityReport& fid, const std::vector<ControlCell>& cells,
                        std::size_t reference_runs, std::size_t simulated_runs);

// Splitmix-derived stream seed for run `index` under a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace diga::pipe
