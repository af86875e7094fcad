#include "diga/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "diga/checkpoint.hpp"
#include "diga/error.hpp"
#include "diga/io.hpp"

namespace diga::pipe {

using nlohmann::json;

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// ---- config parsing ----

namespace {

// Reads typed keys out of one JSON object and rejects anything left over.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(name_ + ": expected an object");
  }
  ~Section() = default;

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(name_ + "." + key + ": wrong type");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(name_ + ": unknown key \"" + k + "\"");
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_model(const json& j, ctl::DenoiserConfig& m, bool& length_set) {
  Section s(j, "model");
  length_set = s.has("length");
  s.get("length", m.length);
  s.get("channels", m.channels);
  s.get("base_width", m.base_width);
  s.get("multipliers", m.multipliers);
  s.get("res_blocks", m.res_blocks);
  s.get("kernel", m.kernel);
  m.padding = m.kernel / 2;
  s.get("padding", m.padding);
  s.get("embed_dim", m.embed_dim);
  s.get("cond_hidden", m.cond_hidden);
  s.get("num_bins", m.num_bins);
  std::string enc = ctl::to_string(m.encoder), norm = ctl::to_string(m.norm);
  s.get("encoder", enc);
  s.get("norm", norm);
  try {
    m.encoder = ctl::encoder_mode_from_string(enc);
    m.norm = ctl::norm_kind_from_string(norm);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  s.get("norm_groups", m.norm_groups);
  s.get("attention", m.attention);
  s.get("zero_init_output", m.zero_init_output);
  s.finish();
}

void read_schedule(const json& j, ScheduleConfig& c) {
  Section s(j, "schedule");
  s.get("steps", c.steps);
  s.get("beta_start", c.beta_start);
  s.get("beta_end", c.beta_end);
  s.finish();
}

void read_train(const json& j, ctl::TrainConfig& c) {
  Section s(j, "train");
  s.get("epochs", c.epochs);
  s.get("batch_size", c.batch_size);
  s.get("lr", c.lr);
  s.get("weight_decay", c.weight_decay);
  s.get("p_uncond", c.p_uncond);
  s.get("grad_clip", c.grad_clip);
  s.get("max_steps", c.max_steps);
  s.finish();
}

void read_sampler(const json& j, SamplerConfig& c) {
  Section s(j, "sampler");
  s.get("ddim_steps", c.ddim_steps);
  s.get("clamp", c.clamp);
  s.finish();
}

void read_agent(const json& j, agent::MetaAgentParams& g) {
  Section s(j, "agent");
  s.get("lambda_f", g.lambda_f);
  s.get("lambda_c", g.lambda_c);
  s.get("lambda_n", g.lambda_n);
  s.get("tau0", g.tau0);
  s.get("alpha0", g.alpha0);
  s.get("sigma_noise", g.sigma_noise);
  s.get("p0", g.p0);
  s.get("s0", g.s0);
  s.get("c0", g.c0);
  s.get("lambda_min", g.lambda_min);
  s.get("lambda_max", g.lambda_max);
  s.get("tick", g.tick);
  s.get("v_min", g.v_min);
  s.get("risk_floor", g.risk_floor);
  std::string law = agent::to_string(g.law), fund = agent::to_string(g.fundamental),
              risk = agent::to_string(g.risk);
  s.get("law", law);
  s.get("fundamental", fund);
  s.get("risk", risk);
  try {
    g.law = agent::weight_law_from_string(law);
    g.fundamental = agent::fundamental_from_string(fund);
    g.risk = agent::risk_measure_from_string(risk);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("agent: ") + e.what());
  }
  s.finish();
}

void read_synth(const json& j, sf::SynthConfig& c) {
  Section s(j, "synth");
  s.get("days", c.days);
  s.get("minutes", c.minutes);
  s.get("drift_scale", c.drift_scale);
  s.get("vol_median", c.vol_median);
  s.get("vol_dispersion", c.vol_dispersion);
  s.get("garch_a", c.garch_a);
  s.get("garch_b", c.garch_b);
  s.get("rate_median", c.rate_median);
  s.get("rate_dispersion", c.rate_dispersion);
  s.get("activity_coupling", c.activity_coupling);
  s.get("intraday_u", c.intraday_u);
  s.finish();
}

void read_eval(const json& j, EvalConfig& c) {
  Section s(j, "evaluate");
  s.get("scales", c.scales);
  s.get("samples_per_bin", c.samples_per_bin);
  s.get("reference_days", c.reference_days);
  s.get("lags", c.lags);
  s.get("kl_bins", c.kl_bins);
  s.get("kl_eps", c.kl_eps);
  s.finish();
}

json model_to_json(const ctl::DenoiserConfig& m) {
  return {{"channels", m.channels},       {"length", m.length},
          {"base_width", m.base_width},   {"multipliers", m.multipliers},
          {"res_blocks", m.res_blocks},   {"kernel", m.kernel},
          {"padding", m.padding},         {"embed_dim", m.embed_dim},
          {"cond_hidden", m.cond_hidden}, {"num_bins", m.num_bins},
          {"encoder", ctl::to_string(m.encoder)}, {"norm", ctl::to_string(m.norm)},
          {"norm_groups", m.norm_groups}, {"attention", m.attention},
          {"zero_init_output", m.zero_init_output}};
}

json schedule_to_json(const ScheduleConfig& c) {
  return {{"steps", c.steps}, {"beta_start", c.beta_start}, {"beta_end", c.beta_end}};
}

json train_to_json(const ctl::TrainConfig& c) {
  return {{"epochs", c.epochs},         {"batch_size", c.batch_size},
          {"lr", c.lr},                 {"weight_decay", c.weight_decay},
          {"p_uncond", c.p_uncond},     {"grad_clip", c.grad_clip},
          {"max_steps", c.max_steps}};
}

json agent_to_json(const agent::MetaAgentParams& g) {
  return {{"lambda_f", g.lambda_f},       {"lambda_c", g.lambda_c},
          {"lambda_n", g.lambda_n},       {"tau0", g.tau0},
          {"alpha0", g.alpha0},           {"sigma_noise", g.sigma_noise},
          {"p0", g.p0},                   {"s0", g.s0},
          {"c0", g.c0},                   {"lambda_min", g.lambda_min},
          {"lambda_max", g.lambda_max},   {"tick", g.tick},
          {"v_min", g.v_min},             {"risk_floor", g.risk_floor},
          {"law", agent::to_string(g.law)}, {"fundamental", agent::to_string(g.fundamental)}, {"risk", agent::to_string(g.risk)}};
}

ms::Indicator parse_indicator(const std::string& s) {
  try {
    return ms::indicator_from_string(s);
  } catch (const std::exception&) {
    throw ConfigError("unknown target indicator \"" + s + "\"");
  }
}

const ms::Indicator kAllIndicators[] = {ms::Indicator::DailyReturn, ms::Indicator::Amplitude,
                                        ms::Indicator::Volatility};

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("config: malformed JSON: ") + e.what());
  }
  RunConfig cfg;
  Section top(j, "config");
  json sub;
  auto section = [&](const char* key) -> const json* {
    top.get(key, sub);
    return j.contains(key) ? &j.at(key) : nullptr;
  };
  if (auto* s = section("model")) read_model(*s, cfg.model, cfg.model_length_set);
  if (auto* s = section("schedule")) read_schedule(*s, cfg.schedule);
  if (auto* s = section("train")) read_train(*s, cfg.train);
  if (auto* s = section("sampler")) read_sampler(*s, cfg.sampler);
  if (auto* s = section("agent")) read_agent(*s, cfg.agent);
  if (auto* s = section("synth")) read_synth(*s, cfg.synth);
  if (auto* s = section("evaluate")) read_eval(*s, cfg.eval);
  std::string target = ms::to_string(cfg.target);
  top.get("target", target);
  cfg.target = parse_indicator(target);
  top.finish();
  cfg.agent.validate();
  return cfg;
}

RunConfig load_run_config(const fs::path& path) { return parse_run_config(io::read_text(path)); }

std::string run_config_json(const RunConfig& cfg) {
  json j;
  j["model"] = model_to_json(cfg.model);
  j["schedule"] = schedule_to_json(cfg.schedule);
  j["train"] = train_to_json(cfg.train);
  j["sampler"] = {{"ddim_steps", cfg.sampler.ddim_steps}, {"clamp", cfg.sampler.clamp}};
  j["agent"] = agent_to_json(cfg.agent);
  j["target"] = ms::to_string(cfg.target);
  return j.dump(2);
}

// ---- corpus statistics ----

namespace {

json stats_to_json(const CorpusStats& st) {
  json j;
  j["normalizer"] = {{"mean", st.norm.mean}, {"std", st.norm.std}};
  json ind = json::object();
  for (const auto& [k, b] : st.bins) {
    const auto& tn = st.target_norm.at(k);
    ind[ms::to_string(k)] = {{"edges", b.edges},
                             {"medians", b.medians},
                             {"mean", tn.mean},
                             {"std", tn.std}};
  }
  j["indicators"] = ind;
  return j;
}

CorpusStats stats_from_json(const json& j) {
  CorpusStats st;
  st.norm.mean = j.at("normalizer").at("mean").get<std::array<double, 2>>();
  st.norm.std = j.at("normalizer").at("std").get<std::array<double, 2>>();
  for (const auto& [name, v] : j.at("indicators").items()) {
    const auto k = parse_indicator(name);
    ms::ConditionBins b;
    b.edges = v.at("edges").get<decltype(b.edges)>();
    b.medians = v.at("medians").get<decltype(b.medians)>();
    st.bins[k] = b;
    st.target_norm[k] = ms::ScalarNormalizer{v.at("mean").get<double>(), v.at("std").get<double>()};
  }
  return st;
}

}  // namespace

CorpusStats fit_stats(const std::vector<ms::MarketStateDay>& days) {
  if (days.empty()) throw InputError("empty corpus");
  CorpusStats st;
  st.norm = ms::Normalizer::fit(days);
  std::vector<ms::IndicatorSet> sets;
  sets.reserve(days.size());
  for (const auto& d : days) sets.push_back(ms::indicators_of(d));
  for (auto k : kAllIndicators) {
    std::vector<double> v;
    v.reserve(sets.size());
    for (const auto& s : sets) v.push_back(ms::indicator_value(s, k));
    try {
      st.bins[k] = ms::ConditionBins::make(v);
    } catch (const InputError&) {
      continue;  // too few distinct values to bin; left out of the stats
    }
    st.target_norm[k] = ms::ScalarNormalizer::fit(v);
  }
  return st;
}

std::string stats_json(const CorpusStats& stats) { return stats_to_json(stats).dump(2) + "\n"; }

CorpusStats parse_stats_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    return stats_from_json(j.contains("stats") ? j.at("stats") : j);
  } catch (const json::exception& e) {
    throw InputError(std::string("stats: ") + e.what());
  }
}

// ---- training ----

std::vector<double> training_targets(const ModelMeta& meta,
                                     const std::vector<ms::MarketStateDay>& days) {
  const auto& bins = meta.stats.bins.at(meta.target);
  const auto& tn = meta.stats.target_norm.at(meta.target);
  std::vector<double> out;
  out.reserve(days.size());
  for (const auto& d : days) {
    const double v = ms::indicator_value(ms::indicators_of(d), meta.target);
    out.push_back(meta.model.encoder == ctl::EncoderMode::Discrete
                      ? static_cast<double>(bins.classify(v))
                      : tn.apply(v));
  }
  return out;
}

Model train_model(const std::vector<ms::MarketStateDay>& days, const RunConfig& cfg,
                  std::uint64_t seed, std::vector<double>* losses,
                  const std::function<void(std::size_t, double)>& on_step) {
  if (days.empty()) throw InputError("empty corpus");
  Model m;
  m.meta.model = cfg.model;
  const std::size_t T = days.front().minutes();
  if (cfg.model_length_set && cfg.model.length != T)
    throw ConfigError("model length " + std::to_string(cfg.model.length) +
                      " does not match corpus length " + std::to_string(T));
  m.meta.model.length = T;
  m.meta.model.validate();
  m.meta.schedule = cfg.schedule;
  m.meta.train = cfg.train;
  m.meta.train.seed = derive_seed(seed, 1);
  m.meta.target = cfg.target;
  m.meta.stats = fit_stats(days);
  if (!m.meta.stats.bins.count(cfg.target))
    throw InputError("corpus has too few distinct " + ms::to_string(cfg.target) +
                     " values to form condition bins");
  m.meta.seed = derive_seed(seed, 0);
  m.schedule = ctl::make_schedule(cfg.schedule.steps, cfg.schedule.beta_start, cfg.schedule.beta_end);
  m.net = std::make_unique<ctl::Denoiser>(m.meta.model, m.meta.seed);

  const auto corpus = ms::to_tensor(days, m.meta.stats.norm);
  const auto targets = training_targets(m.meta, days);
  ctl::Trainer trainer(*m.net, m.schedule, m.meta.train);
  auto l = trainer.fit(corpus, targets, on_step);
  if (losses) *losses = std::move(l);
  return m;
}

void save_model(const fs::path& path, const Model& m) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  tk::save_tensors(path, tk::snapshot(m.net->params()));
  json j;
  j["format"] = "diga-model";
  j["model"] = model_to_json(m.meta.model);
  j["schedule"] = schedule_to_json(m.meta.schedule);
  j["train"] = train_to_json(m.meta.train);
  j["train"]["seed"] = m.meta.train.seed;
  j["target"] = ms::to_string(m.meta.target);
  j["stats"] = stats_to_json(m.meta.stats);
  j["seed"] = m.meta.seed;
  io::write_text(path.string() + ".json", j.dump(2) + "\n");
}

Model load_model(const fs::path& path) {
  const std::string side = path.string() + ".json";
  if (!fs::exists(path)) throw InputError("missing checkpoint " + path.string());
  if (!fs::exists(side)) throw InputError("missing checkpoint metadata " + side);
  json j;
  try {
    j = json::parse(io::read_text(side));
  } catch (const json::parse_error&) {
    throw InputError(side + ": malformed JSON");
  }
  Model m;
  try {
    if (j.at("format") != "diga-model") throw ConfigError(side + ": not a model sidecar");
    bool dummy = false;
    read_model(j.at("model"), m.meta.model, dummy);
    read_schedule(j.at("schedule"), m.meta.schedule);
    json train = j.at("train");
    m.meta.train.seed = train.at("seed").get<std::uint64_t>();
    train.erase("seed");
    read_train(train, m.meta.train);
    m.meta.target = parse_indicator(j.at("target").get<std::string>());
    m.meta.stats = stats_from_json(j.at("stats"));
    m.meta.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(side + ": " + e.what());
  }
  m.meta.model.validate();
  m.schedule = ctl::make_schedule(m.meta.schedule.steps, m.meta.schedule.beta_start,
                                  m.meta.schedule.beta_end);
  m.net = std::make_unique<ctl::Denoiser>(m.meta.model, m.meta.seed);
  try {
    tk::restore(m.net->params(), tk::load_tensors(path));
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return m;
}

// ---- sampling ----

std::vector<SampledState> sample_states(Model& m, const SampleRequest& req) {
  const auto& meta = m.meta;
  const bool discrete = meta.model.encoder == ctl::EncoderMode::Discrete;
  if (req.target && parse_indicator(*req.target) != meta.target)
    throw ConfigError("checkpoint was trained on target \"" + ms::to_string(meta.target) +
                      "\", not \"" + *req.target + "\"");
  const int conds = (req.cls ? 1 : 0) + (req.value ? 1 : 0) + (req.median ? 1 : 0);
  if (conds > 1) throw InputError("give at most one of class, value, median");
  if (req.cls && !discrete)
    throw ConfigError("class labels need a discrete-encoder checkpoint");
  if (req.value && discrete)
    throw ConfigError("continuous values need a continuous-encoder checkpoint");
  if (req.count == 0) throw InputError("sample count must be positive");
  if (!std::isfinite(req.scale)) throw InputError("guidance scale must be finite");

  const auto& bins = meta.stats.bins.at(meta.target);
  std::optional<std::size_t> bin = req.cls ? req.cls : req.median;
  if (bin && *bin >= ms::ConditionBins::kBins)
    throw InputError("bin label must be in 0.." + std::to_string(ms::ConditionBins::kBins - 1));

  std::optional<double> cond_value;  // what the encoder sees
  std::optional<double> target_value;
  if (bin) {
    target_value = bins.medians[*bin];
    cond_value = discrete ? static_cast<double>(*bin)
                          : meta.stats.target_norm.at(meta.target).apply(*target_value);
  } else if (req.value) {
    if (!std::isfinite(*req.value)) throw InputError("target value must be finite");
    target_value = *req.value;
    bin = bins.classify(*req.value);
    cond_value = meta.stats.target_norm.at(meta.target).apply(*req.value);
  }

  std::mt19937_64 rng(req.seed);
  std::vector<SampledState> out;
  out.reserve(req.count);
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < req.count; start += kChunk) {
    const std::size_t n = std::min(kChunk, req.count - start);
    const auto cond = cond_value ? ctl::ConditionBatch::repeat(*cond_value, n)
                                 : ctl::ConditionBatch::none(n);
    const double s = cond_value ? req.scale : 0.0;
    const auto x = req.sampler.ddim_steps == 0
                       ? ctl::ddpm_sample(*m.net, m.schedule, cond, s, rng)
                       : ctl::ddim_sample(*m.net, m.schedule, cond, s, req.sampler.ddim_steps,
                                          rng, req.sampler.clamp);
    for (double v : x.data())
      if (!std::isfinite(v)) throw NumericalError("sampler produced a non-finite value");
    for (std::size_t b = 0; b < n; ++b) {
      SampledState st;
      st.day = ms::from_tensor(x, b, meta.stats.norm);
      st.target = ms::to_string(meta.target);
      st.cls = bin;
      st.target_value = target_value;
      st.scale = s;
      st.seed = req.seed;
      st.index = start + b;
      out.push_back(std::move(st));
    }
  }
  return out;
}

std::string state_json(const SampledState& s) {
  json j;
  j["shape"] = {2, s.day.minutes()};
  j["target"] = s.target;
  j["class"] = s.cls ? json(*s.cls) : json(nullptr);
  j["target_value"] = s.target_value ? json(*s.target_value) : json(nullptr);
  j["scale"] = s.scale;
  j["seed"] = s.seed;
  j["index"] = s.index;
  j["returns"] = s.day.returns;
  j["arrival_rates"] = s.day.arrival_rates;
  return j.dump() + "\n";
}

SampledState parse_state_json(const std::string& text) {
  SampledState s;
  try {
    const json j = json::parse(text);
    s.day.returns = j.at("returns").get<std::vector<double>>();
    s.day.arrival_rates = j.at("arrival_rates").get<std::vector<double>>();
    s.target = j.value("target", "none");
    if (j.contains("class") && !j["class"].is_null()) s.cls = j["class"].get<std::size_t>();
    if (j.contains("target_value") && !j["target_value"].is_null())
      s.target_value = j["target_value"].get<double>();
    s.scale = j.value("scale", 0.0);
    s.seed = j.value("seed", std::uint64_t{0});
    s.index = j.value("index", std::size_t{0});
  } catch (const json::exception& e) {
    throw InputError(std::string("state file: ") + e.what());
  }
  s.day.validate(false);  // sampled rates may dip below zero; the agent clamps them
  return s;
}

// ---- generation ----

RunRecord generate_run(const std::string& name, const ms::MarketStateDay& states,
                       const agent::MetaAgentParams& gamma, std::uint64_t seed,
                       agent::GenerationResult* full) {
  auto g = agent::generate_day(states, gamma, seed);
  RunRecord r;
  r.name = name;
  r.seed = seed;
  r.realized = ms::compute_indicators(g.minute_prices);
  r.orders = g.flow.size();
  r.trades = g.trades.size();
  r.minute_prices = g.minute_prices;
  r.oir = g.oir;
  if (full) *full = std::move(g);
  return r;
}

std::string run_json(const RunRecord& r) {
  json j;
  j["name"] = r.name;
  j["target"] = r.target;
  j["class"] = r.cls ? json(*r.cls) : json(nullptr);
  j["target_value"] = r.target_value ? json(*r.target_value) : json(nullptr);
  j["scale"] = r.scale;
  j["seed"] = r.seed;
  j["realized"] = {{"return", r.realized.daily_return},
                   {"amplitude", r.realized.amplitude},
                   {"volatility", r.realized.volatility}};
  j["orders"] = r.orders;
  j["trades"] = r.trades;
  j["minute_prices"] = r.minute_prices;
  j["oir"] = r.oir;
  return j.dump() + "\n";
}

RunRecord parse_run_json(const std::string& text) {
  RunRecord r;
  try {
    const json j = json::parse(text);
    r.name = j.at("name").get<std::string>();
    r.target = j.at("target").get<std::string>();
    if (!j.at("class").is_null()) r.cls = j["class"].get<std::size_t>();
    if (!j.at("target_value").is_null()) r.target_value = j["target_value"].get<double>();
    r.scale = j.at("scale").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    const auto& re = j.at("realized");
    r.realized = {re.at("return").get<double>(), re.at("amplitude").get<double>(),
                  re.at("volatility").get<double>()};
    r.orders = j.at("orders").get<std::size_t>();
    r.trades = j.at("trades").get<std::size_t>();
    r.minute_prices = j.at("minute_prices").get<std::vector<double>>();
    r.oir = j.at("oir").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw InputError(std::string("run file: ") + e.what());
  }
  if (r.minute_prices.size() != r.oir.size() + 1)
    throw InputError("run file: expected one more price than OIR values");
  return r;
}

// ---- evaluation ----

FidelityReport fidelity(const std::vector<RunRecord>& reference,
                        const std::vector<RunRecord>& simulated, const EvalConfig& cfg) {
  if (reference.empty() || simulated.empty())
    throw InputError("fidelity needs reference and simulated runs");
  struct Pool {
    std::vector<double> minr, retac, volc, oir;
  };
  auto pool = [&](const std::vector<RunRecord>& runs) {
    Pool p;
    for (const auto& r : runs) {
      const auto f = sf::compute_facts(r.minute_prices, r.oir, cfg.lags);
      p.minr.insert(p.minr.end(), f.minr.begin(), f.minr.end());
      p.retac.insert(p.retac.end(), f.retac.begin(), f.retac.end());
      p.volc.insert(p.volc.end(), f.volc.begin(), f.volc.end());
      p.oir.insert(p.oir.end(), f.oir.begin(), f.oir.end());
    }
    return p;
  };
  const auto a = pool(reference), b = pool(simulated);
  FidelityReport out;
  out.minr = sf::kl_divergence(a.minr, b.minr, cfg.kl_bins, cfg.kl_eps);
  out.retac = sf::kl_divergence(a.retac, b.retac, cfg.kl_bins, cfg.kl_eps);
  out.volc = sf::kl_divergence(a.volc, b.volc, cfg.kl_bins, cfg.kl_eps);
  out.oir = sf::kl_divergence(a.oir, b.oir, cfg.kl_bins, cfg.kl_eps);
  return out;
}

std::vector<ControlCell> controllability(const std::vector<RunRecord>& runs,
                                         const std::map<ms::Indicator, ms::ConditionBins>& bins) {
  // key: target, scale, class
  std::map<std::tuple<std::string, double, std::size_t>, std::pair<std::vector<double>, std::vector<double>>>
      groups;
  for (const auto& r : runs) {
    if (r.target == "none") continue;
    const auto ind = parse_indicator(r.target);
    const double realized = ms::indicator_value(r.realized, ind);
    if (r.target_value && r.cls) {
      auto& g = groups[{r.target, r.scale, *r.cls}];
      g.first.push_back(*r.target_value);
      g.second.push_back(realized);
    } else if (!r.target_value) {
      const auto it = bins.find(ind);
      if (it == bins.end()) throw InputError("no bins for target \"" + r.target + "\"");
      for (std::size_t k = 0; k < ms::ConditionBins::kBins; ++k) {
        auto& g = groups[{r.target, 0.0, k}];
        g.first.push_back(it->second.medians[k]);
        g.second.push_back(realized);
      }
    }
  }
  std::vector<ControlCell> cells;
  for (const auto& [key, g] : groups) {
    ControlCell c;
    std::tie(c.target, c.scale, c.cls) = key;
    const double n = static_cast<double>(g.first.size());
    for (std::size_t i = 0; i < g.first.size(); ++i) {
      c.target_value += g.first[i] / n;
      c.realized_mean += g.second[i] / n;
    }
    c.mse = sf::controllability_mse(g.first, g.second);
    c.runs = g.first.size();
    cells.push_back(c);
  }
  return cells;
}

std::string report_json(const FidelityReport& fid, const std::vector<ControlCell>& cells,
                        std::size_t reference_runs, std::size_t simulated_runs) {
  json j;
  j["kl_divergence"] = {{"minr", fid.minr}, {"retac", fid.retac}, {"volc", fid.volc},
                        {"oir", fid.oir}};
  json ctl = json::array(), base = json::array();
  for (const auto& c : cells) {
    json e = {{"target", c.target},       {"bin", c.cls},
              {"target_value", c.target_value}, {"realized_mean", c.realized_mean},
              {"mse", c.mse},             {"runs", c.runs}};
    if (c.scale == 0.0) {
      base.push_back(e);
    } else {
      e["scale"] = c.scale;
      ctl.push_back(e);
    }
  }
  j["controllability"] = ctl;
  j["unconditional"] = base;
  j["reference_runs"] = reference_runs;
  j["simulated_runs"] = simulated_runs;
  return j.dump(2) + "\n";
}

}  // namespace diga::pipe
