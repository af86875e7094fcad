// diga: preprocess, synth, train, sample, generate, evaluate, report, pipeline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "diga/error.hpp"
#include "diga/io.hpp"
#include "diga/pipeline.hpp"
#include "diga/svg.hpp"

namespace fs = std::filesystem;
using namespace diga;

namespace {

const std::vector<double> kSweep{1, 2, 4, 6, 8};

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw InputError(what + " not found: " + p.string());
}

void require_dir(const fs::path& p, const std::string& what) {
  if (!fs::is_directory(p)) throw InputError(what + " is not a directory: " + p.string());
}

pipe::RunConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  require_file(path, "config");
  return pipe::load_run_config(path);
}

// "all", "3" or "0,2,4"
std::vector<std::size_t> parse_bins(const std::string& s) {
  std::vector<std::size_t> out;
  if (s == "all") {
    for (std::size_t k = 0; k < ms::ConditionBins::kBins; ++k) out.push_back(k);
    return out;
  }
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != item.size()) throw InputError("bad bin label '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw InputError("no bin labels given");
  return out;
}

std::vector<fs::path> list_files(const fs::path& dir, const std::string& suffix) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string stem_of(const fs::path& p, const std::string& suffix) {
  const auto name = p.filename().string();
  return name.substr(0, name.size() - suffix.size());
}

void write_stats(const fs::path& dir, const std::vector<ms::MarketStateDay>& days) {
  const auto stats = pipe::fit_stats(days);
  for (auto k : {ms::Indicator::DailyReturn, ms::Indicator::Amplitude, ms::Indicator::Volatility})
    if (!stats.bins.count(k))
      std::cerr << "warning: too few distinct " << ms::to_string(k)
                << " values for condition bins\n";
  io::write_text(dir / "stats.json", pipe::stats_json(stats));
}

// ---- preprocess ----

struct PreprocessArgs {
  std::string input, out;
  std::size_t minutes = ms::kTradingMinutes;
  double tick = 0.01;
};

int cmd_preprocess(const PreprocessArgs& a) {
  require_file(a.input, "tick file");
  const auto tick_days = io::read_ticks_jsonl(fs::path(a.input));
  std::size_t records = 0;
  for (const auto& d : tick_days) records += d.records.size() + (d.problem ? 1 : 0);
  if (records == 0) throw InputError("no tick records in " + a.input);

  std::vector<ms::MarketStateDay> days;
  for (const auto& d : tick_days) {
    if (d.problem) {
      std::cerr << "warning: day " << d.day << " dropped (" << *d.problem << ")\n";
      continue;
    }
    try {
      days.push_back(ms::extract_market_states(d.records, a.minutes, a.tick));
    } catch (const InputError& e) {
      std::cerr << "warning: day " << d.day << " dropped (" << e.what() << ")\n";
    }
  }
  if (days.empty()) throw InputError("every day was filtered out");
  const fs::path out(a.out);
  io::write_corpus_csv(out / "corpus.csv", days);
  write_stats(out, days);
  std::cerr << "preprocess: " << days.size() << " day(s) x " << a.minutes << " minutes\n";
  return 0;
}

// ---- synth ----

struct SynthArgs {
  std::string config, out;
  std::uint64_t seed = 0;
  std::optional<std::size_t> days, minutes;
};

int cmd_synth(const SynthArgs& a) {
  auto cfg = load_config(a.config);
  if (a.days) cfg.synth.days = *a.days;
  if (a.minutes) cfg.synth.minutes = *a.minutes;
  const auto corpus = sf::synth_corpus(a.seed, cfg.synth);
  const fs::path out(a.out);
  io::write_corpus_csv(out / "corpus.csv", corpus.days);
  write_stats(out, corpus.days);
  std::cerr << "synth: " << corpus.days.size() << " days x " << cfg.synth.minutes << " minutes\n";
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string corpus, config, out;
  std::uint64_t seed = 0;
  std::optional<std::size_t> epochs, max_steps;
  std::size_t log_every = 50;
};

int cmd_train(const TrainArgs& a) {
  require_file(a.corpus, "corpus");
  auto cfg = load_config(a.config);
  if (a.epochs) cfg.train.epochs = *a.epochs;
  if (a.max_steps) cfg.train.max_steps = *a.max_steps;
  const auto days = io::read_corpus_csv(a.corpus);
  std::vector<double> losses;
  auto model = pipe::train_model(days, cfg, a.seed, &losses, [&](std::size_t step, double loss) {
    if (a.log_every && (step + 1) % a.log_every == 0)
      std::cerr << "step " << step + 1 << " loss " << loss << "\n";
  });
  const fs::path out(a.out);
  pipe::save_model(out / "model.ckpt", model);
  std::ostringstream csv;
  csv << "step,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) csv << i + 1 << ',' << io::fmt(losses[i]) << '\n';
  io::write_text(out / "losses.csv", csv.str());
  std::cerr << "train: " << losses.size() << " steps, checkpoint " << (out / "model.ckpt").string()
            << "\n";
  return 0;
}

// ---- sample ----

struct SampleArgs {
  std::string model, config, out, target, classes, medians;
  std::vector<double> values;
  std::vector<double> scales{1.0};
  bool sweep = false, unconditional = false;
  std::size_t count = 1;
  std::uint64_t seed = 0;
  std::optional<std::size_t> ddim_steps;
};

int cmd_sample(const SampleArgs& a) {
  require_file(a.model, "checkpoint");
  const auto cfg = load_config(a.config);
  auto model = pipe::load_model(a.model);
  const std::string target = a.target.empty() ? ms::to_string(model.meta.target) : a.target;

  struct Cond {
    std::string tag;
    pipe::SampleRequest req;
  };
  std::vector<Cond> conds;
  pipe::SampleRequest base;
  base.target = target;
  base.count = a.count;
  base.sampler = cfg.sampler;
  if (a.ddim_steps) base.sampler.ddim_steps = *a.ddim_steps;
  if (!a.classes.empty())
    for (auto k : parse_bins(a.classes)) {
      auto r = base;
      r.cls = k;
      conds.push_back({"c" + std::to_string(k), r});
    }
  if (!a.medians.empty())
    for (auto k : parse_bins(a.medians)) {
      auto r = base;
      r.median = k;
      conds.push_back({"c" + std::to_string(k), r});
    }
  for (double v : a.values) {
    auto r = base;
    r.value = v;
    conds.push_back({"v" + io::fmt(v), r});
  }
  if (conds.empty() && !a.unconditional)
    throw InputError("give --class, --median, --value or --unconditional");

  const auto scales = a.sweep ? kSweep : a.scales;
  const fs::path out(a.out);
  std::uint64_t group = 0;
  std::size_t files = 0;
  auto emit = [&](const std::string& prefix, pipe::SampleRequest req) {
    req.seed = pipe::derive_seed(a.seed, group++);
    for (const auto& st : pipe::sample_states(model, req)) {
      io::write_text(out / (prefix + "_" + std::to_string(st.index) + ".state.json"),
                     pipe::state_json(st));
      ++files;
    }
  };
  if (a.unconditional) emit(target + "_uncond", base);
  for (double s : scales)
    for (const auto& c : conds) {
      auto r = c.req;
      r.scale = s;
      emit(target + "_" + c.tag + "_s" + io::fmt(s), r);
    }
  std::cerr << "sample: wrote " << files << " state file(s)\n";
  return 0;
}

// ---- generate ----

struct GenerateArgs {
  std::string states, corpus, config, out;
  std::optional<std::size_t> days;
  std::uint64_t seed = 0;
  bool trades = false, book = false;
};

void write_run(const fs::path& out, const pipe::RunRecord& r, const agent::GenerationResult& g,
               const agent::MetaAgentParams& gamma, bool trades, bool book) {
  io::write_order_flow_jsonl(out / (r.name + ".orders.jsonl"), g.flow, gamma.tick);
  io::write_minute_csv(out / (r.name + ".minutes.csv"), g.minute_prices, g.oir);
  io::write_text(out / (r.name + ".run.json"), pipe::run_json(r));
  if (trades) io::write_trades_csv(out / (r.name + ".trades.csv"), g.trades, gamma.tick);
  if (book) {
    // Rebuild the closing book by replaying the day's flow.
    ex::Exchange x(ex::ExchangeConfig{gamma.tick, gamma.p0, gamma.v_min});
    for (const auto& o : g.flow) x.submit(o);
    io::write_text(out / (r.name + ".book.json"), io::book_snapshot_json(x) + "\n");
  }
}

int cmd_generate(const GenerateArgs& a) {
  if (a.states.empty() == a.corpus.empty()) throw InputError("give exactly one of --states, --corpus");
  const auto cfg = load_config(a.config);
  const auto& gamma = cfg.agent;
  gamma.validate();
  const fs::path out(a.out);

  struct Job {
    std::string name;
    ms::MarketStateDay day;
    std::optional<pipe::SampledState> meta;
  };
  std::vector<Job> jobs;
  if (!a.states.empty()) {
    const fs::path p(a.states);
    std::vector<fs::path> files;
    if (fs::is_directory(p)) {
      files = list_files(p, ".state.json");
      if (files.empty()) throw InputError("no .state.json files in " + p.string());
    } else {
      require_file(p, "state file");
      files.push_back(p);
    }
    for (const auto& f : files) {
      auto st = pipe::parse_state_json(io::read_text(f));
      const auto name = f.filename().string();
      const std::string suffix = ".state.json";
      const auto stem = name.size() > suffix.size() &&
                                name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0
                            ? stem_of(f, suffix)
                            : f.stem().string();
      jobs.push_back({stem, st.day, st});
    }
  } else {
    require_file(a.corpus, "corpus");
    const auto days = io::read_corpus_csv(a.corpus);
    const std::size_t n = a.days ? std::min(*a.days, days.size()) : days.size();
    for (std::size_t d = 0; d < n; ++d) jobs.push_back({"ref_" + std::to_string(d), days[d], {}});
  }

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    agent::GenerationResult g;
    auto r = pipe::generate_run(jobs[i].name, jobs[i].day, gamma, pipe::derive_seed(a.seed, i), &g);
    if (jobs[i].meta) {
      r.target = jobs[i].meta->target;
      r.cls = jobs[i].meta->cls;
      r.target_value = jobs[i].meta->target_value;
      r.scale = jobs[i].meta->scale;
    }
    write_run(out, r, g, gamma, a.trades, a.book);
  }
  std::cerr << "generate: " << jobs.size() << " run(s)\n";
  return 0;
}

// ---- evaluate ----

struct EvaluateArgs {
  std::string reference, simulated, stats, config, out;
};

std::vector<pipe::RunRecord> load_runs(const fs::path& dir) {
  require_dir(dir, "run directory");
  std::vector<pipe::RunRecord> runs;
  for (const auto& f : list_files(dir, ".run.json"))
    runs.push_back(pipe::parse_run_json(io::read_text(f)));
  if (runs.empty()) throw InputError("no .run.json files in " + dir.string());
  return runs;
}

int cmd_evaluate(const EvaluateArgs& a) {
  require_dir(a.reference, "reference");
  require_dir(a.simulated, "simulated");
  require_file(a.stats, "stats");
  const auto cfg = load_config(a.config);
  const auto ref = load_runs(a.reference);
  const auto sim = load_runs(a.simulated);
  const auto stats = pipe::parse_stats_json(io::read_text(a.stats));
  const auto fid = pipe::fidelity(ref, sim, cfg.eval);
  const auto cells = pipe::controllability(sim, stats.bins);
  io::write_text(fs::path(a.out) / "report.json",
                 pipe::report_json(fid, cells, ref.size(), sim.size()));
  std::cerr << "evaluate: KL minr " << fid.minr << " retac " << fid.retac << " volc " << fid.volc
            << " oir " << fid.oir << "\n";
  for (const auto& c : cells)
    std::cerr << "  " << c.target << " bin " << c.cls << " scale "
              << (c.scale == 0.0 ? std::string("uncond") : io::fmt(c.scale)) << ": target "
              << c.target_value << " realized " << c.realized_mean << " mse " << c.mse << "\n";
  return 0;
}

// ---- report ----

struct ReportArgs {
  std::string reference, simulated, out;
};

std::vector<double> mean_path(const std::vector<const pipe::RunRecord*>& runs) {
  std::size_t n = SIZE_MAX;
  for (const auto* r : runs) n = std::min(n, r->minute_prices.size());
  std::vector<double> m(n, 0.0);
  for (const auto* r : runs)
    for (std::size_t i = 0; i < n; ++i)
      m[i] += r->minute_prices[i] / r->minute_prices[0] / static_cast<double>(runs.size());
  return m;
}

viz::Series density(const std::string& name, const std::vector<double>& v, double lo, double hi) {
  constexpr std::size_t kBins = 20;
  viz::Series s{name, {}, {}};
  const double w = (hi - lo) / kBins;
  std::vector<double> c(kBins, 0.0);
  for (double x : v) {
    auto b = static_cast<std::size_t>(std::clamp((x - lo) / w, 0.0, kBins - 1.0));
    c[b] += 1.0;
  }
  for (std::size_t b = 0; b < kBins; ++b) {
    s.x.push_back(lo + (b + 0.5) * w);
    s.y.push_back(c[b] / (static_cast<double>(v.size()) * w));
  }
  return s;
}

int cmd_report(const ReportArgs& a) {
  const auto sim = load_runs(a.simulated);
  std::vector<pipe::RunRecord> ref;
  if (!a.reference.empty()) ref = load_runs(a.reference);
  const fs::path out(a.out);
  std::size_t charts = 0;
  auto save = [&](const std::string& name, const viz::LineChart& c) {
    io::write_text(out / name, viz::render(c));
    ++charts;
  };
  auto minutes = [](std::size_t n) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i);
    return x;
  };

  // group by (target, scale) -> class -> runs
  std::map<std::pair<std::string, double>, std::map<std::size_t, std::vector<const pipe::RunRecord*>>>
      groups;
  std::map<std::string, std::vector<const pipe::RunRecord*>> uncond;
  for (const auto& r : sim) {
    if (r.target == "none") continue;
    if (r.cls && r.target_value)
      groups[{r.target, r.scale}][*r.cls].push_back(&r);
    else
      uncond[r.target].push_back(&r);
  }

  for (const auto& [key, by_cls] : groups) {
    const auto& [target, scale] = key;
    const auto ind = ms::indicator_from_string(target);
    const std::string tag = target + "_s" + io::fmt(scale);

    viz::LineChart prices{"Mean price path, " + target + " control, scale " + io::fmt(scale),
                          "minute", "price / open", {}};
    for (const auto& [k, runs] : by_cls) {
      const auto m = mean_path(runs);
      prices.series.push_back({"bin " + std::to_string(k), minutes(m.size()), m});
    }
    if (uncond.count(target)) {
      const auto m = mean_path(uncond[target]);
      prices.series.push_back({"unconditional", minutes(m.size()), m});
    }
    if (!ref.empty()) {
      std::vector<const pipe::RunRecord*> rp;
      for (const auto& r : ref) rp.push_back(&r);
      const auto m = mean_path(rp);
      prices.series.push_back({"reference", minutes(m.size()), m});
    }
    save("prices_" + tag + ".svg", prices);

    double lo = INFINITY, hi = -INFINITY;
    std::map<std::size_t, std::vector<double>> vals;
    for (const auto& [k, runs] : by_cls)
      for (const auto* r : runs) {
        const double v = ms::indicator_value(r->realized, ind);
        vals[k].push_back(v);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    if (hi <= lo) hi = lo + 1e-9;
    viz::LineChart dens{"Realized " + target + " density, scale " + io::fmt(scale), target,
                        "density", {}};
    for (const auto& [k, v] : vals) dens.series.push_back(density("bin " + std::to_string(k), v, lo, hi));
    save("density_" + tag + ".svg", dens);
  }

  // MSE against guidance scale, one line per bin
  std::map<std::string, std::map<std::size_t, viz::Series>> mse_lines;
  for (const auto& [key, by_cls] : groups)
    for (const auto& [k, runs] : by_cls) {
      std::vector<double> t, r;
      for (const auto* run : runs) {
        t.push_back(*run->target_value);
        r.push_back(ms::indicator_value(run->realized, ms::indicator_from_string(key.first)));
      }
      auto& s = mse_lines[key.first][k];
      s.name = "bin " + std::to_string(k);
      s.x.push_back(key.second);
      s.y.push_back(sf::controllability_mse(t, r));
    }
  for (auto& [target, lines] : mse_lines) {
    viz::LineChart c{"Control MSE by guidance scale, " + target, "guidance scale", "MSE", {}};
    for (auto& [k, s] : lines) c.series.push_back(s);
    save("mse_" + target + ".svg", c);
  }
  std::cerr << "report: " << charts << " chart(s)\n";
  return 0;
}

// ---- pipeline ----

struct PipelineArgs {
  std::string config, out;
  std::uint64_t seed = 0;
};

int cmd_pipeline(const PipelineArgs& a) {
  const auto cfg = load_config(a.config);
  const fs::path out(a.out);
  const std::string cfg_arg = a.config;

  SynthArgs sy{cfg_arg, (out / "corpus").string(), pipe::derive_seed(a.seed, 0), {}, {}};
  cmd_synth(sy);

  TrainArgs tr;
  tr.corpus = (out / "corpus" / "corpus.csv").string();
  tr.config = cfg_arg;
  tr.out = (out / "model").string();
  tr.seed = pipe::derive_seed(a.seed, 1);
  cmd_train(tr);

  SampleArgs sa;
  sa.model = (out / "model" / "model.ckpt").string();
  sa.config = cfg_arg;
  sa.out = (out / "states").string();
  sa.medians = "all";
  sa.scales = cfg.eval.scales;
  sa.unconditional = true;
  sa.count = cfg.eval.samples_per_bin;
  sa.seed = pipe::derive_seed(a.seed, 2);
  cmd_sample(sa);

  GenerateArgs ge;
  ge.config = cfg_arg;
  ge.corpus = tr.corpus;
  ge.days = cfg.eval.reference_days;
  ge.out = (out / "flows" / "reference").string();
  ge.seed = pipe::derive_seed(a.seed, 3);
  cmd_generate(ge);
  ge.corpus.clear();
  ge.days.reset();
  ge.states = sa.out;
  ge.out = (out / "flows" / "simulated").string();
  ge.seed = pipe::derive_seed(a.seed, 4);
  cmd_generate(ge);

  EvaluateArgs ev{(out / "flows" / "reference").string(), ge.out,
                  (out / "model" / "model.ckpt.json").string(), cfg_arg, (out / "report").string()};
  cmd_evaluate(ev);
  ReportArgs rp{ev.reference, ev.simulated, (out / "report").string()};
  return cmd_report(rp);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diga: diffusion-guided market simulation"};
  app.require_subcommand(1);

  PreprocessArgs pp;
  auto* c_pp = app.add_subcommand("preprocess", "tick JSONL -> market-state corpus CSV + stats");
  c_pp->add_option("--input", pp.input, "tick JSONL file")->required();
  c_pp->add_option("--out", pp.out, "output directory")->required();
  c_pp->add_option("--minutes", pp.minutes, "trading minutes per day");
  c_pp->add_option("--tick", pp.tick, "price tick");

  SynthArgs sy;
  auto* c_sy = app.add_subcommand("synth", "synthetic market-state corpus");
  c_sy->add_option("--config", sy.config, "run config JSON");
  c_sy->add_option("--seed", sy.seed, "master seed");
  c_sy->add_option("--out", sy.out, "output directory")->required();
  c_sy->add_option("--days", sy.days, "number of days");
  c_sy->add_option("--minutes", sy.minutes, "minutes per day");

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "train the conditional diffusion controller");
  c_tr->add_option("--corpus", tr.corpus, "corpus CSV")->required();
  c_tr->add_option("--config", tr.config, "run config JSON");
  c_tr->add_option("--seed", tr.seed, "master seed");
  c_tr->add_option("--out", tr.out, "output directory")->required();
  c_tr->add_option("--epochs", tr.epochs, "override train.epochs");
  c_tr->add_option("--max-steps", tr.max_steps, "override train.max_steps");
  c_tr->add_option("--log-every", tr.log_every, "loss log interval (0 = quiet)");

  SampleArgs sa;
  auto* c_sa = app.add_subcommand("sample", "sample market states from a checkpoint");
  c_sa->add_option("--model", sa.model, "checkpoint path")->required();
  c_sa->add_option("--config", sa.config, "run config JSON (sampler section)");
  c_sa->add_option("--out", sa.out, "output directory")->required();
  c_sa->add_option("--target", sa.target, "indicator the checkpoint was trained on");
  c_sa->add_option("--class", sa.classes, "class label(s) for a discrete model: K, K1,K2 or all");
  c_sa->add_option("--median", sa.medians, "condition on bin median(s): K, K1,K2 or all");
  c_sa->add_option("--value", sa.values, "raw target value(s) for a continuous model")->delimiter(',');
  c_sa->add_flag("--unconditional", sa.unconditional, "also sample without a condition");
  c_sa->add_option("--scale", sa.scales, "guidance scale(s)")->delimiter(',');
  c_sa->add_flag("--sweep", sa.sweep, "use the guidance sweep 1,2,4,6,8");
  c_sa->add_option("--seeds", sa.count, "state files per condition and scale");
  c_sa->add_option("--seed", sa.seed, "master seed");
  c_sa->add_option("--ddim-steps", sa.ddim_steps, "DDIM steps (0 = full DDPM)");

  GenerateArgs ge;
  auto* c_ge = app.add_subcommand("generate", "drive the meta agent with market states");
  c_ge->add_option("--states", ge.states, "state file or directory of .state.json files");
  c_ge->add_option("--corpus", ge.corpus, "corpus CSV (reference runs)");
  c_ge->add_option("--days", ge.days, "corpus days to run");
  c_ge->add_option("--config", ge.config, "run config JSON (agent section)");
  c_ge->add_option("--seed", ge.seed, "master seed");
  c_ge->add_option("--out", ge.out, "output directory")->required();
  c_ge->add_flag("--trades", ge.trades, "write trade logs");
  c_ge->add_flag("--book", ge.book, "write closing book snapshots");

  EvaluateArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "stylized-fact KL and controllability MSE");
  c_ev->add_option("--reference", ev.reference, "directory of reference runs")->required();
  c_ev->add_option("--simulated", ev.simulated, "directory of simulated runs")->required();
  c_ev->add_option("--stats", ev.stats, "stats.json or checkpoint sidecar")->required();
  c_ev->add_option("--config", ev.config, "run config JSON (evaluate section)");
  c_ev->add_option("--out", ev.out, "output directory")->required();

  ReportArgs rp;
  auto* c_rp = app.add_subcommand("report", "SVG charts from generated runs");
  c_rp->add_option("--simulated", rp.simulated, "directory of simulated runs")->required();
  c_rp->add_option("--reference", rp.reference, "directory of reference runs");
  c_rp->add_option("--out", rp.out, "output directory")->required();

  PipelineArgs pl;
  auto* c_pl = app.add_subcommand("pipeline", "synth -> train -> sample -> generate -> evaluate -> report");
  c_pl->add_option("--config", pl.config, "run config JSON");
  c_pl->add_option("--seed", pl.seed, "master seed");
  c_pl->add_option("--out", pl.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*c_pp) return cmd_preprocess(pp);
    if (*c_sy) return cmd_synth(sy);
    if (*c_tr) return cmd_train(tr);
    if (*c_sa) return cmd_sample(sa);
    if (*c_ge) return cmd_generate(ge);
    if (*c_ev) return cmd_evaluate(ev);
    if (*c_rp) return cmd_report(rp);
    if (*c_pl) return cmd_pipeline(pl);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
