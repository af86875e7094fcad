#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "diga/error.hpp"
#include "diga/exchange.hpp"
#include "diga/io.hpp"
#include "diga/marketstate.hpp"
#include "diga/metaagent.hpp"
#include "diga/pipeline.hpp"
#include "diga/stylized.hpp"

namespace py = pybind11;
using namespace diga;

namespace {

ms::MarketStateDay make_day(std::vector<double> returns, std::vector<double> rates) {
  ms::MarketStateDay d{std::move(returns), std::move(rates)};
  d.validate(false);
  return d;
}

py::dict indicators_dict(const ms::IndicatorSet& s) {
  py::dict d;
  d["return"] = s.daily_return;
  d["amplitude"] = s.amplitude;
  d["volatility"] = s.volatility;
  return d;
}

py::dict state_dict(const pipe::SampledState& s) {
  py::dict d;
  d["returns"] = s.day.returns;
  d["arrival_rates"] = s.day.arrival_rates;
  d["target"] = s.target;
  d["class"] = s.cls ? py::cast(*s.cls) : py::none();
  d["target_value"] = s.target_value ? py::cast(*s.target_value) : py::none();
  d["scale"] = s.scale;
  d["seed"] = s.seed;
  return d;
}

}  // namespace

PYBIND11_MODULE(_diga, m) {
  m.doc() = "Diffusion-guided market simulation core";

  auto input_error = py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  (void)input_error;

  // ---- market states and indicators
  m.def(
      "indicators",
      [](const std::vector<double>& prices) { return indicators_dict(ms::compute_indicators(prices)); },
      py::arg("minute_prices"));
  m.def(
      "synth_corpus",
      [](std::uint64_t seed, std::size_t days, std::size_t minutes) {
        sf::SynthConfig c;
        c.days = days;
        c.minutes = minutes;
        const auto corpus = sf::synth_corpus(seed, c);
        py::list out;
        for (const auto& d : corpus.days) out.append(py::make_tuple(d.returns, d.arrival_rates));
        return out;
      },
      py::arg("seed"), py::arg("days") = 500, py::arg("minutes") = ms::kTradingMinutes,
      "List of (returns, arrival_rates) per day.");
  m.def(
      "read_corpus",
      [](const std::filesystem::path& p) {
        py::list out;
        for (const auto& d : io::read_corpus_csv(p)) out.append(py::make_tuple(d.returns, d.arrival_rates));
        return out;
      },
      py::arg("path"));

  // ---- stylized facts
  m.def("autocorr", [](const std::vector<double>& x, std::size_t lag) { return sf::autocorr(x, lag); },
        py::arg("x"), py::arg("lag"));
  m.def(
      "kl_divergence",
      [](const std::vector<double>& real, const std::vector<double>& sim, std::size_t bins, double eps) {
        return sf::kl_divergence(real, sim, bins, eps);
      },
      py::arg("real"), py::arg("sim"), py::arg("bins") = 50, py::arg("eps") = 1e-9);
  m.def(
      "facts",
      [](const std::vector<double>& prices, const std::vector<double>& oir) {
        const auto f = sf::compute_facts(prices, oir);
        py::dict d;
        d["minr"] = f.minr;
        d["retac"] = f.retac;
        d["volc"] = f.volc;
        d["oir"] = f.oir;
        return d;
      },
      py::arg("minute_prices"), py::arg("oir"));

  // ---- exchange
  py::class_<ex::Exchange>(m, "Exchange")
      .def(py::init([](double tick, double p0) { return ex::Exchange(ex::ExchangeConfig{tick, p0, 1e-4}); }),
           py::arg("tick") = 0.01, py::arg("p0") = 10.0)
      .def(
          "submit",
          [](ex::Exchange& x, std::int64_t id, double t, double price, std::int64_t qty, bool buy) {
            const auto trades = x.submit(
                {id, t, x.to_ticks(price), qty, buy ? ex::Side::Buy : ex::Side::Sell});
            py::list out;
            for (const auto& tr : trades)
              out.append(py::make_tuple(x.to_price(tr.price), tr.qty, tr.buy_id, tr.sell_id));
            return out;
          },
          py::arg("id"), py::arg("t"), py::arg("price"), py::arg("qty"), py::arg("buy"),
          "Returns (price, qty, buy_id, sell_id) per fill.")
      .def("cancel", &ex::Exchange::cancel, py::arg("id"))
      .def("best_bid",
           [](const ex::Exchange& x) -> py::object {
             const auto l = x.best_bid();
             return l ? py::make_tuple(x.to_price(l->price), l->volume) : py::object(py::none());
           })
      .def("best_ask",
           [](const ex::Exchange& x) -> py::object {
             const auto l = x.best_ask();
             return l ? py::make_tuple(x.to_price(l->price), l->volume) : py::object(py::none());
           })
      .def("mid", &ex::Exchange::mid)
      .def("oir", &ex::Exchange::oir)
      .def_property_readonly("resting_volume", &ex::Exchange::resting_volume);

  // ---- meta agent
  m.def("demand", &agent::demand, py::arg("p"), py::arg("p_hat"), py::arg("alpha"), py::arg("vol"));
  m.def("solve_lowest_price", &agent::solve_lowest_price, py::arg("S"), py::arg("C"), py::arg("p_hat"),
        py::arg("alpha"), py::arg("vol"));
  m.def(
      "generate_day",
      [](std::vector<double> returns, std::vector<double> rates, std::uint64_t seed,
         const std::string& config_json) {
        const auto cfg = pipe::parse_run_config(config_json);
        agent::GenerationResult g;
        const auto r = pipe::generate_run("py", make_day(std::move(returns), std::move(rates)), cfg.agent,
                                          seed, &g);
        py::dict d;
        d["minute_prices"] = g.minute_prices;
        d["oir"] = g.oir;
        d["orders"] = r.orders;
        d["trades"] = r.trades;
        d["wakeups"] = g.wakeups;
        d["realized"] = indicators_dict(r.realized);
        return d;
      },
      py::arg("returns"), py::arg("arrival_rates"), py::arg("seed"), py::arg("config_json") = "{}",
      "Drives the meta agent over one day of market states.");

  // ---- controller
  m.def(
      "config_json",
      [](const std::string& text) { return pipe::run_config_json(pipe::parse_run_config(text)); },
      py::arg("text") = "{}", "Normalised run config with every default filled in.");

  py::class_<pipe::Model>(m, "Model")
      .def_static(
          "train",
          [](const py::list& days, const std::string& config_json, std::uint64_t seed) {
            std::vector<ms::MarketStateDay> corpus;
            for (const auto& d : days) {
              auto t = d.cast<std::pair<std::vector<double>, std::vector<double>>>();
              corpus.push_back(make_day(std::move(t.first), std::move(t.second)));
            }
            const auto cfg = pipe::parse_run_config(config_json);
            std::vector<double> losses;
            std::optional<pipe::Model> model;
            {
              py::gil_scoped_release release;
              model.emplace(pipe::train_model(corpus, cfg, seed, &losses));
            }
            return py::make_tuple(py::cast(std::move(*model)), losses);
          },
          py::arg("days"), py::arg("config_json"), py::arg("seed"),
          "Trains on (returns, arrival_rates) days; returns (model, losses).")
      .def_static("load", [](const std::filesystem::path& p) { return pipe::load_model(p); }, py::arg("path"))
      .def("save", [](const pipe::Model& mdl, const std::filesystem::path& p) { pipe::save_model(p, mdl); },
           py::arg("path"))
      .def_property_readonly("target", [](const pipe::Model& mdl) { return ms::to_string(mdl.meta.target); })
      .def(
          "sample",
          [](pipe::Model& mdl, std::optional<std::size_t> median, std::optional<std::size_t> cls,
             std::optional<double> value, double scale, std::size_t count, std::uint64_t seed,
             std::size_t ddim_steps) {
            pipe::SampleRequest req;
            req.median = median;
            req.cls = cls;
            req.value = value;
            req.scale = scale;
            req.count = count;
            req.seed = seed;
            req.sampler.ddim_steps = ddim_steps;
            std::vector<pipe::SampledState> states;
            {
              py::gil_scoped_release release;
              states = pipe::sample_states(mdl, req);
            }
            py::list out;
            for (const auto& s : states) out.append(state_dict(s));
            return out;
          },
          py::arg("median") = py::none(), py::arg("cls") = py::none(), py::arg("value") = py::none(),
          py::arg("scale") = 1.0, py::arg("count") = 1, py::arg("seed") = 0, py::arg("ddim_steps") = 20,
          "Samples market-state days; no condition gives unconditional samples.");
}
