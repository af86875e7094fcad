#include "diga/metaagent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "diga/error.hpp"

namespace diga::agent {

std::string to_string(WeightLaw law) {
  return law == WeightLaw::Exponential ? "exponential" : "laplace";
}

WeightLaw weight_law_from_string(const std::string& s) {
  if (s == "exponential") return WeightLaw::Exponential;
  if (s == "laplace") return WeightLaw::Laplace;
  throw ConfigError("unknown weight law '" + s + "'");
}

std::string to_string(Fundamental f) { return f == Fundamental::Return ? "return" : "anchored"; }

Fundamental fundamental_from_string(const std::string& s) {
  if (s == "return") return Fundamental::Return;
  if (s == "anchored") return Fundamental::Anchored;
  throw ConfigError("unknown fundamental mode '" + s + "'");
}

std::string to_string(RiskMeasure r) { return r == RiskMeasure::Variance ? "variance" : "std"; }

RiskMeasure risk_measure_from_string(const std::string& s) {
  if (s == "variance") return RiskMeasure::Variance;
  if (s == "std") return RiskMeasure::Std;
  throw ConfigError("unknown risk measure '" + s + "'");
}

double risk_volatility(double vol_std, const MetaAgentParams& gamma) {
  const double v = gamma.risk == RiskMeasure::Variance ? vol_std * vol_std : vol_std;
  return std::max(v, gamma.risk_floor);
}

void MetaAgentParams::validate() const {
  const double all[] = {lambda_f, lambda_c,   lambda_n,   tau0, alpha0, sigma_noise, p0,
                        s0,       c0,         lambda_min, lambda_max, tick, v_min,
                        risk_floor};
  for (double v : all)
    if (!(v > 0.0) || !std::isfinite(v))
      throw ConfigError("meta agent parameters must be positive and finite");
  if (lambda_min > lambda_max) throw ConfigError("meta agent: lambda_min > lambda_max");
}

ActorState make_actor(double S, double C, double g_f, double g_c, double g_n,
                      const MetaAgentParams& gamma) {
  ActorState a{S, C, g_f, g_c, g_n, 0.0, 0.0};
  const double ratio = (1.0 + g_f) / (1.0 + g_c);
  a.tau = gamma.tau0 * ratio;
  a.alpha = gamma.alpha0 * ratio;
  return a;
}

namespace {

double positive_weight(double mean, WeightLaw law, std::mt19937_64& rng) {
  if (law == WeightLaw::Exponential) return std::exponential_distribution<double>(1.0 / mean)(rng);
  // Laplace(mean, mean) restricted to positive draws
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (;;) {
    const double v = u(rng);
    const double x = mean - mean * std::copysign(1.0, v) * std::log1p(-2.0 * std::fabs(v));
    if (x > 0.0) return x;
  }
}

}  // namespace

ActorState spawn_actor(std::mt19937_64& rng, const MetaAgentParams& gamma) {
  const double S = static_cast<double>(
      std::llround(std::exponential_distribution<double>(1.0 / gamma.s0)(rng)));
  const double C = std::exponential_distribution<double>(1.0 / gamma.c0)(rng);
  const double gf = positive_weight(gamma.lambda_f, gamma.law, rng);
  const double gc = positive_weight(gamma.lambda_c, gamma.law, rng);
  const double gn = positive_weight(gamma.lambda_n, gamma.law, rng);
  return make_actor(S, C, gf, gc, gn, gamma);
}

double clamp_rate(double lambda, const MetaAgentParams& gamma) {
  if (!std::isfinite(lambda)) return lambda > 0 ? gamma.lambda_max : gamma.lambda_min;
  return std::clamp(lambda, gamma.lambda_min, gamma.lambda_max);
}

double wake_interval(double lambda, std::mt19937_64& rng, const MetaAgentParams& gamma) {
  return std::exponential_distribution<double>(clamp_rate(lambda, gamma))(rng);
}

double estimate_return(const ActorState& a, double r_t, double r_bar, double r_sigma) {
  return (a.g_f * r_t + a.g_c * r_bar + a.g_n * r_sigma) / (a.g_f + a.g_c + a.g_n);
}

double demand(double p, double p_hat, double alpha, double vol) {
  if (!(p > 0.0) || !(p_hat > 0.0) || !(alpha > 0.0) || !(vol > 0.0))
    throw InputError("demand: inputs must be positive");
  return std::log(p_hat / p) / (alpha * vol * p);
}

std::optional<double> solve_lowest_price(double S, double C, double p_hat, double alpha,
                                         double vol) {
  if (!(S >= 0.0) || !(C >= 0.0) || !(p_hat > 0.0) || !(alpha > 0.0) || !(vol > 0.0))
    throw InputError("solve_lowest_price: invalid inputs");
  const double av = alpha * vol;
  const double y_top = std::log(p_hat);
  // g(y) = (ln p_hat - y) / (alpha V) - e^y S - C, decreasing in y
  auto g = [&](double y) { return (y_top - y) / av - std::exp(y) * S - C; };
  if (C == 0.0 && S == 0.0) return p_hat;

  double hi = y_top;
  double lo = y_top - av * (p_hat * S + C);  // e^lo <= p_hat gives g(lo) >= 0
  if (!std::isfinite(lo) || std::exp(lo) <= std::numeric_limits<double>::min()) return std::nullopt;

  double best = lo;
  double best_g = g(lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if (std::fabs(gm) < std::fabs(best_g)) {
      best = mid;
      best_g = gm;
    }
    if (std::fabs(gm) < 1e-9 || mid == lo || mid == hi) break;
    if (gm > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return std::exp(best);
}

Decision decide(const ActorState& a, const ex::MarketObservation& obs, double r_f,
                std::mt19937_64& rng, const MetaAgentParams& gamma) {
  Decision d;
  const double r_sigma = std::normal_distribution<double>(0.0, gamma.sigma_noise)(rng);
  d.r_hat = estimate_return(a, r_f, obs.r_bar, r_sigma);
  d.p_hat = obs.p_t * std::exp(d.r_hat);
  const double V = risk_volatility(obs.vol, gamma);

  const auto pl = solve_lowest_price(a.S, a.C, d.p_hat, a.alpha, V);
  if (!pl) {
    d.skip = "bracket";
    return d;
  }
  d.p_low = *pl;
  const auto lo_ticks = std::llround(d.p_low / gamma.tick);
  const auto hi_ticks = std::llround(d.p_hat / gamma.tick);
  if (lo_ticks >= hi_ticks) {
    d.skip = "collapsed";
    return d;
  }

  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  d.p_raw = d.p_low + u * (d.p_hat - d.p_low);
  d.q_raw = demand(d.p_raw, d.p_hat, a.alpha, V) - a.S;

  const std::int64_t ticks = std::max<std::int64_t>(1, std::llround(d.p_raw / gamma.tick));
  std::int64_t qty = std::llround(std::fabs(d.q_raw));
  const ex::Side side = d.q_raw > 0.0 ? ex::Side::Buy : ex::Side::Sell;
  if (side == ex::Side::Sell) qty = std::min<std::int64_t>(qty, static_cast<std::int64_t>(a.S));
  if (qty < 1) {
    d.skip = "quantity";
    return d;
  }
  ex::Order o;
  o.price = ticks;
  o.qty = qty;
  o.side = side;
  d.order = o;
  return d;
}

GenerationResult generate_day(const ms::MarketStateDay& states, const MetaAgentParams& gamma,
                              std::uint64_t seed) {
  gamma.validate();
  states.validate(false);
  ex::Exchange exch(ex::ExchangeConfig{gamma.tick, gamma.p0, gamma.v_min});
  std::mt19937_64 rng(seed);
  GenerationResult out;
  const std::size_t T = states.minutes();
  out.oir.reserve(T);
  std::int64_t next_id = 1;
  double log_pf = std::log(gamma.p0);

  for (std::size_t m = 0; m < T; ++m) {
    log_pf += states.returns[m];
    const double rate = clamp_rate(states.arrival_rates[m], gamma);
    std::exponential_distribution<double> gap(rate);
    const double end = static_cast<double>(m + 1);
    // Memorylessness lets the clock restart at each minute boundary, so the
    // wake-up process is exact for a piecewise-constant rate.
    double t = static_cast<double>(m);
    for (;;) {
      t += gap(rng);
      if (t >= end) break;
      ++out.wakeups;
      const ActorState actor = spawn_actor(rng, gamma);
      const auto obs = exch.observe(actor.tau);
      const double r_f = gamma.fundamental == Fundamental::Anchored
                             ? log_pf - std::log(obs.p_t)
                             : states.returns[m];
      Decision d = decide(actor, obs, r_f, rng, gamma);
      if (!d.order) {
        ++out.skipped;
        continue;
      }
      ex::Order o = *d.order;
      o.id = next_id++;
      o.t = t * 60.0;
      auto trades = exch.submit(o);
      out.trades.insert(out.trades.end(), trades.begin(), trades.end());
      out.flow.push_back(o);
    }
    exch.minute_close();
    out.oir.push_back(exch.oir());
  }
  out.minute_prices = exch.minute_prices();
  return out;
}

}  // namespace diga::agent
