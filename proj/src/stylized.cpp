#include "diga/stylized.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "diga/error.hpp"

namespace diga::sf {

double autocorr(std::span<const double> x, std::size_t lag) {
  if (x.size() <= lag + 1)
    throw InputError("autocorr: series of length " + std::to_string(x.size()) +
                     " too short for lag " + std::to_string(lag));
  const std::size_t n = x.size() - lag;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += x[i];
    mb += x[i + lag];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = x[i] - ma;
    const double b = x[i + lag] - mb;
    sab += a * b;
    saa += a * a;
    sbb += b * b;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<double> log_returns(std::span<const double> prices) {
  if (prices.size() < 2) throw InputError("log_returns: need at least two prices");
  std::vector<double> r(prices.size() - 1);
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!(prices[i] > 0.0) || !(prices[i + 1] > 0.0))
      throw InputError("log_returns: prices must be positive");
    r[i] = std::log(prices[i + 1] / prices[i]);
  }
  return r;
}

FactVector compute_facts(std::span<const double> minute_prices, std::span<const double> oir,
                         std::span<const std::size_t> lags) {
  FactVector f;
  f.minr = log_returns(minute_prices);
  std::vector<double> sq(f.minr.size());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = f.minr[i] * f.minr[i];
  for (std::size_t lag : lags) {
    f.retac.push_back(autocorr(f.minr, lag));
    f.volc.push_back(autocorr(sq, lag));
  }
  f.oir.assign(oir.begin(), oir.end());
  return f;
}

Histogram Histogram::build(std::span<const double> samples, double lo, double hi,
                           std::size_t bins) {
  if (bins == 0) throw InputError("histogram: need at least one bin");
  Histogram h{lo, hi, std::vector<double>(bins, 0.0)};
  const double width = (hi - lo) / static_cast<double>(bins);
  for (double v : samples) {
    std::size_t k = 0;
    if (width > 0.0) {
      const double pos = std::floor((v - lo) / width);
      k = pos <= 0.0 ? 0 : std::min(bins - 1, static_cast<std::size_t>(pos));
    }
    h.counts[k] += 1.0;
  }
  return h;
}

std::vector<double> Histogram::probabilities(double eps) const {
  double n = 0.0;
  for (double c : counts) n += c;
  const double denom = 1.0 + static_cast<double>(counts.size()) * eps;
  std::vector<double> p(counts.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = (counts[i] / n + eps) / denom;
  return p;
}

double kl_divergence(std::span<const double> real, std::span<const double> sim, std::size_t bins,
                     double eps) {
  if (real.empty() || sim.empty()) throw InputError("kl_divergence: empty sample set");
  double lo = real[0], hi = real[0];
  for (auto s : {real, sim})
    for (double v : s) {
      if (!std::isfinite(v)) throw InputError("kl_divergence: non-finite sample");
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const auto p = Histogram::build(real, lo, hi, bins).probabilities(eps);
  const auto q = Histogram::build(sim, lo, hi, bins).probabilities(eps);
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) kl += p[i] * std::log(p[i] / q[i]);
  return std::max(0.0, kl);
}

double controllability_mse(std::span<const double> targets, std::span<const double> realized) {
  if (targets.size() != realized.size())
    throw InputError("controllability_mse: length mismatch");
  if (targets.empty()) throw InputError("controllability_mse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double d = targets[i] - realized[i];
    s += d * d;
  }
  return s / static_cast<double>(targets.size());
}

SynthCorpus synth_corpus(std::uint64_t seed, const SynthConfig& cfg) {
  if (cfg.days == 0 || cfg.minutes < 2) throw InputError("synth: need days >= 1 and T >= 2");
  if (cfg.garch_a < 0.0 || cfg.garch_b < 0.0 || cfg.garch_a + cfg.garch_b >= 1.0)
    throw InputError("synth: GARCH coefficients must satisfy a, b >= 0 and a + b < 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  const std::size_t T = cfg.minutes;
  const double drift_std = cfg.drift_scale / std::sqrt(static_cast<double>(T));

  SynthCorpus out;
  out.days.reserve(cfg.days);
  out.indicators.reserve(cfg.days);
  for (std::size_t d = 0; d < cfg.days; ++d) {
    const double mu = drift_std * z(rng);
    const double sigma_day = cfg.vol_median * std::exp(cfg.vol_dispersion * z(rng));
    const double base = cfg.rate_median * std::exp(cfg.rate_dispersion * z(rng));
    const double omega = sigma_day * sigma_day * (1.0 - cfg.garch_a - cfg.garch_b);

    ms::MarketStateDay day;
    day.returns.resize(T);
    day.arrival_rates.resize(T);
    double var = sigma_day * sigma_day;
    double shock = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      var = omega + cfg.garch_a * shock * shock + cfg.garch_b * var;
      shock = std::sqrt(var) * z(rng);
      day.returns[t] = mu + shock;
      const double x = 2.0 * static_cast<double>(t) / static_cast<double>(T - 1) - 1.0;
      const double shape = 1.0 + cfg.intraday_u * x * x;
      const double rate =
          base * (1.0 + cfg.activity_coupling * std::fabs(shock) / sigma_day) * shape;
      day.arrival_rates[t] = std::max(0.0, std::round(rate));
    }
    out.indicators.push_back(ms::indicators_of(day));
    out.days.push_back(std::move(day));
  }
  return out;
}

}  // namespace diga::sf
