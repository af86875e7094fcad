#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "diga/marketstate.hpp"

namespace diga::sf {

inline const std::vector<std::size_t> kDefaultLags{1, 2, 3, 5, 10};

// Pearson correlation of (x_t, x_{t+lag}); 0 if either slice is constant.
// Requires x.size() > lag + 1.
double autocorr(std::span<const double> x, std::size_t lag);

std::vector<double> log_returns(std::span<const double> prices);

struct FactVector {
  std::vector<double> minr;   // minutely log returns
  std::vector<double> retac;  // return autocorrelation per lag
  std::vector<double> volc;   // squared-return autocorrelation per lag
  std::vector<double> oir;    // per-minute order imbalance
};

// Facts for one day from its T+1 minute prices and T minute-close OIR values.
FactVector compute_facts(std::span<const double> minute_prices, std::span<const double> oir,
                         std::span<const std::size_t> lags = kDefaultLags);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> counts;

  // Uniform bins over [lo, hi]; the top edge belongs to the last bin.
  static Histogram build(std::span<const double> samples, double lo, double hi, std::size_t bins);
  // (c_i / n + eps) / (1 + bins * eps)
  std::vector<double> probabilities(double eps) const;
};

// KL(p_real || p_sim) over shared uniform bins spanning the pooled range.
double kl_divergence(std::span<const double> real, std::span<const double> sim,
                     std::size_t bins = 50, double eps = 1e-9);

double controllability_mse(std::span<const double> targets, std::span<const double> realized);

struct SynthConfig {
  std::size_t days = 500;
  std::size_t minutes = ms::kTradingMinutes;
  double drift_scale = 0.01;     // per-minute drift ~ N(0, drift_scale^2 / T)
  double vol_median = 1e-3;      // median per-minute volatility
  double vol_dispersion = 0.3;   // log-normal spread of the daily volatility
  double garch_a = 0.1;
  double garch_b = 0.85;
  double rate_median = 60.0;     // median orders per minute
  double rate_dispersion = 0.2;
  double activity_coupling = 0.5;  // kappa
  double intraday_u = 0.5;       // depth of the U-shaped intraday activity
};

struct SynthCorpus {
  std::vector<ms::MarketStateDay> days;
  std::vector<ms::IndicatorSet> indicators;
};

// Deterministic synthetic market-state corpus: per day a constant drift, a
// GARCH(1,1)-style volatility path around a log-normal daily level, and
// arrival rates that rise with |r - drift| and at the open and close.
SynthCorpus synth_corpus(std::uint64_t seed, const SynthConfig& cfg);

}  // namespace diga::sf
