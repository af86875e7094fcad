#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diga/tensor.hpp"

namespace diga::ms {

inline constexpr std::size_t kTradingMinutes = 236;

// One trading day's paired minutely series. Channel 0 is the log mid-price
// return, channel 1 the order arrival rate (orders per minute).
struct MarketStateDay {
  std::vector<double> returns;
  std::vector<double> arrival_rates;

  std::size_t minutes() const { return returns.size(); }
  // Throws InputError on length mismatch, non-finite entries, or (raw space)
  // negative arrival rates.
  void validate(bool raw_space) const;
};

struct IndicatorSet {
  double daily_return = 0.0;  // log(close / open)
  double amplitude = 0.0;     // (high - low) / open
  double volatility = 0.0;    // population std of minutely log returns
};

enum class Indicator { DailyReturn, Amplitude, Volatility };

std::string to_string(Indicator ind);
Indicator indicator_from_string(const std::string& s);
double indicator_value(const IndicatorSet& set, Indicator ind);

// minute_prices holds T+1 strictly positive prices (open, then each minute end).
IndicatorSet compute_indicators(std::span<const double> minute_prices);

// p_0 = open, p_t = p_{t-1} * exp(r_t)
std::vector<double> prices_from_returns(std::span<const double> returns, double open = 1.0);
IndicatorSet indicators_of(const MarketStateDay& day);

// ---- tick preprocessing ------------------------------------------------

enum class TickKind { BuyLimit, SellLimit, Cancel };

struct TickRecord {
  double t = 0.0;       // seconds from day open
  double p = 0.0;       // price
  std::int64_t q = 0;   // quantity
  TickKind kind = TickKind::BuyLimit;
  std::optional<std::int64_t> id;  // order id (limit) or target id (cancel)
};

// Replays a day's tick records through a price-time-priority book and emits
// minute-end mid-price returns and per-minute limit-order counts. The first
// return is measured from the first two-sided mid of the day; minutes without
// a two-sided book carry the previous mid forward. Throws InputError for
// non-positive prices, bad quantities, decreasing or out-of-range timestamps,
// or a day that never has a two-sided book.
MarketStateDay extract_market_states(std::span<const TickRecord> flow,
                                     std::size_t minutes = kTradingMinutes, double tick = 0.01);

// ---- normalisation -----------------------------------------------------

inline constexpr double kMinStd = 1e-8;

// Channel-wise z-score over every day and minute.
struct Normalizer {
  std::array<double, 2> mean{0.0, 0.0};
  std::array<double, 2> std{1.0, 1.0};

  static Normalizer fit(std::span<const MarketStateDay> corpus);

  double apply(std::size_t channel, double v) const { return (v - mean[channel]) / std[channel]; }
  double invert(std::size_t channel, double z) const { return z * std[channel] + mean[channel]; }
  MarketStateDay apply(const MarketStateDay& day) const;
  MarketStateDay invert(const MarketStateDay& day) const;
};

// Scalar z-score, used for continuous condition targets.
struct ScalarNormalizer {
  double mean = 0.0;
  double std = 1.0;

  static ScalarNormalizer fit(std::span<const double> values);
  double apply(double v) const { return (v - mean) / std; }
  double invert(double z) const { return z * std + mean; }
};

// Five quantile bins (lower, low, mid, high, higher) on right-open intervals
// cut at the 20/40/60/80th percentiles. A value equal to an edge goes to the
// upper bin.
struct ConditionBins {
  static constexpr std::size_t kBins = 5;
  std::array<double, kBins - 1> edges{};
  std::array<double, kBins> medians{};

  static ConditionBins make(std::span<const double> values);
  std::size_t classify(double v) const;
};

// Linear-interpolation percentile (q in [0, 1]) of unsorted values.
double percentile(std::span<const double> values, double q);
double median(std::span<const double> values);

// ---- tensor conversion ---------------------------------------------------

// [D, 2, T] normalised tensor.
tk::Tensor to_tensor(std::span<const MarketStateDay> days, const Normalizer& norm);
// Row b of a [B, 2, T] normalised tensor, mapped back to raw space.
MarketStateDay from_tensor(const tk::Tensor& batch, std::size_t b, const Normalizer& norm);

}  // namespace diga::ms
