#include "diga/marketstate.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "diga/error.hpp"
#include "diga/exchange.hpp"

namespace diga::ms {

void MarketStateDay::validate(bool raw_space) const {
  if (returns.empty()) throw InputError("market state: empty day");
  if (returns.size() != arrival_rates.size())
    throw InputError("market state: returns and arrival_rates differ in length");
  for (std::size_t t = 0; t < returns.size(); ++t) {
    if (!std::isfinite(returns[t]) || !std::isfinite(arrival_rates[t]))
      throw InputError("market state: non-finite entry at minute " + std::to_string(t));
    if (raw_space && arrival_rates[t] < 0.0)
      throw InputError("market state: negative arrival rate at minute " + std::to_string(t));
  }
}

std::string to_string(Indicator ind) {
  switch (ind) {
    case Indicator::DailyReturn: return "return";
    case Indicator::Amplitude: return "amplitude";
    case Indicator::Volatility: return "volatility";
  }
  return "?";
}

Indicator indicator_from_string(const std::string& s) {
  if (s == "return" || s == "daily_return") return Indicator::DailyReturn;
  if (s == "amplitude") return Indicator::Amplitude;
  if (s == "volatility") return Indicator::Volatility;
  throw InputError("unknown indicator '" + s + "' (expected return, amplitude or volatility)");
}

double indicator_value(const IndicatorSet& set, Indicator ind) {
  switch (ind) {
    case Indicator::DailyReturn: return set.daily_return;
    case Indicator::Amplitude: return set.amplitude;
    case Indicator::Volatility: return set.volatility;
  }
  return 0.0;
}

IndicatorSet compute_indicators(std::span<const double> p) {
  if (p.size() < 2) throw InputError("indicators: need at least two prices");
  for (double v : p)
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError("indicators: prices must be positive");
  IndicatorSet out;
  out.daily_return = std::log(p.back() / p.front());
  const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
  out.amplitude = (*hi - *lo) / p.front();

  const std::size_t n = p.size() - 1;
  std::vector<double> r(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = std::log(p[i + 1] / p[i]);
    mean += r[i];
  }
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : r) var += (v - mean) * (v - mean);
  out.volatility = std::sqrt(var / static_cast<double>(n));
  return out;
}

std::vector<double> prices_from_returns(std::span<const double> returns, double open) {
  std::vector<double> p(returns.size() + 1);
  p[0] = open;
  for (std::size_t i = 0; i < returns.size(); ++i) p[i + 1] = p[i] * std::exp(returns[i]);
  return p;
}

IndicatorSet indicators_of(const MarketStateDay& day) {
  return compute_indicators(prices_from_returns(day.returns));
}

MarketStateDay extract_market_states(std::span<const TickRecord> flow, std::size_t minutes,
                                     double tick) {
  if (minutes == 0) throw InputError("extract: T must be positive");
  if (flow.empty()) throw InputError("extract: empty order flow");
  ex::Exchange book(ex::ExchangeConfig{tick, 10.0, 1e-4});
  const double horizon = static_cast<double>(minutes) * 60.0;

  std::vector<std::optional<double>> mids(minutes);
  std::vector<double> counts(minutes, 0.0);
  std::optional<double> open_mid;
  std::optional<double> carried;
  std::int64_t auto_id = std::int64_t{1} << 48;
  double last_t = 0.0;
  std::size_t minute = 0;

  auto close_until = [&](std::size_t upto) {
    for (; minute < upto; ++minute) {
      if (const auto m = book.mid()) carried = m;
      mids[minute] = carried;
    }
  };

  for (std::size_t i = 0; i < flow.size(); ++i) {
    const TickRecord& r = flow[i];
    const std::string at = " (record " + std::to_string(i + 1) + ")";
    if (!std::isfinite(r.t) || r.t < 0.0 || r.t >= horizon)
      throw InputError("extract: timestamp outside the trading day" + at);
    if (r.t < last_t) throw InputError("extract: timestamps must be non-decreasing" + at);
    if (!(r.p > 0.0) || !std::isfinite(r.p)) throw InputError("extract: non-positive price" + at);
    if (r.q < 1) throw InputError("extract: quantity must be >= 1" + at);
    last_t = r.t;

    close_until(static_cast<std::size_t>(r.t / 60.0));
    const std::int64_t px = book.to_ticks(r.p);
    if (px <= 0) throw InputError("extract: price rounds to zero ticks" + at);

    if (r.kind == TickKind::Cancel) {
      if (r.id)
        book.cancel(*r.id);
      else
        book.reduce_level(px, r.q);
    } else {
      ex::Order o;
      o.id = r.id ? *r.id : auto_id++;
      o.t = r.t;
      o.price = px;
      o.qty = r.q;
      o.side = r.kind == TickKind::BuyLimit ? ex::Side::Buy : ex::Side::Sell;
      book.submit(o);
      counts[minute] += 1.0;
    }
    if (!open_mid) open_mid = book.mid();
  }
  close_until(minutes);
  if (!open_mid) throw InputError("extract: the book is never two-sided");

  MarketStateDay day;
  day.returns.resize(minutes);
  day.arrival_rates = std::move(counts);
  double prev = *open_mid;
  for (std::size_t t = 0; t < minutes; ++t) {
    const double cur = mids[t] ? *mids[t] : *open_mid;
    day.returns[t] = std::log(cur / prev);
    prev = cur;
  }
  return day;
}

Normalizer Normalizer::fit(std::span<const MarketStateDay> corpus) {
  if (corpus.empty()) throw InputError("normalizer: empty corpus");
  Normalizer n;
  for (std::size_t c = 0; c < 2; ++c) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& d : corpus) {
      const auto& v = c == 0 ? d.returns : d.arrival_rates;
      for (double x : v) sum += x;
      count += v.size();
    }
    if (count == 0) throw InputError("normalizer: empty corpus");
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (const auto& d : corpus) {
      const auto& v = c == 0 ? d.returns : d.arrival_rates;
      for (double x : v) ss += (x - mean) * (x - mean);
    }
    n.mean[c] = mean;
    n.std[c] = std::max(kMinStd, std::sqrt(ss / static_cast<double>(count)));
  }
  return n;
}

MarketStateDay Normalizer::apply(const MarketStateDay& day) const {
  MarketStateDay out = day;
  for (auto& v : out.returns) v = apply(0, v);
  for (auto& v : out.arrival_rates) v = apply(1, v);
  return out;
}

MarketStateDay Normalizer::invert(const MarketStateDay& day) const {
  MarketStateDay out = day;
  for (auto& v : out.returns) v = invert(0, v);
  for (auto& v : out.arrival_rates) v = invert(1, v);
  return out;
}

ScalarNormalizer ScalarNormalizer::fit(std::span<const double> values) {
  if (values.empty()) throw InputError("normalizer: no values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::max(kMinStd, std::sqrt(ss / static_cast<double>(values.size())))};
}

double percentile(std::span<const double> values, double q) {
  if (values.empty()) throw InputError("percentile: no values");
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

double median(std::span<const double> values) { return percentile(values, 0.5); }

ConditionBins ConditionBins::make(std::span<const double> values) {
  for (double v : values)
    if (!std::isfinite(v)) throw InputError("bins: non-finite value");
  if (std::set<double>(values.begin(), values.end()).size() < kBins)
    throw InputError("bins: need at least 5 distinct values");
  ConditionBins b;
  for (std::size_t k = 0; k + 1 < kBins; ++k)
    b.edges[k] = percentile(values, 0.2 * static_cast<double>(k + 1));
  for (std::size_t k = 1; k < b.edges.size(); ++k)
    if (!(b.edges[k] > b.edges[k - 1]))
      throw InputError("bins: percentile edges are not strictly increasing");

  std::array<std::vector<double>, kBins> members;
  for (double v : values) members[b.classify(v)].push_back(v);
  for (std::size_t k = 0; k < kBins; ++k) {
    if (!members[k].empty()) {
      b.medians[k] = median(members[k]);
    } else {
      // only reachable with heavy ties; fall back to the bin's centre
      const double lo = k == 0 ? b.edges[0] : b.edges[k - 1];
      const double hi = k == kBins - 1 ? b.edges[k - 1] : b.edges[k];
      b.medians[k] = 0.5 * (lo + hi);
    }
  }
  return b;
}

std::size_t ConditionBins::classify(double v) const {
  std::size_t k = 0;
  while (k < edges.size() && v >= edges[k]) ++k;
  return k;
}

tk::Tensor to_tensor(std::span<const MarketStateDay> days, const Normalizer& norm) {
  if (days.empty()) throw InputError("to_tensor: no days");
  const std::size_t T = days.front().minutes();
  tk::Tensor out({days.size(), 2, T});
  for (std::size_t d = 0; d < days.size(); ++d) {
    if (days[d].minutes() != T || days[d].arrival_rates.size() != T)
      throw InputError("to_tensor: days differ in length");
    for (std::size_t t = 0; t < T; ++t) {
      out.at(d, 0, t) = norm.apply(0, days[d].returns[t]);
      out.at(d, 1, t) = norm.apply(1, days[d].arrival_rates[t]);
    }
  }
  return out;
}

MarketStateDay from_tensor(const tk::Tensor& batch, std::size_t b, const Normalizer& norm) {
  if (batch.rank() != 3 || batch.dim(1) != 2 || b >= batch.dim(0))
    throw InputError("from_tensor: expected [B, 2, T] and a valid row");
  const std::size_t T = batch.dim(2);
  MarketStateDay day;
  day.returns.resize(T);
  day.arrival_rates.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    day.returns[t] = norm.invert(0, batch.at(b, 0, t));
    day.arrival_rates[t] = norm.invert(1, batch.at(b, 1, t));
  }
  return day;
}

}  // namespace diga::ms
