#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "diga/error.hpp"
#include "diga/marketstate.hpp"

using namespace diga;
using ms::TickKind;
using ms::TickRecord;

namespace {

// Two resting quotes around `mid` plus (n - 2) far-away orders that do not
// touch the top of book.
void quote_minute(std::vector<TickRecord>& flow, std::size_t minute, double bid, double ask,
                  std::size_t n) {
  const double t0 = 60.0 * static_cast<double>(minute);
  flow.push_back({t0 + 1.0, bid, 5, TickKind::BuyLimit, std::nullopt});
  flow.push_back({t0 + 2.0, ask, 5, TickKind::SellLimit, std::nullopt});
  for (std::size_t i = 2; i < n; ++i)
    flow.push_back({t0 + 2.0 + static_cast<double>(i), 1.0, 1, TickKind::BuyLimit, std::nullopt});
}

}  // namespace

TEST(Indicators, ConstantSeries) {
  const std::vector<double> p(10, 7.5);
  const auto s = ms::compute_indicators(p);
  EXPECT_EQ(s.daily_return, 0.0);
  EXPECT_EQ(s.amplitude, 0.0);
  EXPECT_EQ(s.volatility, 0.0);
}

TEST(Indicators, HandExample) {
  const std::vector<double> p{10, 10.2, 9.9, 10.1};
  const auto s = ms::compute_indicators(p);
  EXPECT_NEAR(s.daily_return, 0.009950330853168083, 1e-15);
  EXPECT_NEAR(s.amplitude, 0.03, 1e-15);
  const double r[] = {std::log(1.02), std::log(9.9 / 10.2), std::log(10.1 / 9.9)};
  const double m = (r[0] + r[1] + r[2]) / 3.0;
  const double v = ((r[0] - m) * (r[0] - m) + (r[1] - m) * (r[1] - m) + (r[2] - m) * (r[2] - m)) / 3.0;
  EXPECT_NEAR(s.volatility, std::sqrt(v), 1e-15);
}

TEST(Indicators, IncreasingSeriesAmplitude) {
  const std::vector<double> p{1.0, 1.5, 2.0, 4.0};
  EXPECT_DOUBLE_EQ(ms::compute_indicators(p).amplitude, 3.0);
}

TEST(Indicators, RejectNonPositive) {
  const std::vector<double> p{1.0, 0.0, 2.0};
  EXPECT_THROW(ms::compute_indicators(p), InputError);
}

TEST(Indicators, ReturnsRoundTrip) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 0.002);
  ms::MarketStateDay d;
  for (int t = 0; t < 236; ++t) {
    d.returns.push_back(n(rng));
    d.arrival_rates.push_back(10.0);
  }
  double sum = 0.0;
  for (double r : d.returns) sum += r;
  EXPECT_NEAR(ms::indicators_of(d).daily_return, sum, 1e-9);
}

TEST(Extract, ConstantMidAndCounts) {
  std::vector<TickRecord> flow;
  quote_minute(flow, 0, 9.99, 10.01, 4);
  quote_minute(flow, 1, 9.99, 10.01, 5);
  quote_minute(flow, 2, 9.99, 10.01, 6);
  const auto d = ms::extract_market_states(flow, 3);
  ASSERT_EQ(d.minutes(), 3u);
  for (double r : d.returns) EXPECT_EQ(r, 0.0);
  EXPECT_EQ(d.arrival_rates, (std::vector<double>{4, 5, 6}));
}

TEST(Extract, MidPriceMoves) {
  std::vector<TickRecord> flow;
  quote_minute(flow, 0, 9.99, 10.01, 2);
  // lift the whole ask and post a new one: mid 10.1
  flow.push_back({61.0, 10.01, 5, TickKind::BuyLimit, std::nullopt});
  flow.push_back({62.0, 10.19, 5, TickKind::SellLimit, std::nullopt});
  flow.push_back({63.0, 10.01, 5, TickKind::BuyLimit, std::nullopt});
  const auto d = ms::extract_market_states(flow, 3);
  EXPECT_EQ(d.returns[0], 0.0);
  EXPECT_NEAR(d.returns[1], 0.009950330853168083, 1e-12);
  EXPECT_EQ(d.returns[2], 0.0);
  EXPECT_EQ(d.arrival_rates, (std::vector<double>{2, 3, 0}));
}

TEST(Extract, EmptyMinuteCarriesForward) {
  std::vector<TickRecord> flow;
  quote_minute(flow, 0, 9.99, 10.01, 2);
  quote_minute(flow, 2, 9.99, 10.01, 2);
  const auto d = ms::extract_market_states(flow, 4);
  EXPECT_EQ(d.arrival_rates[1], 0.0);
  EXPECT_EQ(d.returns[1], 0.0);
  EXPECT_EQ(d.arrival_rates[3], 0.0);
}

TEST(Extract, CancelByIdAndByLevel) {
  std::vector<TickRecord> flow{
      {1.0, 9.90, 5, TickKind::BuyLimit, 1},  {2.0, 10.10, 5, TickKind::SellLimit, 2},
      {3.0, 9.95, 5, TickKind::BuyLimit, 3},  {61.0, 9.95, 5, TickKind::Cancel, 3},
      {121.0, 10.10, 5, TickKind::Cancel, std::nullopt},
      {122.0, 10.30, 1, TickKind::SellLimit, std::nullopt}};
  const auto d = ms::extract_market_states(flow, 3);
  // first two-sided mid 10.0; minute-end mids 10.025, 10.0, 10.1
  EXPECT_NEAR(d.returns[0], std::log(10.025 / 10.0), 1e-12);
  EXPECT_NEAR(d.returns[1], std::log(10.0 / 10.025), 1e-12);
  EXPECT_NEAR(d.returns[2], std::log(10.1 / 10.0), 1e-12);
  EXPECT_EQ(d.arrival_rates, (std::vector<double>{3, 0, 1}));
}

TEST(Extract, RejectsBadFlows) {
  std::vector<TickRecord> neg{{1.0, -1.0, 1, TickKind::BuyLimit, std::nullopt}};
  EXPECT_THROW(ms::extract_market_states(neg, 3), InputError);
  std::vector<TickRecord> back{{5.0, 10.0, 1, TickKind::BuyLimit, std::nullopt},
                               {4.0, 10.1, 1, TickKind::SellLimit, std::nullopt}};
  EXPECT_THROW(ms::extract_market_states(back, 3), InputError);
  std::vector<TickRecord> late{{200.0, 10.0, 1, TickKind::BuyLimit, std::nullopt}};
  EXPECT_THROW(ms::extract_market_states(late, 3), InputError);
  std::vector<TickRecord> one_sided{{1.0, 10.0, 1, TickKind::BuyLimit, std::nullopt}};
  EXPECT_THROW(ms::extract_market_states(one_sided, 3), InputError);
  std::vector<TickRecord> zero_q{{1.0, 10.0, 0, TickKind::BuyLimit, std::nullopt}};
  EXPECT_THROW(ms::extract_market_states(zero_q, 3), InputError);
}

TEST(Normalizer, HandExample) {
  std::vector<ms::MarketStateDay> c{{{0.0}, {5.0}}, {{2.0}, {5.0}}};
  const auto n = ms::Normalizer::fit(c);
  EXPECT_DOUBLE_EQ(n.mean[0], 1.0);
  EXPECT_DOUBLE_EQ(n.std[0], 1.0);
  EXPECT_DOUBLE_EQ(n.apply(0, 0.0), -1.0);
  EXPECT_EQ(n.std[1], ms::kMinStd);
  EXPECT_EQ(n.apply(1, 5.0), 0.0);
}

TEST(Normalizer, RoundTrip) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<ms::MarketStateDay> c(5);
  for (auto& d : c)
    for (int t = 0; t < 30; ++t) {
      d.returns.push_back(1e-3 * g(rng));
      d.arrival_rates.push_back(50.0 + 10.0 * g(rng));
    }
  const auto n = ms::Normalizer::fit(c);
  for (const auto& d : c) {
    const auto back = n.invert(n.apply(d));
    for (int t = 0; t < 30; ++t) {
      EXPECT_NEAR(back.returns[t], d.returns[t], 1e-9);
      EXPECT_NEAR(back.arrival_rates[t], d.arrival_rates[t], 1e-9);
    }
  }
  const auto x = ms::to_tensor(c, n);
  const auto d2 = ms::from_tensor(x, 3, n);
  EXPECT_NEAR(d2.arrival_rates[7], c[3].arrival_rates[7], 1e-9);
}

TEST(Bins, EdgesAndClassification) {
  std::vector<double> v;
  for (int i = 0; i < 101; ++i) v.push_back(static_cast<double>(i));
  const auto b = ms::ConditionBins::make(v);
  EXPECT_DOUBLE_EQ(b.edges[0], 20.0);
  EXPECT_DOUBLE_EQ(b.edges[3], 80.0);
  EXPECT_EQ(b.classify(-5.0), 0u);
  EXPECT_EQ(b.classify(19.9), 0u);
  EXPECT_EQ(b.classify(20.0), 1u);
  EXPECT_EQ(b.classify(80.0), 4u);
  EXPECT_EQ(b.classify(1e9), 4u);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(b.classify(b.medians[k]), k);
  EXPECT_DOUBLE_EQ(b.medians[0], 9.5);
  EXPECT_DOUBLE_EQ(b.medians[4], 90.0);
}

TEST(Bins, MonotoneAndRejectsFewValues) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(500);
  for (auto& x : v) x = g(rng);
  const auto b = ms::ConditionBins::make(v);
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 1; i < sorted.size(); ++i)
    EXPECT_LE(b.classify(sorted[i - 1]), b.classify(sorted[i]));
  for (std::size_t k = 1; k < 5; ++k) EXPECT_LT(b.medians[k - 1], b.medians[k]);
  const std::vector<double> few{1, 2, 3, 4, 4, 4};
  EXPECT_THROW(ms::ConditionBins::make(few), InputError);
}

TEST(MarketStateDay, Validation) {
  ms::MarketStateDay d{{0.0, 0.1}, {1.0}};
  EXPECT_THROW(d.validate(true), InputError);
  d.arrival_rates = {1.0, -1.0};
  EXPECT_THROW(d.validate(true), InputError);
  EXPECT_NO_THROW(d.validate(false));
  d.returns[0] = std::nan("");
  EXPECT_THROW(d.validate(false), InputError);
}
