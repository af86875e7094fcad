#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "diga/error.hpp"
#include "diga/metaagent.hpp"

using namespace diga;
using agent::MetaAgentParams;

namespace {

ms::MarketStateDay flat_day(std::size_t T, double rate, double r = 0.0) {
  return ms::MarketStateDay{std::vector<double>(T, r), std::vector<double>(T, rate)};
}

}  // namespace

TEST(Actor, WeightMeansFollowParameters) {
  MetaAgentParams g;
  std::mt19937_64 rng(1);
  double f = 0, c = 0, n = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto a = agent::spawn_actor(rng, g);
    ASSERT_GT(a.g_f, 0.0);
    ASSERT_GT(a.g_c, 0.0);
    ASSERT_GT(a.g_n, 0.0);
    ASSERT_GE(a.S, 0.0);
    ASSERT_EQ(a.S, std::round(a.S));
    ASSERT_GT(a.C, 0.0);
    f += a.g_f;
    c += a.g_c;
    n += a.g_n;
  }
  EXPECT_NEAR(f / draws, 10.0, 0.5);
  EXPECT_NEAR(c / draws, 1.5, 0.075);
  EXPECT_NEAR(n / draws, 1.0, 0.05);
}

TEST(Actor, LaplaceLawStaysPositive) {
  MetaAgentParams g;
  g.law = agent::WeightLaw::Laplace;
  std::mt19937_64 rng(2);
  for (int i = 0; i < 2000; ++i) {
    const auto a = agent::spawn_actor(rng, g);
    ASSERT_GT(a.g_f, 0.0);
    ASSERT_GT(a.g_c, 0.0);
    ASSERT_GT(a.g_n, 0.0);
  }
}

TEST(Actor, DerivedHorizonAndRiskAversion) {
  MetaAgentParams g;
  const auto a = agent::make_actor(10, 100, 2.0, 2.0, 1.0, g);
  EXPECT_DOUBLE_EQ(a.tau, 30.0);
  EXPECT_DOUBLE_EQ(a.alpha, 0.1);
  const auto b = agent::make_actor(10, 100, 5.0, 1.0, 1.0, g);
  EXPECT_DOUBLE_EQ(b.tau, 90.0);
  EXPECT_DOUBLE_EQ(b.alpha, 0.30000000000000004);
}

TEST(Wake, IntervalMeanAndClamp) {
  MetaAgentParams g;
  std::mt19937_64 rng(3);
  double s = 0;
  for (int i = 0; i < 100000; ++i) {
    const double d = agent::wake_interval(50.0, rng, g);
    ASSERT_GT(d, 0.0);
    s += d;
  }
  EXPECT_NEAR(s / 100000, 0.02, 0.02 * 0.02);
  EXPECT_EQ(agent::clamp_rate(-3.0, g), 1e-3);
  EXPECT_EQ(agent::clamp_rate(1e9, g), 5000.0);
}

TEST(Estimate, ConvexCombination) {
  MetaAgentParams g;
  auto a = agent::make_actor(0, 1, 1, 1, 1, g);
  EXPECT_NEAR(agent::estimate_return(a, 0.01, 0.02, 0.0), 0.01, 1e-17);
  a.g_c = 0;
  a.g_n = 0;
  EXPECT_EQ(agent::estimate_return(a, 0.013, 0.5, -0.2), 0.013);
}

TEST(Demand, Values) {
  EXPECT_EQ(agent::demand(10.0, 10.0, 0.1, 0.01), 0.0);
  EXPECT_NEAR(agent::demand(10.0, 10.5, 0.1, 0.01), 4.879016416943205, 1e-12);
  double prev = agent::demand(0.5, 10.0, 0.1, 0.01);
  for (double p = 0.6; p <= 10.0; p += 0.1) {
    const double u = agent::demand(p, 10.0, 0.1, 0.01);
    EXPECT_LT(u, prev);
    prev = u;
  }
  EXPECT_THROW(agent::demand(0.0, 10.0, 0.1, 0.01), InputError);
  EXPECT_THROW(agent::demand(1.0, 10.0, -0.1, 0.01), InputError);
}

TEST(Solve, ClosedFormWithoutPosition) {
  const auto pl = agent::solve_lowest_price(0.0, 10.0, 10.0, 0.1, 0.01);
  ASSERT_TRUE(pl);
  EXPECT_NEAR(*pl, 10.0 * std::exp(-0.01), 1e-12);
  const auto tiny_cash = agent::solve_lowest_price(0.0, 1e-12, 10.0, 0.1, 0.01);
  EXPECT_NEAR(*tiny_cash, 10.0, 1e-12);
}

TEST(Solve, ResidualOnRandomInputs) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double S = std::round(300.0 * u(rng));
    const double C = 1e-3 + 3000.0 * u(rng);
    const double ph = 1.0 + 20.0 * u(rng);
    const double alpha = 0.01 + 2.0 * u(rng);
    const double V = 1e-4 + 0.01 * u(rng);
    const auto pl = agent::solve_lowest_price(S, C, ph, alpha, V);
    ASSERT_TRUE(pl);
    ASSERT_GT(*pl, 0.0);
    ASSERT_LE(*pl, ph);
    const double resid = *pl * (agent::demand(*pl, ph, alpha, V) - S) - C;
    ASSERT_LT(std::fabs(resid), 1e-6) << S << " " << C << " " << ph << " " << alpha << " " << V;
  }
}

TEST(Decide, SignAndCapRules) {
  MetaAgentParams g;
  ex::MarketObservation obs{10.0, 10.0, 0.0, 1e-3, 0.0};
  std::mt19937_64 rng(5);
  int buys = 0, sells = 0;
  for (int i = 0; i < 5000; ++i) {
    const auto a = agent::spawn_actor(rng, g);
    const auto d = agent::decide(a, obs, 0.0, rng, g);
    if (!d.order) continue;
    ASSERT_GE(d.p_raw, d.p_low);
    ASSERT_LE(d.p_raw, d.p_hat);
    ASSERT_LE(std::fabs(d.order->price * g.tick - d.p_raw), 0.5 * g.tick + 1e-12);
    if (d.order->side == ex::Side::Buy) {
      ASSERT_GT(d.q_raw, 0.0);
      ++buys;
    } else {
      ASSERT_LT(d.q_raw, 0.0);
      ASSERT_LE(d.order->qty, a.S);
      ++sells;
    }
    ASSERT_GE(d.order->qty, 1);
  }
  EXPECT_GT(buys, 0);
  EXPECT_GT(sells, 0);
}

// Frozen draws: replay the rng by hand and rebuild the order.
TEST(Decide, ScriptedWakeUp) {
  MetaAgentParams g;
  const auto a = agent::make_actor(20, 500, 4.0, 1.0, 0.5, g);
  const ex::MarketObservation obs{10.0, 10.0, 0.001, 0.005, 0.0};
  std::mt19937_64 rng(77), replay(77);
  const auto d = agent::decide(a, obs, 0.004, rng, g);

  const double r_sigma = std::normal_distribution<double>(0.0, 1e-4)(replay);
  const double r_hat = (4.0 * 0.004 + 1.0 * 0.001 + 0.5 * r_sigma) / 5.5;
  const double p_hat = 10.0 * std::exp(r_hat);
  const double alpha = 0.1 * 5.0 / 2.0;
  const double V = 0.005 * 0.005;  // default risk measure is the variance
  // bisection-free check of the root through its defining equation
  const double pl = d.p_low;
  EXPECT_NEAR(pl * (std::log(p_hat / pl) / (alpha * V * pl) - 20.0) - 500.0, 0.0, 1e-6);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(replay);
  const double p = pl + u * (p_hat - pl);
  const double q = std::log(p_hat / p) / (alpha * V * p) - 20.0;
  EXPECT_DOUBLE_EQ(d.r_hat, r_hat);
  EXPECT_DOUBLE_EQ(d.p_hat, p_hat);
  EXPECT_DOUBLE_EQ(d.p_raw, p);
  ASSERT_TRUE(d.order);
  EXPECT_EQ(d.order->price, std::llround(p / 0.01));
  EXPECT_EQ(d.order->side, q > 0 ? ex::Side::Buy : ex::Side::Sell);
  const auto expect_qty = std::llround(std::fabs(q));
  EXPECT_EQ(d.order->qty, q > 0 ? expect_qty : std::min<long long>(expect_qty, 20));
}

TEST(Decide, RiskMeasureModesAndFloor) {
  MetaAgentParams g;
  g.risk = agent::RiskMeasure::Std;
  EXPECT_EQ(agent::risk_volatility(0.002, g), 0.002);
  g.risk = agent::RiskMeasure::Variance;
  EXPECT_EQ(agent::risk_volatility(0.005, g), 0.005 * 0.005);
  EXPECT_EQ(agent::risk_volatility(0.002, g), g.risk_floor);
  EXPECT_THROW(agent::risk_measure_from_string("var"), ConfigError);
  EXPECT_EQ(agent::fundamental_from_string("return"), agent::Fundamental::Return);
}

TEST(Generate, DeterministicAndOrdered) {
  const auto day = flat_day(20, 40.0, 1e-4);
  MetaAgentParams g;
  const auto a = agent::generate_day(day, g, 9);
  const auto b = agent::generate_day(day, g, 9);
  ASSERT_EQ(a.flow.size(), b.flow.size());
  for (std::size_t i = 0; i < a.flow.size(); ++i) {
    EXPECT_EQ(a.flow[i].t, b.flow[i].t);
    EXPECT_EQ(a.flow[i].price, b.flow[i].price);
    EXPECT_EQ(a.flow[i].qty, b.flow[i].qty);
    if (i) EXPECT_LT(a.flow[i - 1].t, a.flow[i].t);
  }
  ASSERT_FALSE(a.flow.empty());
  EXPECT_LT(a.flow.back().t, 20 * 60.0);
  EXPECT_EQ(a.minute_prices.size(), 21u);
  EXPECT_EQ(a.oir.size(), 20u);
  EXPECT_EQ(a.minute_prices, b.minute_prices);
}

TEST(Generate, ZeroRateIsNearlyEmpty) {
  const auto day = flat_day(236, 0.0);
  const auto r = agent::generate_day(day, MetaAgentParams{}, 1);
  EXPECT_LE(r.wakeups, 3u);
}

TEST(Generate, WakeCountTracksRate) {
  const auto day = flat_day(60, 100.0);
  double total = 0;
  for (std::uint64_t s = 0; s < 5; ++s) total += agent::generate_day(day, MetaAgentParams{}, s).wakeups;
  EXPECT_NEAR(total / 5.0, 6000.0, 300.0);
}

TEST(Generate, StrongPositiveStatesRaiseThePrice) {
  const auto day = flat_day(236, 60.0, 1e-3);
  int up = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto r = agent::generate_day(day, MetaAgentParams{}, s);
    up += r.minute_prices.back() > r.minute_prices.front();
  }
  EXPECT_GE(up, 40);
}

TEST(Generate, AnchoredPriceTracksStatePath) {
  // Up for half a day, then down: the generated mid should follow.
  std::vector<double> r(120, 2e-3);
  r.insert(r.end(), 116, -2e-3);
  const ms::MarketStateDay day{r, std::vector<double>(236, 60.0)};
  const auto g = agent::generate_day(day, MetaAgentParams{}, 3);
  EXPECT_GT(g.minute_prices[120], 10.0 * std::exp(0.08));
  EXPECT_LT(g.minute_prices[236], g.minute_prices[120]);
}

TEST(Generate, LiteralModesStayDeterministic) {
  MetaAgentParams g;
  g.fundamental = agent::Fundamental::Return;
  g.risk = agent::RiskMeasure::Std;
  const auto day = flat_day(30, 40.0, 1e-3);
  EXPECT_EQ(agent::generate_day(day, g, 4).minute_prices,
            agent::generate_day(day, g, 4).minute_prices);
}
