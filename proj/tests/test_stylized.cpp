#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "diga/error.hpp"
#include "diga/stylized.hpp"

using namespace diga;

TEST(Autocorr, Conventions) {
  const std::vector<double> flat(20, 3.0);
  EXPECT_EQ(sf::autocorr(flat, 1), 0.0);
  std::vector<double> alt;
  for (int i = 0; i < 20; ++i) alt.push_back(i % 2 ? -1.0 : 1.0);
  EXPECT_NEAR(sf::autocorr(alt, 1), -1.0, 1e-15);
  EXPECT_NEAR(sf::autocorr(alt, 2), 1.0, 1e-15);
  const std::vector<double> shorty{1.0, 2.0};
  EXPECT_THROW(sf::autocorr(shorty, 1), InputError);
}

TEST(Autocorr, IidNoiseIsUncorrelated) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(10000);
  for (auto& v : x) v = g(rng);
  EXPECT_LT(std::fabs(sf::autocorr(x, 1)), 0.05);
}

TEST(Kl, IdenticalAndNonNegative) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> a(1000), b(1000);
  for (auto& v : a) v = g(rng);
  for (auto& v : b) v = 0.5 + 2.0 * g(rng);
  EXPECT_EQ(sf::kl_divergence(a, a), 0.0);
  EXPECT_GE(sf::kl_divergence(a, b), 0.0);
  EXPECT_GE(sf::kl_divergence(b, a), 0.0);
  const std::vector<double> c(10, 1.0);
  EXPECT_EQ(sf::kl_divergence(c, c), 0.0);
}

TEST(Kl, GaussianShiftMatchesClosedForm) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> p(100000), q(100000);
  for (auto& v : p) v = g(rng);
  for (auto& v : q) v = 1.0 + g(rng);
  EXPECT_NEAR(sf::kl_divergence(p, q, 50, 1e-9), 0.5, 0.05);
}

TEST(Kl, HistogramProbabilities) {
  const std::vector<double> s{0.0, 0.1, 0.9, 1.0};
  const auto h = sf::Histogram::build(s, 0.0, 1.0, 2);
  EXPECT_EQ(h.counts, (std::vector<double>{2, 2}));
  const auto p = h.probabilities(0.1);
  EXPECT_NEAR(p[0] + p[1], 1.0, 1e-15);
  EXPECT_NEAR(p[0], 0.6 / 1.2, 1e-15);
}

TEST(Mse, Examples) {
  const std::vector<double> t{1, 2}, r{2, 2};
  EXPECT_DOUBLE_EQ(sf::controllability_mse(t, r), 0.5);
  EXPECT_DOUBLE_EQ(sf::controllability_mse(t, t), 0.0);
  const std::vector<double> t2{2, 1}, r2{2, 2};
  EXPECT_DOUBLE_EQ(sf::controllability_mse(t2, r2), 0.5);
  const std::vector<double> one{1};
  EXPECT_THROW(sf::controllability_mse(t, one), InputError);
}

TEST(Facts, LayoutAndValues) {
  const std::vector<double> p{10, 10.1, 10.05, 10.2, 10.2, 10.3, 10.1, 10.0, 10.15, 10.2, 10.1,
                              10.05, 10.0};
  const std::vector<double> oir(12, 0.25);
  const std::size_t lags[] = {1, 2};
  const auto f = sf::compute_facts(p, oir, lags);
  ASSERT_EQ(f.minr.size(), 12u);
  EXPECT_NEAR(f.minr[0], std::log(1.01), 1e-15);
  ASSERT_EQ(f.retac.size(), 2u);
  ASSERT_EQ(f.volc.size(), 2u);
  for (double v : f.retac) EXPECT_LE(std::fabs(v), 1.0);
  EXPECT_EQ(f.oir, oir);
}

TEST(Synth, DeterministicAndShaped) {
  sf::SynthConfig cfg;
  cfg.days = 20;
  cfg.minutes = 50;
  const auto a = sf::synth_corpus(5, cfg), b = sf::synth_corpus(5, cfg);
  ASSERT_EQ(a.days.size(), 20u);
  for (std::size_t d = 0; d < 20; ++d) {
    EXPECT_EQ(a.days[d].returns, b.days[d].returns);
    EXPECT_EQ(a.days[d].arrival_rates, b.days[d].arrival_rates);
    EXPECT_NO_THROW(a.days[d].validate(true));
    EXPECT_EQ(a.days[d].minutes(), 50u);
  }
  EXPECT_NE(sf::synth_corpus(6, cfg).days[0].returns, a.days[0].returns);
}

TEST(Synth, VolatilityClustersMoreThanReturns) {
  sf::SynthConfig cfg;
  cfg.days = 500;
  const auto c = sf::synth_corpus(7, cfg);
  double volc = 0, retac = 0;
  std::vector<double> daily;
  for (const auto& d : c.days) {
    std::vector<double> sq;
    for (double r : d.returns) sq.push_back(r * r);
    volc += sf::autocorr(sq, 1);
    retac += sf::autocorr(d.returns, 1);
  }
  for (const auto& s : c.indicators) daily.push_back(s.daily_return);
  EXPECT_GT(volc / 500, retac / 500);
  const auto bins = ms::ConditionBins::make(daily);
  for (std::size_t k = 1; k < 5; ++k) EXPECT_LT(bins.medians[k - 1], bins.medians[k]);
}
