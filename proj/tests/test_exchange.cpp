#include <gtest/gtest.h>

#include <random>

#include "diga/error.hpp"
#include "diga/exchange.hpp"
#include "support/reference_matcher.hpp"

using namespace diga;
using ex::Side;

namespace {

ex::Order order(std::int64_t id, double price, std::int64_t qty, Side side, double t = 0.0) {
  return ex::Order{id, t, std::llround(price * 100.0), qty, side};
}

}  // namespace

TEST(Exchange, BuyCrossesPartiallyThenRests) {
  ex::Exchange x;
  EXPECT_TRUE(x.submit(order(1, 10.0, 3, Side::Sell)).empty());
  const auto trades = x.submit(order(2, 10.1, 5, Side::Buy));
  ASSERT_EQ(trades.size(), 1u);
  EXPECT_EQ(trades[0].qty, 3);
  EXPECT_EQ(trades[0].price, 1000);
  EXPECT_EQ(trades[0].aggressor, Side::Buy);
  const auto bid = x.best_bid();
  ASSERT_TRUE(bid);
  EXPECT_EQ(bid->price, 1010);
  EXPECT_EQ(bid->volume, 2);
  EXPECT_FALSE(x.best_ask());
  EXPECT_DOUBLE_EQ(*x.last_trade_price(), 10.0);
}

TEST(Exchange, SellWalksTwoLevels) {
  ex::Exchange x;
  x.submit(order(1, 10.0, 4, Side::Buy));
  x.submit(order(2, 9.9, 2, Side::Buy));
  const auto trades = x.submit(order(3, 9.9, 10, Side::Sell));
  ASSERT_EQ(trades.size(), 2u);
  EXPECT_EQ(trades[0].price, 1000);
  EXPECT_EQ(trades[0].qty, 4);
  EXPECT_EQ(trades[1].price, 990);
  EXPECT_EQ(trades[1].qty, 2);
  const auto ask = x.best_ask();
  ASSERT_TRUE(ask);
  EXPECT_EQ(ask->price, 990);
  EXPECT_EQ(ask->volume, 4);
  EXPECT_FALSE(x.best_bid());
}

TEST(Exchange, FifoWithinLevel) {
  ex::Exchange x;
  x.submit(order(1, 10.0, 2, Side::Sell));
  x.submit(order(2, 10.0, 2, Side::Sell));
  const auto trades = x.submit(order(3, 10.0, 3, Side::Buy));
  ASSERT_EQ(trades.size(), 2u);
  EXPECT_EQ(trades[0].sell_id, 1);
  EXPECT_EQ(trades[1].sell_id, 2);
  EXPECT_EQ(trades[1].qty, 1);
}

TEST(Exchange, InvalidOrdersLeaveBookUntouched) {
  ex::Exchange x;
  x.submit(order(1, 10.0, 2, Side::Sell, 5.0));
  EXPECT_THROW(x.submit(order(2, 0.0, 1, Side::Buy, 6.0)), InputError);
  EXPECT_THROW(x.submit(order(3, 10.0, 0, Side::Buy, 6.0)), InputError);
  EXPECT_THROW(x.submit(order(4, 10.0, 1, Side::Buy, 4.0)), InputError);
  EXPECT_THROW(x.submit(order(1, 10.5, 1, Side::Sell, 6.0)), InputError);
  EXPECT_EQ(x.resting_volume(), 2);
  EXPECT_EQ(x.resting_orders(), 1u);
}

TEST(Exchange, CancelAndReduce) {
  ex::Exchange x;
  x.submit(order(1, 10.0, 2, Side::Sell));
  x.submit(order(2, 10.0, 3, Side::Sell));
  x.submit(order(3, 9.0, 3, Side::Buy));
  EXPECT_TRUE(x.cancel(1));
  EXPECT_FALSE(x.cancel(1));
  EXPECT_EQ(x.best_ask()->volume, 3);
  EXPECT_EQ(x.reduce_level(900, 2), 2);
  EXPECT_EQ(x.best_bid()->volume, 1);
  EXPECT_EQ(x.reduce_level(900, 5), 1);
  EXPECT_FALSE(x.best_bid());
  EXPECT_EQ(x.resting_volume(), 3);
}

TEST(Exchange, ObservationConventions) {
  ex::Exchange x;
  auto obs = x.observe(30);
  EXPECT_EQ(obs.r_bar, 0.0);
  EXPECT_EQ(obs.vol, 1e-4);
  EXPECT_EQ(obs.p_t, 10.0);
  EXPECT_EQ(obs.oir, 0.0);
  x.submit(order(1, 9.9, 60, Side::Buy));
  EXPECT_EQ(x.oir(), 1.0);
  x.submit(order(2, 10.1, 40, Side::Sell));
  EXPECT_DOUBLE_EQ(x.oir(), 0.2);
  EXPECT_DOUBLE_EQ(x.observe(30).p_t, 10.0);
  ex::Exchange y;
  y.submit(order(1, 10.1, 40, Side::Sell));
  EXPECT_EQ(y.oir(), -1.0);
}

TEST(Exchange, MinuteCloseSeries) {
  ex::Exchange x;
  x.minute_close();  // no quotes yet: seed price
  x.submit(order(1, 9.9, 5, Side::Buy));
  x.submit(order(2, 10.3, 5, Side::Sell));
  x.minute_close();
  x.submit(order(3, 10.3, 5, Side::Buy));  // clears the ask
  x.minute_close();                        // one-sided: carry forward
  x.submit(order(4, 10.5, 5, Side::Sell));
  x.minute_close();
  const auto& p = x.minute_prices();
  ASSERT_EQ(p.size(), 5u);
  EXPECT_EQ(p[1], 10.0);
  EXPECT_DOUBLE_EQ(p[2], 10.1);
  EXPECT_DOUBLE_EQ(p[3], 10.1);
  EXPECT_DOUBLE_EQ(p[4], 10.2);

  const auto obs = x.observe(3);
  const double r[] = {std::log(10.1 / 10.0), 0.0, std::log(10.2 / 10.1)};
  const double m = (r[0] + r[1] + r[2]) / 3.0;
  double v = 0;
  for (double e : r) v += (e - m) * (e - m);
  EXPECT_NEAR(obs.r_bar, m, 1e-15);
  EXPECT_NEAR(obs.vol, std::sqrt(v / 3.0), 1e-15);
  EXPECT_DOUBLE_EQ(obs.p_t, 10.3);
  const auto obs1 = x.observe(1.2);
  EXPECT_EQ(obs1.r_bar, 0.0);
  EXPECT_EQ(obs1.vol, 1e-4);
}

TEST(Exchange, MatchesReferenceOnRandomSequences) {
  std::mt19937_64 rng(42);
  for (int seq = 0; seq < 300; ++seq) {
    ex::Exchange x;
    testkit::ReferenceMatcher ref;
    const int n = 1 + static_cast<int>(rng() % 50);
    for (int i = 0; i < n; ++i) {
      if (i > 2 && rng() % 8 == 0) {
        const std::int64_t id = 1 + static_cast<std::int64_t>(rng() % i);
        EXPECT_EQ(x.cancel(id), ref.cancel(id));
        continue;
      }
      ex::Order o{i + 1, static_cast<double>(i), 995 + static_cast<std::int64_t>(rng() % 11),
                  1 + static_cast<std::int64_t>(rng() % 9), rng() % 2 ? Side::Buy : Side::Sell};
      ASSERT_TRUE(testkit::same_trades(x.submit(o), ref.submit(o))) << "sequence " << seq;
    }
    EXPECT_TRUE(testkit::same_orders(x.resting(Side::Buy), ref.book(Side::Buy)));
    EXPECT_TRUE(testkit::same_orders(x.resting(Side::Sell), ref.book(Side::Sell)));
  }
}

TEST(Exchange, DeterministicReplay) {
  auto run = [] {
    std::mt19937_64 rng(7);
    ex::Exchange x;
    std::vector<ex::Trade> all;
    for (int i = 0; i < 2000; ++i) {
      ex::Order o{i + 1, i * 0.1, 950 + static_cast<std::int64_t>(rng() % 101),
                  1 + static_cast<std::int64_t>(rng() % 20), rng() % 2 ? Side::Buy : Side::Sell};
      auto t = x.submit(o);
      all.insert(all.end(), t.begin(), t.end());
    }
    return all;
  };
  EXPECT_TRUE(testkit::same_trades(run(), run()));
}
