#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

namespace diga::ex {

enum class Side : int { Sell = 0, Buy = 1 };

// Prices travel as integer tick counts; double prices only at the edges.
struct Order {
  std::int64_t id = 0;
  double t = 0.0;          // seconds from day open
  std::int64_t price = 0;  // ticks
  std::int64_t qty = 0;
  Side side = Side::Buy;
};

struct Trade {
  double t = 0.0;
  std::int64_t price = 0;  // ticks, always the resting order's price
  std::int64_t qty = 0;
  Side aggressor = Side::Buy;
  std::int64_t buy_id = 0;
  std::int64_t sell_id = 0;
};

struct Level {
  std::int64_t price = 0;
  std::int64_t volume = 0;
};

struct MarketObservation {
  double p_t = 0.0;    // last trade price, else mid, else the seed price
  double mid = 0.0;    // current mid, else the last recorded minute price
  double r_bar = 0.0;  // mean of recent minutely log returns
  double vol = 0.0;    // population std of the same returns, >= v_min
  double oir = 0.0;
};

struct ExchangeConfig {
  double tick = 0.01;
  double p0 = 10.0;
  double v_min = 1e-4;
};

class Exchange {
 public:
  explicit Exchange(ExchangeConfig cfg = {});

  const ExchangeConfig& config() const { return cfg_; }
  std::int64_t to_ticks(double price) const;
  double to_price(std::int64_t ticks) const { return static_cast<double>(ticks) * cfg_.tick; }

  // Matches the marketable part against the opposite side (best price first,
  // FIFO within a level, maker price) and rests the remainder. Throws
  // InputError, leaving the book untouched, for a non-positive price or
  // quantity, a duplicate resting id, or a timestamp earlier than the last one.
  std::vector<Trade> submit(const Order& order);

  // Removes a resting order. Returns false if the id is not resting.
  bool cancel(std::int64_t id);
  // Removes up to qty from the level at `price` (whichever side holds it),
  // newest orders first. Returns the quantity removed.
  std::int64_t reduce_level(std::int64_t price, std::int64_t qty);

  std::optional<Level> best_bid() const;
  std::optional<Level> best_ask() const;
  std::optional<double> mid() const;
  std::optional<double> last_trade_price() const { return last_trade_; }
  // (v_b - v_a) / (v_b + v_a) at the best levels; +1 bids only, -1 asks only,
  // 0 for an empty book.
  double oir() const;

  // Records the minute-end mid (carried forward when one side is empty, the
  // seed price before any quote).
  void minute_close();
  // Seed price followed by one entry per minute_close().
  const std::vector<double>& minute_prices() const { return prices_; }
  MarketObservation observe(double lookback_minutes) const;

  std::vector<Level> levels(Side side, std::size_t depth) const;
  std::int64_t resting_volume() const { return resting_volume_; }
  std::size_t resting_orders() const { return index_.size(); }
  // Resting orders on one side, best level first, FIFO within a level.
  std::vector<Order> resting(Side side) const;

 private:
  struct Queue {
    std::deque<Order> orders;
    std::int64_t volume = 0;
  };
  using BidBook = std::map<std::int64_t, Queue, std::greater<>>;
  using AskBook = std::map<std::int64_t, Queue>;

  template <class Book>
  void match(Order& aggressor, Book& book, std::vector<Trade>& trades);
  template <class Book>
  std::int64_t trim_level(Book& book, std::int64_t price, std::int64_t qty);

  ExchangeConfig cfg_;
  BidBook bids_;
  AskBook asks_;
  std::unordered_map<std::int64_t, std::pair<Side, std::int64_t>> index_;
  std::int64_t resting_volume_ = 0;
  double last_t_ = 0.0;
  std::optional<double> last_trade_;
  std::vector<double> prices_;
};

}  // namespace diga::ex
