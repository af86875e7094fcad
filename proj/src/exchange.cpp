#include "diga/exchange.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "diga/error.hpp"

namespace diga::ex {

Exchange::Exchange(ExchangeConfig cfg) : cfg_(cfg) {
  if (!(cfg_.tick > 0.0) || !(cfg_.p0 > 0.0) || !(cfg_.v_min > 0.0))
    throw ConfigError("exchange: tick, p0 and v_min must be positive");
  prices_.push_back(cfg_.p0);
}

std::int64_t Exchange::to_ticks(double price) const {
  if (!std::isfinite(price)) throw InputError("exchange: non-finite price");
  return std::llround(price / cfg_.tick);
}

template <class Book>
void Exchange::match(Order& in, Book& book, std::vector<Trade>& trades) {
  const bool buy = in.side == Side::Buy;
  while (in.qty > 0 && !book.empty()) {
    auto level = book.begin();
    const std::int64_t px = level->first;
    if (buy ? px > in.price : px < in.price) break;
    Queue& q = level->second;
    while (in.qty > 0 && !q.orders.empty()) {
      Order& maker = q.orders.front();
      const std::int64_t fill = std::min(in.qty, maker.qty);
      Trade tr;
      tr.t = in.t;
      tr.price = px;
      tr.qty = fill;
      tr.aggressor = in.side;
      tr.buy_id = buy ? in.id : maker.id;
      tr.sell_id = buy ? maker.id : in.id;
      trades.push_back(tr);
      in.qty -= fill;
      maker.qty -= fill;
      q.volume -= fill;
      resting_volume_ -= fill;
      last_trade_ = to_price(px);
      if (maker.qty == 0) {
        index_.erase(maker.id);
        q.orders.pop_front();
      }
    }
    if (q.orders.empty()) book.erase(level);
  }
}

std::vector<Trade> Exchange::submit(const Order& order) {
  if (order.price <= 0) throw InputError("exchange: non-positive price");
  if (order.qty < 1) throw InputError("exchange: quantity must be >= 1");
  if (!std::isfinite(order.t) || order.t < last_t_)
    throw InputError("exchange: timestamps must be non-decreasing");
  if (index_.count(order.id))
    throw InputError("exchange: duplicate resting order id " + std::to_string(order.id));
  last_t_ = order.t;

  std::vector<Trade> trades;
  Order rest = order;
  if (rest.side == Side::Buy)
    match(rest, asks_, trades);
  else
    match(rest, bids_, trades);
  if (rest.qty > 0) {
    Queue& q = rest.side == Side::Buy ? bids_[rest.price] : asks_[rest.price];
    q.orders.push_back(rest);
    q.volume += rest.qty;
    index_.emplace(rest.id, std::make_pair(rest.side, rest.price));
    resting_volume_ += rest.qty;
  }
  return trades;
}

bool Exchange::cancel(std::int64_t id) {
  auto it = index_.find(id);
  if (it == index_.end()) return false;
  const auto [side, price] = it->second;
  auto drop = [&](auto& book) {
    auto level = book.find(price);
    Queue& q = level->second;
    auto pos = std::find_if(q.orders.begin(), q.orders.end(),
                            [&](const Order& o) { return o.id == id; });
    resting_volume_ -= pos->qty;
    q.volume -= pos->qty;
    q.orders.erase(pos);
    if (q.orders.empty()) book.erase(level);
  };
  if (side == Side::Buy)
    drop(bids_);
  else
    drop(asks_);
  index_.erase(it);
  return true;
}

template <class Book>
std::int64_t Exchange::trim_level(Book& book, std::int64_t price, std::int64_t qty) {
  auto level = book.find(price);
  if (level == book.end()) return 0;
  Queue& q = level->second;
  std::int64_t removed = 0;
  while (qty > 0 && !q.orders.empty()) {
    Order& o = q.orders.back();
    const std::int64_t take = std::min(qty, o.qty);
    o.qty -= take;
    qty -= take;
    removed += take;
    if (o.qty == 0) {
      index_.erase(o.id);
      q.orders.pop_back();
    }
  }
  q.volume -= removed;
  resting_volume_ -= removed;
  if (q.orders.empty()) book.erase(level);
  return removed;
}

std::int64_t Exchange::reduce_level(std::int64_t price, std::int64_t qty) {
  if (qty <= 0) return 0;
  if (bids_.count(price)) return trim_level(bids_, price, qty);
  return trim_level(asks_, price, qty);
}

namespace {

template <class Book>
std::optional<Level> top(const Book& book) {
  if (book.empty()) return std::nullopt;
  const auto& [px, q] = *book.begin();
  return Level{px, q.volume};
}

}  // namespace

std::optional<Level> Exchange::best_bid() const { return top(bids_); }
std::optional<Level> Exchange::best_ask() const { return top(asks_); }

std::optional<double> Exchange::mid() const {
  if (bids_.empty() || asks_.empty()) return std::nullopt;
  return 0.5 * (to_price(bids_.begin()->first) + to_price(asks_.begin()->first));
}

double Exchange::oir() const {
  const auto b = best_bid();
  const auto a = best_ask();
  if (b && a) {
    const double vb = static_cast<double>(b->volume);
    const double va = static_cast<double>(a->volume);
    return (vb - va) / (vb + va);
  }
  if (b) return 1.0;
  if (a) return -1.0;
  return 0.0;
}

void Exchange::minute_close() {
  const auto m = mid();
  prices_.push_back(m ? *m : prices_.back());
}

MarketObservation Exchange::observe(double lookback_minutes) const {
  MarketObservation obs;
  const auto m = mid();
  obs.mid = m ? *m : prices_.back();
  obs.p_t = last_trade_ ? *last_trade_ : (m ? *m : cfg_.p0);
  obs.oir = oir();

  const std::size_t have = prices_.size() - 1;
  const double want = std::max(0.0, std::round(lookback_minutes));
  const std::size_t n = std::min(have, static_cast<std::size_t>(want));
  obs.vol = cfg_.v_min;
  if (n >= 2) {
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = prices_.size() - n + i;
      r[i] = std::log(prices_[k] / prices_[k - 1]);
    }
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    obs.r_bar = mean;
    obs.vol = std::max(cfg_.v_min, std::sqrt(var));
  }
  return obs;
}

std::vector<Level> Exchange::levels(Side side, std::size_t depth) const {
  std::vector<Level> out;
  auto collect = [&](const auto& book) {
    for (const auto& [px, q] : book) {
      if (out.size() == depth) break;
      out.push_back(Level{px, q.volume});
    }
  };
  if (side == Side::Buy)
    collect(bids_);
  else
    collect(asks_);
  return out;
}

std::vector<Order> Exchange::resting(Side side) const {
  std::vector<Order> out;
  auto collect = [&](const auto& book) {
    for (const auto& [px, q] : book) out.insert(out.end(), q.orders.begin(), q.orders.end());
  };
  if (side == Side::Buy)
    collect(bids_);
  else
    collect(asks_);
  return out;
}

}  // namespace diga::ex
