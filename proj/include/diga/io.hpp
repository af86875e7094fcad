#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diga/exchange.hpp"
#include "diga/marketstate.hpp"

namespace diga::io {

namespace fs = std::filesystem;

// Shortest text that reads back to the same double.
std::string fmt(double v);

// ---- market-state corpus CSV: day_id,minute,return,arrival_rate ----
void write_corpus_csv(const fs::path& path, std::span<const ms::MarketStateDay> days);
std::vector<ms::MarketStateDay> read_corpus_csv(const fs::path& path);

// ---- tick JSONL ----
// {"t": seconds, "p": price, "q": int, "o": "buy_limit"|"sell_limit"|"cancel"}
// plus optional "day" (string or integer, default "0") and "id" (integer).
// "o" may also be 1 (buy) or 0 (sell), so generated order flow reads back.
struct TickDay {
  std::string day;
  std::vector<ms::TickRecord> records;
  std::optional<std::string> problem;  // first invalid field, with its line number
};

// Groups records by day in order of first appearance. Throws InputError with
// the line number when a line is not a JSON object.
std::vector<TickDay> read_ticks_jsonl(std::istream& in);
std::vector<TickDay> read_ticks_jsonl(const fs::path& path);

// ---- generated artifacts ----
void write_order_flow_jsonl(const fs::path& path, std::span<const ex::Order> flow, double tick);
// minute,price,oir with minute 0 the open (empty oir).
void write_minute_csv(const fs::path& path, std::span<const double> prices,
                      std::span<const double> oir);
struct MinuteSeries {
  std::vector<double> prices;
  std::vector<double> oir;
};
MinuteSeries read_minute_csv(const fs::path& path);
void write_trades_csv(const fs::path& path, std::span<const ex::Trade> trades, double tick);
std::string book_snapshot_json(const ex::Exchange& book, std::size_t depth = 10);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

}  // namespace diga::io
