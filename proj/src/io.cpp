#include "diga/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "diga/error.hpp"

namespace diga::io {

using nlohmann::json;

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  return in;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw InputError(where + ": bad number '" + s + "'");
  return v;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

void write_corpus_csv(const fs::path& path, std::span<const ms::MarketStateDay> days) {
  auto out = open_out(path);
  out << "day_id,minute,return,arrival_rate\n";
  for (std::size_t d = 0; d < days.size(); ++d)
    for (std::size_t t = 0; t < days[d].minutes(); ++t)
      out << d << ',' << t << ',' << fmt(days[d].returns[t]) << ','
          << fmt(days[d].arrival_rates[t]) << '\n';
}

std::vector<ms::MarketStateDay> read_corpus_csv(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "day_id,minute,return,arrival_rate")
    throw InputError(path.string() + ": expected header day_id,minute,return,arrival_rate");
  std::vector<ms::MarketStateDay> days;
  std::vector<std::string> ids;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto cells = split(line);
    if (cells.size() != 4) throw InputError(where + ": expected 4 columns");
    if (ids.empty() || ids.back() != cells[0]) {
      ids.push_back(cells[0]);
      days.emplace_back();
    }
    auto& day = days.back();
    const double minute = parse_double(cells[1], where);
    if (minute != static_cast<double>(day.minutes()))
      throw InputError(where + ": minutes must run 0..T-1 within a day");
    day.returns.push_back(parse_double(cells[2], where));
    day.arrival_rates.push_back(parse_double(cells[3], where));
  }
  if (days.empty()) throw InputError(path.string() + ": no rows");
  for (const auto& d : days) {
    d.validate(true);
    if (d.minutes() != days.front().minutes())
      throw InputError(path.string() + ": days differ in length");
  }
  return days;
}

std::vector<TickDay> read_ticks_jsonl(std::istream& in) {
  std::vector<TickDay> days;
  std::map<std::string, std::size_t> slot;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw InputError(where + ": malformed JSON");
    }
    if (!j.is_object()) throw InputError(where + ": expected a JSON object");

    std::string day = "0";
    if (j.contains("day")) {
      const auto& d = j["day"];
      if (d.is_string())
        day = d.get<std::string>();
      else if (d.is_number_integer())
        day = std::to_string(d.get<long long>());
      else
        throw InputError(where + ": \"day\" must be a string or integer");
    }
    auto [it, fresh] = slot.emplace(day, days.size());
    if (fresh) days.push_back(TickDay{day, {}, std::nullopt});
    TickDay& td = days[it->second];
    if (td.problem) continue;

    auto bad = [&](const std::string& why) { td.problem = where + ": " + why; };
    ms::TickRecord r;
    if (!j.contains("t") || !j["t"].is_number()) { bad("missing numeric \"t\""); continue; }
    if (!j.contains("p") || !j["p"].is_number()) { bad("missing numeric \"p\""); continue; }
    if (!j.contains("q") || !j["q"].is_number_integer()) { bad("missing integer \"q\""); continue; }
    if (!j.contains("o")) { bad("missing \"o\""); continue; }
    r.t = j["t"].get<double>();
    r.p = j["p"].get<double>();
    r.q = j["q"].get<std::int64_t>();
    const auto& o = j["o"];
    if (o.is_string() && o == "buy_limit") r.kind = ms::TickKind::BuyLimit;
    else if (o.is_string() && o == "sell_limit") r.kind = ms::TickKind::SellLimit;
    else if (o.is_string() && o == "cancel") r.kind = ms::TickKind::Cancel;
    else if (o.is_number_integer() && o == 1) r.kind = ms::TickKind::BuyLimit;
    else if (o.is_number_integer() && o == 0) r.kind = ms::TickKind::SellLimit;
    else { bad("unknown order type"); continue; }
    if (j.contains("id")) {
      if (!j["id"].is_number_integer()) { bad("\"id\" must be an integer"); continue; }
      r.id = j["id"].get<std::int64_t>();
    }
    td.records.push_back(r);
  }
  return days;
}

std::vector<TickDay> read_ticks_jsonl(const fs::path& path) {
  auto in = open_in(path);
  return read_ticks_jsonl(in);
}

void write_order_flow_jsonl(const fs::path& path, std::span<const ex::Order> flow, double tick) {
  auto out = open_out(path);
  for (const auto& o : flow) {
    json j;
    j["t"] = o.t;
    j["p"] = static_cast<double>(o.price) * tick;
    j["q"] = o.qty;
    j["o"] = o.side == ex::Side::Buy ? 1 : 0;
    out << j.dump() << '\n';
  }
}

void write_minute_csv(const fs::path& path, std::span<const double> prices,
                      std::span<const double> oir) {
  if (prices.size() != oir.size() + 1)
    throw InputError("minute csv: expected one more price than OIR values");
  auto out = open_out(path);
  out << "minute,price,oir\n";
  out << "0," << fmt(prices[0]) << ",\n";
  for (std::size_t m = 0; m < oir.size(); ++m)
    out << m + 1 << ',' << fmt(prices[m + 1]) << ',' << fmt(oir[m]) << '\n';
}

MinuteSeries read_minute_csv(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "minute,price,oir")
    throw InputError(path.string() + ": expected header minute,price,oir");
  MinuteSeries s;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto cells = split(line);
    if (cells.size() != 3) throw InputError(where + ": expected 3 columns");
    s.prices.push_back(parse_double(cells[1], where));
    if (s.prices.size() > 1) s.oir.push_back(parse_double(cells[2], where));
  }
  if (s.prices.size() < 2) throw InputError(path.string() + ": need at least two rows");
  return s;
}

void write_trades_csv(const fs::path& path, std::span<const ex::Trade> trades, double tick) {
  auto out = open_out(path);
  out << "t,price,qty,aggressor_side\n";
  for (const auto& tr : trades)
    out << fmt(tr.t) << ',' << fmt(static_cast<double>(tr.price) * tick) << ',' << tr.qty << ','
        << (tr.aggressor == ex::Side::Buy ? "buy" : "sell") << '\n';
}

std::string book_snapshot_json(const ex::Exchange& book, std::size_t depth) {
  auto side = [&](ex::Side s) {
    json arr = json::array();
    for (const auto& lv : book.levels(s, depth))
      arr.push_back({{"price", book.to_price(lv.price)}, {"volume", lv.volume}});
    return arr;
  };
  json j;
  j["bids"] = side(ex::Side::Buy);
  j["asks"] = side(ex::Side::Sell);
  return j.dump(2);
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

std::string read_text(const fs::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace diga::io
