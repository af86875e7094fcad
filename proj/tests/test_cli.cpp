#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "diga/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(DIGA_TEST_SCRATCH) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Exit status of `diga <args>`; stderr goes to <dir>/stderr.txt.
int run_cli(const std::string& args, const fs::path& dir) {
  const std::string cmd = std::string("\"") + DIGA_CLI_PATH + "\" " + args + " 2>\"" +
                          (dir / "stderr.txt").string() + "\" >/dev/null";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) { return diga::io::read_text(p); }

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// Two quotes per minute around 10.00 for `minutes` minutes.
std::string tick_day(const std::string& day, int minutes, double bad_price = 0.0) {
  std::ostringstream s;
  for (int m = 0; m < minutes; ++m) {
    const double t = 60.0 * m + 1.0;
    s << R"({"day":")" << day << R"(","t":)" << t << R"(,"p":9.99,"q":5,"o":"buy_limit"})" << "\n";
    s << R"({"day":")" << day << R"(","t":)" << t + 1 << R"(,"p":10.01,"q":5,"o":"sell_limit"})" << "\n";
  }
  if (bad_price != 0.0)
    s << R"({"day":")" << day << R"(","t":)" << 60.0 * minutes - 1 << R"(,"p":)" << bad_price
      << R"(,"q":1,"o":"buy_limit"})" << "\n";
  return s.str();
}

std::size_t csv_rows(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line;
  std::size_t n = 0;
  std::getline(in, line);  // header
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

// Small model so the CLI tests stay quick.
const char* kTinyConfig = R"({
  "target": "return",
  "model": {"base_width": 8, "multipliers": [1, 2], "res_blocks": 1, "kernel": 5,
            "embed_dim": 16, "cond_hidden": 8, "attention": false, "encoder": "%ENC%"},
  "schedule": {"steps": 20, "beta_start": 0.001, "beta_end": 0.2},
  "train": {"epochs": 1, "batch_size": 16, "lr": 0.001},
  "sampler": {"ddim_steps": 5},
  "synth": {"days": 40, "minutes": %T%},
  "evaluate": {"scales": [2], "samples_per_bin": 2, "reference_days": 3, "lags": [1, 2]}
})";

fs::path tiny_config(const fs::path& dir, const std::string& enc, int minutes) {
  std::string s = kTinyConfig;
  s.replace(s.find("%ENC%"), 5, enc);
  s.replace(s.find("%T%"), 3, std::to_string(minutes));
  const auto p = dir / ("config_" + enc + ".json");
  write(p, s);
  return p;
}

}  // namespace

TEST(CliPreprocess, TwoDayFixture) {
  const auto dir = scratch("pre_two");
  write(dir / "ticks.jsonl", tick_day("d1", 6) + tick_day("d2", 6));
  ASSERT_EQ(run_cli("preprocess --input " + (dir / "ticks.jsonl").string() + " --minutes 6 --out " +
                     (dir / "out").string(),
                 dir),
            0);
  EXPECT_EQ(csv_rows(dir / "out" / "corpus.csv"), 2u * 6u);
  EXPECT_TRUE(fs::exists(dir / "out" / "stats.json"));
}

TEST(CliPreprocess, NegativePriceDropsTheDay) {
  const auto dir = scratch("pre_neg");
  write(dir / "ticks.jsonl", tick_day("d1", 6) + tick_day("d2", 6, -3.0) + tick_day("d3", 6));
  ASSERT_EQ(run_cli("preprocess --input " + (dir / "ticks.jsonl").string() + " --minutes 6 --out " +
                     (dir / "out").string(),
                 dir),
            0);
  EXPECT_EQ(csv_rows(dir / "out" / "corpus.csv"), 2u * 6u);
  EXPECT_NE(slurp(dir / "stderr.txt").find("d2"), std::string::npos);
}

TEST(CliPreprocess, EmptyInputIsAnInputError) {
  const auto dir = scratch("pre_empty");
  write(dir / "ticks.jsonl", "");
  EXPECT_EQ(run_cli("preprocess --input " + (dir / "ticks.jsonl").string() + " --out " +
                     (dir / "out").string(),
                 dir),
            2);
  EXPECT_FALSE(fs::exists(dir / "out" / "corpus.csv"));
}

TEST(CliPreprocess, MissingFileAndBadFlags) {
  const auto dir = scratch("pre_missing");
  EXPECT_EQ(run_cli("preprocess --input " + (dir / "none.jsonl").string() + " --out " + dir.string(), dir), 2);
  EXPECT_EQ(run_cli("preprocess --bogus", dir), 2);
  EXPECT_EQ(run_cli("--help", dir), 0);
}

TEST(CliTrain, OneEpochTwiceIsByteIdentical) {
  const auto dir = scratch("train_twice");
  const auto cfg = tiny_config(dir, "continuous", 32);
  const std::string c = " --config " + cfg.string();
  ASSERT_EQ(run_cli("synth" + c + " --seed 7 --out " + (dir / "corpus").string(), dir), 0);
  for (const char* out : {"a", "b"})
    ASSERT_EQ(run_cli("train" + c + " --corpus " + (dir / "corpus" / "corpus.csv").string() +
                       " --epochs 1 --seed 7 --out " + (dir / out).string(),
                   dir),
              0);
  EXPECT_EQ(slurp(dir / "a" / "model.ckpt"), slurp(dir / "b" / "model.ckpt"));
  EXPECT_EQ(slurp(dir / "a" / "model.ckpt.json"), slurp(dir / "b" / "model.ckpt.json"));
  EXPECT_EQ(slurp(dir / "a" / "losses.csv"), slurp(dir / "b" / "losses.csv"));
}

TEST(CliSample, DiscreteClassGivesStateFilesOfFullLength) {
  const auto dir = scratch("sample_class");
  const auto cfg = tiny_config(dir, "discrete", 236);
  const std::string c = " --config " + cfg.string();
  ASSERT_EQ(run_cli("synth" + c + " --seed 1 --out " + (dir / "corpus").string(), dir), 0);
  ASSERT_EQ(run_cli("train" + c + " --corpus " + (dir / "corpus" / "corpus.csv").string() +
                     " --max-steps 2 --seed 2 --out " + (dir / "model").string(),
                 dir),
            0);
  const auto model = (dir / "model" / "model.ckpt").string();
  ASSERT_EQ(run_cli("sample" + c + " --model " + model +
                     " --target return --class 4 --scale 2 --seeds 8 --seed 3 --out " +
                     (dir / "states").string(),
                 dir),
            0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir / "states")) {
    ++files;
    const auto j = json::parse(slurp(e.path()));
    EXPECT_EQ(j["shape"], json::array({2, 236}));
    EXPECT_EQ(j["class"], 4);
    EXPECT_EQ(j["returns"].size(), 236u);
  }
  EXPECT_EQ(files, 8u);
  // wrong target and continuous-only requests are config mismatches
  EXPECT_EQ(run_cli("sample --model " + model + " --target volatility --class 1 --out " +
                     (dir / "x").string(),
                 dir),
            3);
  EXPECT_EQ(run_cli("sample --model " + model + " --value 0.01 --out " + (dir / "x").string(), dir), 3);
}

TEST(CliSample, ClassOnContinuousCheckpointExitsThree) {
  const auto dir = scratch("sample_mismatch");
  const auto cfg = tiny_config(dir, "continuous", 32);
  const std::string c = " --config " + cfg.string();
  ASSERT_EQ(run_cli("synth" + c + " --seed 1 --out " + (dir / "corpus").string(), dir), 0);
  ASSERT_EQ(run_cli("train" + c + " --corpus " + (dir / "corpus" / "corpus.csv").string() +
                     " --max-steps 1 --seed 2 --out " + (dir / "model").string(),
                 dir),
            0);
  EXPECT_EQ(run_cli("sample --model " + (dir / "model" / "model.ckpt").string() +
                     " --class 4 --out " + (dir / "states").string(),
                 dir),
            3);
  EXPECT_NE(slurp(dir / "stderr.txt").find("discrete"), std::string::npos);
}

TEST(CliPipeline, ToyRunReportsFactsAndControl) {
  const auto dir = scratch("pipeline");
  const auto cfg = tiny_config(dir, "continuous", 32);
  ASSERT_EQ(run_cli("pipeline --config " + cfg.string() + " --seed 5 --out " + (dir / "run").string(), dir), 0)
      << slurp(dir / "stderr.txt");
  const auto report = json::parse(slurp(dir / "run" / "report" / "report.json"));
  for (const char* k : {"minr", "retac", "volc", "oir"}) {
    ASSERT_TRUE(report["kl_divergence"].contains(k)) << k;
    EXPECT_TRUE(report["kl_divergence"][k].is_number());
  }
  EXPECT_EQ(report["controllability"].size(), 5u);
  for (const auto& e : report["controllability"]) EXPECT_TRUE(e.contains("mse"));
  bool has_svg = false;
  for (const auto& e : fs::directory_iterator(dir / "run" / "report"))
    has_svg = has_svg || e.path().extension() == ".svg";
  EXPECT_TRUE(has_svg);
}
