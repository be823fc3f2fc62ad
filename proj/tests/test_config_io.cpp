#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stockdp/config.hpp"
#include "stockdp/io.hpp"

using namespace stockdp;
namespace fs = std::filesystem;

namespace {

const char* kConfig = R"({
  "model": {
    "K": 5,
    "c_bar": 1,
    "alpha": 0.9,
    "holding": {"kind": "piecewise_linear", "pieces": [[-4, 0], [1, 0]]},
    "demand": [[0, 0.2], [1, 0.3], [2, 0.3], [3, 0.2]],
    "regime": "BOS",
    "a_bar": 6,
    "x_bar": 30,
    "shortfall": "backorders"
  },
  "grid": {"x_min": -30, "x_max": 30, "step": 1},
  "solver": {"tol": 1e-7, "v_max": null, "horizon": "inf"},
  "sim": {"seed": 18446744073709551615, "n_paths": 500, "start_states": [0, 5]},
  "output": {"dir": "out", "format": "jsonl"}
})";

std::string temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("stockdp_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto at = text.find(from);
  EXPECT_NE(at, std::string::npos) << from;
  return text.replace(at, from.size(), to);
}

ConfigError parse_error(const std::string& text) {
  try {
    parse_config(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e;
  }
  ADD_FAILURE() << "expected ConfigError";
  return ConfigError("none");
}

}  // namespace

TEST(Config, ParsesAllSections) {
  const RunConfig c = parse_config(kConfig);
  EXPECT_EQ(c.model.K, 5.0);
  EXPECT_EQ(c.model.regime.kind, ConstraintRegime::Kind::BOS);
  EXPECT_EQ(c.model.regime.a_bar, 6.0);
  EXPECT_EQ(c.model.demand.atoms().size(), 4u);
  EXPECT_EQ(c.grid.x_min, -30.0);
  EXPECT_EQ(c.solver.tol, 1e-7);
  EXPECT_FALSE(c.solver.v_max);
  EXPECT_FALSE(c.solver.horizon);
  EXPECT_EQ(c.sim.seed, 18446744073709551615ULL);
  EXPECT_EQ(c.sim.start_states, (std::vector<double>{0.0, 5.0}));
  EXPECT_EQ(c.output.format, "jsonl");
}

TEST(Config, RoundTripIsLossless) {
  RunConfig c = parse_config(kConfig);
  c.model.alpha = 0.1 + 0.2;  // not a short decimal
  c.model.K = 1.0 / 3.0;
  c.solver.horizon = 7;
  c.solver.v_max = 1e9;
  const std::string text = dump_config(c);
  const RunConfig back = parse_config(text);
  EXPECT_EQ(back, c);
  EXPECT_EQ(dump_config(back), text);
  EXPECT_EQ(config_hash(back), config_hash(c));
}

TEST(Config, RoundTripTabulatedWithInfinity) {
  RunConfig c = parse_config(kConfig);
  c.model.regime = ConstraintRegime::bounded_orders(2.0);
  c.model.h = HoldingCost::tabulated({{-3.0, kInf}, {-2.0, 16.0}, {0.0, 0.0}, {2.0, 16.0}, {3.0, kInf}});
  const std::string text = dump_config(c);
  EXPECT_NE(text.find("\"inf\""), std::string::npos);
  EXPECT_EQ(parse_config(text), c);
}

TEST(Config, SaveAndLoad) {
  const std::string dir = temp_dir("config");
  const RunConfig c = parse_config(kConfig);
  save_config(c, dir + "/c.json");
  EXPECT_EQ(load_config(dir + "/c.json"), c);
  EXPECT_THROW(load_config(dir + "/missing.json"), ConfigError);
}

TEST(Config, MalformedJsonIsLineAnchored) {
  const auto e = parse_error(replace(kConfig, "\"c_bar\": 1,", "\"c_bar\": 1,,"));
  EXPECT_EQ(e.line(), 4);
  EXPECT_NE(std::string(e.what()).find("cfg.json:4:"), std::string::npos);
}

TEST(Config, SchemaErrorsPointAtTheKey) {
  const auto alpha = parse_error(replace(kConfig, "\"alpha\": 0.9", "\"alpha\": 1.5"));
  EXPECT_EQ(alpha.line(), 5);
  EXPECT_NE(std::string(alpha.what()).find("alpha must lie in [0, 1)"), std::string::npos);

  const auto k = parse_error(replace(kConfig, "\"K\": 5", "\"K\": 0"));
  EXPECT_EQ(k.line(), 3);

  const auto typo = parse_error(replace(kConfig, "\"n_paths\"", "\"npaths\""));
  EXPECT_EQ(typo.line(), 15);
  EXPECT_NE(std::string(typo.what()).find("unknown key"), std::string::npos);

  const auto regime = parse_error(replace(kConfig, "\"BOS\"", "\"XYZ\""));
  EXPECT_EQ(regime.line(), 8);

  const auto demand = parse_error(replace(kConfig, "[3, 0.2]", "[3, 0.3]"));
  EXPECT_EQ(demand.line(), 7);

  const auto grid = parse_error(replace(kConfig, "\"x_max\": 30", "\"x_max\": 29"));
  EXPECT_NE(std::string(grid.what()).find("x_bar"), std::string::npos);

  const auto ls = parse_error(replace(kConfig, "\"shortfall\": \"backorders\"", "\"shortfall\": \"lost_sales\""));
  EXPECT_NE(std::string(ls.what()).find("x_min"), std::string::npos);

  const auto start = parse_error(replace(kConfig, "[0, 5]", "[0, 5.5]"));
  EXPECT_EQ(start.line(), 15);

  const auto missing = parse_error(replace(kConfig, "\"K\": 5,", ""));
  EXPECT_NE(std::string(missing.what()).find("missing key \"K\""), std::string::npos);
}

TEST(Config, HashFormat) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0x0000000000000abc");
  RunConfig c = parse_config(kConfig);
  const auto h = config_hash(c);
  c.sim.seed = 3;
  EXPECT_NE(config_hash(c), h);
}

TEST(Io, DoubleFormatting) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345678.9, 0.0}) EXPECT_EQ(parse_double(format_double(v)), v);
  EXPECT_EQ(format_double(kInf), "inf");
  EXPECT_EQ(parse_double("-inf"), -kInf);
  EXPECT_THROW(parse_double("1.5x"), std::invalid_argument);
}

TEST(Io, CsvRoundTripAndChecksum) {
  const std::string dir = temp_dir("csv");
  Table t{{"x", "value", "label"}, {}};
  t.add({1.0, std::int64_t{3}, std::string("a,b")});
  t.add({-0.1, std::int64_t{-4}, std::string("R_inf")});
  const std::string path = write_table(dir, "t", t, 0x1234, Format::Csv);
  EXPECT_EQ(fs::path(path).extension(), ".csv");
  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  EXPECT_EQ(first.rfind("# config_hash=0x0000000000001234; checksum=0x", 0), 0u);

  const LoadedTable back = read_table(path);
  EXPECT_EQ(back.config_hash, 0x1234u);
  EXPECT_EQ(back.columns, t.columns);
  ASSERT_EQ(back.rows.size(), 2u);
  EXPECT_EQ(back.rows[0][2], "a,b");
  EXPECT_EQ(parse_double(back.rows[1][0]), -0.1);

  // Flip one byte in the body.
  std::string text;
  {
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    text = ss.str();
  }
  text[text.size() - 3] = text[text.size() - 3] == '1' ? '2' : '1';
  std::ofstream(path) << text;
  EXPECT_THROW(read_table(path), ArtifactError);
  EXPECT_THROW(read_table(dir + "/nope.csv"), ArtifactError);
}

TEST(Io, JsonlRoundTrip) {
  const std::string dir = temp_dir("jsonl");
  Table t{{"x", "order"}, {}};
  t.add({2.0, 0.5});
  t.add({3.0, kInf});
  const std::string path = write_table(dir, "p", t, 7, Format::Jsonl);
  const LoadedTable back = read_table(path);
  EXPECT_EQ(back.columns, t.columns);
  EXPECT_EQ(back.rows[1][1], "inf");
  EXPECT_EQ(parse_double(back.rows[0][1]), 0.5);
}

TEST(Io, PolicyTableArtifact) {
  const std::string dir = temp_dir("policy");
  const Grid grid(-2.0, 2.0, 1.0);
  Table t{{"x", "order"}, {}};
  for (int i = 0; i < 5; ++i) t.add({grid[i], i < 2 ? 3.0 - i : 0.0});
  const PolicyTable p = read_policy_table(write_table(dir, "policy", t, 1, Format::Csv), grid);
  EXPECT_EQ(p.order_steps(), (std::vector<std::int64_t>{3, 2, 0, 0, 0}));
  EXPECT_THROW(read_policy_table(dir + "/policy.csv", Grid(-3.0, 2.0, 1.0)), ArtifactError);
}

TEST(Io, AtomicWriteLeavesNoTemporary) {
  const std::string dir = temp_dir("atomic");
  write_file_atomic(dir + "/sub/a.txt", "hello");
  EXPECT_TRUE(fs::exists(dir + "/sub/a.txt"));
  EXPECT_FALSE(fs::exists(dir + "/sub/a.txt.tmp"));
}
