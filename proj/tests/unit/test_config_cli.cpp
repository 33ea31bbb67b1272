#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "swnet/cli.hpp"
#include "swnet/config.hpp"

using namespace swnet;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("swnet_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// Settings small enough for a unit test.
const std::vector<std::string> kSmall{"--set", "scene.grid=4", "train.epochs=1",
                                      "train.iters_per_epoch=3", "train.eval_scenes=2"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const auto merged = merge_config(json::object());
  EXPECT_EQ(merged, default_config_json());
  const auto cfg = parse_config(merged);
  EXPECT_EQ(cfg.train.strategy, Strategy::swn);
  EXPECT_EQ(cfg.train.reg.lambda1, 0.5);
  EXPECT_EQ(cfg.train.swn.clip_bound, 2.0);
  EXPECT_EQ(config_hash(merged).size(), 16u);
  EXPECT_EQ(config_hash(merged), config_hash(merge_config(json::object())));
}

TEST(Config, UnknownKeyNamesTheKey) {
  try {
    merge_config(json{{"train", {{"epoch", 3}}}});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train.epoch"), std::string::npos);
  }
}

TEST(Config, TypeMismatchAndBadValues) {
  EXPECT_THROW(merge_config(json{{"train", {{"epochs", "many"}}}}), ConfigError);
  auto m = merge_config(json::object());
  apply_override(m, "train.strategy=bogus");
  EXPECT_THROW(parse_config(m), std::exception);
  EXPECT_THROW(apply_override(m, "novalue"), ConfigError);
  EXPECT_THROW(apply_override(m, "train.nope=1"), ConfigError);
}

TEST(Config, OverridesParseJsonValues) {
  auto m = merge_config(json::object());
  apply_override(m, "train.epochs=3");
  apply_override(m, "train.strategy=focal");
  apply_override(m, "swn.hidden=[8,8]");
  const auto cfg = parse_config(m);
  EXPECT_EQ(cfg.train.epochs, 3);
  EXPECT_EQ(cfg.train.strategy, Strategy::focal);
  EXPECT_EQ(cfg.train.swn.hidden, (std::vector<std::size_t>{8, 8}));
  EXPECT_NE(config_hash(m), config_hash(merge_config(json::object())));
}

TEST(Config, MissingFileThrows) {
  EXPECT_THROW(load_config_file("/nonexistent/config.json"), ConfigError);
}

TEST(Cli, UnknownConfigKeyExitsOne) {
  const auto dir = scratch("unknown");
  const auto r = run_cli({"--out", dir.string(), "--set", "train.bogus=1", "train"});
  EXPECT_EQ(r.code, cli::kExitConfig);
  EXPECT_NE(r.err.find("train.bogus"), std::string::npos);
}

TEST(Cli, MissingConfigFileExitsOne) {
  const auto r = run_cli({"--config", "/nonexistent/cfg.json", "train"});
  EXPECT_EQ(r.code, cli::kExitConfig);
  EXPECT_NE(r.err.find("/nonexistent/cfg.json"), std::string::npos);
}

TEST(Cli, NoSubcommandExitsOne) {
  EXPECT_EQ(run_cli({}).code, cli::kExitConfig);
  EXPECT_EQ(run_cli({"fly"}).code, cli::kExitConfig);
}

TEST(Cli, ZeroEpochsWritesHeaderOnlyHistory) {
  const auto dir = scratch("zero");
  const auto r = run_cli(with({"--out", dir.string(), "train"}, {"--set", "train.epochs=0"}));
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const json manifest = json::parse(slurp(dir / "run.json"));
  std::string history;
  for (const auto& o : manifest["outputs"]) {
    if (o.get<std::string>().rfind("history-", 0) == 0) history = o;
  }
  ASSERT_FALSE(history.empty());
  EXPECT_EQ(slurp(dir / history), "iter,mean_lcls,mean_lreg,w_cls_pos,w_cls_neg,w_reg_pos,map\n");
}

TEST(Cli, GradcheckPasses) {
  const auto dir = scratch("grad");
  const auto r = run_cli({"--out", dir.string(), "--set", "gradcheck.probes=5", "gradcheck"});
  EXPECT_EQ(r.code, cli::kExitOk) << r.out << r.err;
}

TEST(Cli, ManifestRerunIsBitForBit) {
  const auto a = scratch("rerun_a");
  const auto b = scratch("rerun_b");
  const auto first = run_cli(with({"--out", a.string(), "train"}, kSmall));
  ASSERT_EQ(first.code, cli::kExitOk) << first.err;
  const auto second = run_cli({"--config", (a / "run.json").string(), "--out", b.string(), "train"});
  ASSERT_EQ(second.code, cli::kExitOk) << second.err;
  const json ma = json::parse(slurp(a / "run.json"));
  const json mb = json::parse(slurp(b / "run.json"));
  EXPECT_EQ(ma["config_hash"], mb["config_hash"]);
  ASSERT_EQ(ma["outputs"], mb["outputs"]);
  int csvs = 0;
  for (const auto& o : ma["outputs"]) {
    const std::string f = o;
    if (f.size() < 4 || f.substr(f.size() - 4) != ".csv") continue;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    ++csvs;
  }
  EXPECT_GE(csvs, 2);
}
