#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "omnitrace/omnitrace.hpp"

namespace fs = std::filesystem;
using omnitrace::cli::run;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "omnitrace");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::path(::testing::TempDir()) /
           ("omnitrace_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "spec.toml") << "[synth]\nn_sources = 4\nchunks = 2\nmodalities = [\"text\", \"audio\"]\n";
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string p(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST(Sha256, KnownDigest) {
  EXPECT_EQ(omnitrace::cli::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(invoke({}).code, 1);
  EXPECT_EQ(invoke({"attribute", "--out", p("o")}).code, 1);
  EXPECT_EQ(invoke({"bogus"}).code, 1);
  const auto r = invoke({"synth", "--spec", p("spec.toml"), "--out", p("s")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--seed"), std::string::npos);
}

TEST_F(CliTest, BadInputExitsOne) {
  std::ofstream(p("bad.trace.jsonl")) << "{not json\n";
  const auto r = invoke({"validate", "--trace", p("bad.trace.jsonl")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("line 1"), std::string::npos);
  EXPECT_EQ(invoke({"validate", "--trace", p("missing.trace.jsonl")}).code, 1);
}

TEST_F(CliTest, PipelineIsDeterministic) {
  ASSERT_EQ(invoke({"synth", "--spec", p("spec.toml"), "--out", p("s"), "--seed", "4", "--count", "3"}).code, 0);
  const std::string t4 = p("s/synth-4.trace.jsonl");
  const std::string g4 = p("s/synth-4.gold.json");
  ASSERT_TRUE(fs::exists(t4));
  EXPECT_EQ(invoke({"validate", "--trace", t4, "--gold", g4}).code, 0);

  std::vector<std::string> traces, golds;
  for (int s = 4; s < 7; ++s) {
    traces.push_back(p("s/synth-" + std::to_string(s) + ".trace.jsonl"));
    golds.push_back(p("s/synth-" + std::to_string(s) + ".gold.json"));
  }
  auto attribute = [&](const std::string& out, const std::string& jobs) {
    std::vector<std::string> args = {"attribute", "--out", p(out), "--jobs", jobs, "--multimodal"};
    for (const auto& t : traces) args.insert(args.end(), {"--trace", t});
    return invoke(args);
  };
  ASSERT_EQ(attribute("a1", "1").code, 0);
  ASSERT_EQ(attribute("a2", "3").code, 0);
  for (int s = 4; s < 7; ++s) {
    const std::string name = "synth-" + std::to_string(s) + ".attr.json";
    EXPECT_EQ(slurp(dir_ / "a1" / name), slurp(dir_ / "a2" / name));
  }

  std::vector<std::string> eval = {"evaluate", "--out", p("e")};
  for (int s = 4; s < 7; ++s) {
    eval.insert(eval.end(), {"--pred", p("a1/synth-" + std::to_string(s) + ".attr.json")});
    eval.insert(eval.end(), {"--gold", golds[static_cast<std::size_t>(s - 4)]});
  }
  const auto e = invoke(eval);
  ASSERT_EQ(e.code, 0) << e.err;
  const auto report = nlohmann::json::parse(slurp(dir_ / "e" / "report.json"));
  EXPECT_EQ(report.at("summary").at("micro").at("f1").get<double>(), 1.0);

  auto random = [&](const std::string& out) {
    return invoke({"baseline", "random", "--trace", traces[0], "--seed", "11", "--out", p(out)});
  };
  ASSERT_EQ(random("r1").code, 0);
  ASSERT_EQ(random("r2").code, 0);
  EXPECT_EQ(slurp(dir_ / "r1" / "attr.json"), slurp(dir_ / "r2" / "attr.json"));
  EXPECT_EQ(invoke({"baseline", "random", "--trace", traces[0], "--out", p("r3")}).code, 1);
}

TEST_F(CliTest, ConfigEnvironmentFallback) {
  ASSERT_EQ(invoke({"synth", "--spec", p("spec.toml"), "--out", p("s"), "--seed", "1"}).code, 0);
  std::ofstream(p("bad.toml")) << "[curation]\nalpha = 7\n";
  ::setenv("OMNITRACE_CONFIG", p("bad.toml").c_str(), 1);
  const auto r = invoke({"attribute", "--trace", p("s/synth-1.trace.jsonl"), "--out", p("a")});
  ::unsetenv("OMNITRACE_CONFIG");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(invoke({"attribute", "--trace", p("s/synth-1.trace.jsonl"), "--out", p("a")}).code, 0);
}
