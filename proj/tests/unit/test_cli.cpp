#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string out;
};

// Runs the CLI through the shell; stdout is captured, stderr discarded.
CliRun run(const std::string& args) {
  const std::string cmd = std::string("\"") + CTXRR_CLI_PATH + "\" " + args + " 2>/dev/null";
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  while (const std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / "ctxrr_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static constexpr const char* kSmall = "--identities 30 --cameras 3 --scenes-per-camera 10 --max-instances 4";
  fs::path dir_;
};

TEST_F(Cli, HelpListsSubcommands) {
  const CliRun r = run("--help");
  EXPECT_EQ(r.code, 0);
  for (const char* sub : {"gen", "train-attn", "train-gcn", "rerank", "eval", "sweep", "gradcheck", "validate"}) {
    EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
  }
  const CliRun gen = run("gen --help");
  EXPECT_EQ(gen.code, 0);
  EXPECT_NE(gen.out.find("--co-travel"), std::string::npos);
}

TEST_F(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("no-such-command").code, 2);
  EXPECT_EQ(run("gen --identities").code, 2);
  EXPECT_EQ(run("eval --data x --scorer bogus").code, 2);
  EXPECT_EQ(run(std::string("gen --co-travel 2 --out ") + path("bad.jsonl")).code, 2);
}

TEST_F(Cli, DataErrorsExitWithThree) {
  EXPECT_EQ(run("validate --data " + path("missing.jsonl")).code, 3);
  std::ofstream(path("broken.jsonl")) << "{\"type\":\"header\"\n";
  EXPECT_EQ(run("validate --data " + path("broken.jsonl")).code, 3);
}

TEST_F(Cli, NumericFailureExitsWithFour) {
  EXPECT_EQ(run("gradcheck --configs 1 --tolerance 0 --component matmul").code, 4);
}

TEST_F(Cli, GenIsDeterministicAndValidates) {
  ASSERT_EQ(run(std::string("gen ") + kSmall + " --out " + path("a.jsonl")).code, 0);
  ASSERT_EQ(run(std::string("gen ") + kSmall + " --out " + path("b.jsonl")).code, 0);
  EXPECT_EQ(slurp(path("a.jsonl")), slurp(path("b.jsonl")));
  const CliRun v = run("validate --data " + path("a.jsonl"));
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find("scenes,30"), std::string::npos) << v.out;
}

TEST_F(Cli, EvalWritesCsv) {
  ASSERT_EQ(run(std::string("gen ") + kSmall + " --out " + path("d.jsonl")).code, 0);
  const CliRun r = run("eval --data " + path("d.jsonl") + " --scorer oracle --gallery-size 5");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("scorer,gallery_size,map,top1,num_queries,excluded_queries\noracle,5,1", 0), 0u) << r.out;
}

}  // namespace
