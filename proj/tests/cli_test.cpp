#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include "codesign/io/config.hpp"
#include "codesign/io/report.hpp"
#include "codesign/morphology/mjcf.hpp"

using namespace codesign;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = CODESIGN_SOURCE_DIR;

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "codesign_cli_test.log";
  const std::string cmd = std::string(CODESIGN_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_text_file(log);
  return r;
}

int count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

int count(const std::string& text, const std::string& needle) {
  int n = 0;
  for (size_t pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

/// Writes a small config into `dir` and returns its path.
fs::path tiny_config(const fs::path& dir, int epochs, int generations) {
  fs::create_directories(dir);
  nlohmann::json j = {
      {"agent", (kRoot / "configs/agents/quadruped.json").string()},
      {"constraints", (kRoot / "configs/constraints/quadruped_free.json").string()},
      {"seed", 5},
      {"output", (dir / "out").string()},
      {"network", {{"hidden", {16, 8}}}},
      {"train", {{"env_count", 4}, {"horizon", 8}, {"total_epochs", epochs}}},
      {"evolution", {{"population", 4}, {"generations", generations}, {"epochs_per_generation", 1},
                     {"eval_episodes", 1}, {"selection", 0.5}}},
      {"env", {{"max_episode_steps", 30}}}};
  const fs::path p = dir / "config.json";
  write_text_file(p, j.dump(2));
  return p;
}

fs::path fresh_dir(const char* name) {
  const fs::path d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST(Cli, MissingAgentExitsTwo) {
  const fs::path d = fresh_dir("codesign_cli_missing");
  fs::create_directories(d);
  write_text_file(d / "config.json", R"({"agent": "does_not_exist.json"})");
  const CliRun r = run("train-baseline --quiet --config " + (d / "config.json").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("does_not_exist.json"), std::string::npos) << r.out;
}

TEST(Cli, MissingConfigExitsTwo) {
  EXPECT_EQ(run("evaluate --config /nonexistent/config.json").code, 2);
}

TEST(Cli, ZeroEpochsWritesInitialCheckpoint) {
  const fs::path d = fresh_dir("codesign_cli_zero");
  const CliRun r = run("train-baseline --quiet --config " + tiny_config(d, 0, 0).string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(d / "out/baseline.ckpt"));
  EXPECT_EQ(count_lines(d / "out/baseline_metrics.csv"), 1);
  EXPECT_EQ(load_learner(d / "out/baseline.ckpt").epochs_trained, 0);
  EXPECT_TRUE(fs::exists(d / "out/baseline_reward.svg"));
  EXPECT_TRUE(fs::exists(d / "out/manifest_train-baseline.json"));
}

TEST(Cli, ResumeContinuesFromCheckpointEpoch) {
  const fs::path d = fresh_dir("codesign_cli_resume");
  ASSERT_EQ(run("train-baseline --quiet --config " + tiny_config(d, 3, 0).string()).code, 0);
  const fs::path cfg = tiny_config(d, 5, 0);
  const CliRun r = run("train-baseline --config " + cfg.string() + " --resume");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("resuming from epoch 3"), std::string::npos) << r.out;
  EXPECT_EQ(load_learner(d / "out/baseline.ckpt").epochs_trained, 5);
  EXPECT_EQ(count_lines(d / "out/baseline_metrics.csv"), 6);
}

TEST(Cli, EvolveHistoryAndAblationPlot) {
  const fs::path d = fresh_dir("codesign_cli_evolve");
  const CliRun r = run("evolve --quiet --ablate-mutation --config " + tiny_config(d, 2, 2).string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(count_lines(d / "out/history.csv"), 1 + 3);  // header + baseline + 2 generations
  EXPECT_EQ(count_lines(d / "out/ablation_no_mutation/history.csv"), 1 + 3);
  const std::string svg = read_text_file(d / "out/mutation_ablation.svg");
  EXPECT_EQ(count(svg, "<polyline"), 2);
  EXPECT_NE(svg.find("without mutation"), std::string::npos);
  for (const char* f : {"best/generation_002.json", "best/generation_002.xml", "checkpoints/generation_002.ckpt",
                        "final_policy.ckpt", "manifest_evolve.json", "generations.svg"}) {
    EXPECT_TRUE(fs::exists(d / "out" / f)) << f;
  }
  const AgentGraph best = load_agent(d / "out/best/generation_002.json");
  EXPECT_TRUE(best.same_topology(load_agent(kRoot / "configs/agents/quadruped.json")));
}

TEST(Cli, EvolveResumeMatchesUninterrupted) {
  const fs::path a = fresh_dir("codesign_cli_full"), b = fresh_dir("codesign_cli_split");
  ASSERT_EQ(run("evolve --quiet --config " + tiny_config(a, 2, 3).string()).code, 0);
  ASSERT_EQ(run("evolve --quiet --config " + tiny_config(b, 2, 1).string()).code, 0);
  ASSERT_EQ(run("evolve --quiet --resume --config " + tiny_config(b, 2, 3).string()).code, 0);
  auto fitness_columns = [](const fs::path& p) {
    std::ifstream in(p);
    std::string line, out;
    while (std::getline(in, line)) out += line.substr(0, line.find(',', line.find(',') + 1)) + "\n";
    return out;
  };
  EXPECT_EQ(fitness_columns(a / "out/history.csv"), fitness_columns(b / "out/history.csv"));
  EXPECT_EQ(load_learner(a / "out/final_policy.ckpt").ac.flat(), load_learner(b / "out/final_policy.ckpt").ac.flat());
}

TEST(Cli, EvaluateIsReproducibleAndChecksLayout) {
  const fs::path d = fresh_dir("codesign_cli_eval");
  const fs::path cfg = tiny_config(d, 2, 0);
  ASSERT_EQ(run("train-baseline --quiet --config " + cfg.string()).code, 0);
  const CliRun r1 = run("evaluate --episodes 1 --seed 7 --config " + cfg.string());
  const CliRun r2 = run("evaluate --episodes 1 --seed 7 --config " + cfg.string());
  ASSERT_EQ(r1.code, 0) << r1.out;
  EXPECT_EQ(r1.out, r2.out);
  const CliRun bad = run("evaluate --config " + cfg.string() + " --agent " +
                      (kRoot / "configs/agents/eight_part.json").string());
  EXPECT_EQ(bad.code, 3) << bad.out;
}

TEST(Cli, StoredBaselineFitnessReproduced) {
  const fs::path d = fresh_dir("codesign_cli_stored");
  const fs::path cfg = tiny_config(d, 2, 0);
  ASSERT_EQ(run("train-baseline --quiet --config " + cfg.string()).code, 0);
  const CliRun r = run("evaluate --episodes 1 --config " + cfg.string());
  ASSERT_EQ(r.code, 0);
  const auto mean = r.out.find("mean "), stored = r.out.find("stored fitness ");
  ASSERT_NE(stored, std::string::npos);
  EXPECT_EQ(std::stod(r.out.substr(mean + 5)), std::stod(r.out.substr(stored + 15)));
}

TEST(Cli, ExportMjcfRoundTrips) {
  const fs::path out = fs::temp_directory_path() / "codesign_cli_quadruped.xml";
  ASSERT_EQ(run("export-mjcf --agent " + (kRoot / "configs/agents/quadruped.json").string() + " --out " +
                out.string())
                .code,
            0);
  const AgentGraph back = parse_mjcf(read_text_file(out));
  EXPECT_TRUE(back.same_topology(load_agent(kRoot / "configs/agents/quadruped.json")));
}

TEST(ExperimentConfig, ReferenceConfigLoads) {
  const ExperimentConfig c = load_experiment(kRoot / "configs/reference.json");
  EXPECT_EQ(c.evo.population, 16);
  EXPECT_EQ(c.evo.generations, 10);
  EXPECT_EQ(c.train.env_count, 64);
  EXPECT_EQ(c.net.hidden, (std::vector<int>{256, 128, 64}));
  EXPECT_TRUE(fs::exists(c.agent));
  const ExperimentConfig again = experiment_from_json(c.to_json(), "/");
  EXPECT_EQ(again.to_json(), c.to_json());
}

TEST(ExperimentConfig, UnknownFieldTypesRejected) {
  nlohmann::json j = {{"agent", (kRoot / "configs/agents/quadruped.json").string()},
                      {"train", {{"env_count", "many"}}}};
  try {
    experiment_from_json(j, "/");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
  }
}

TEST(SvgPlot, SeriesAndGaps) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::string svg = svg_line_plot("t", "x", "y", {{"a", {0, 1, 2, 3}, {1, nan, 2, 3}}, {"b", {0, 1}, {0, 1}}});
  EXPECT_EQ(count(svg, "<polyline"), 3);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}
