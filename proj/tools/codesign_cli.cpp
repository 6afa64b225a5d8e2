// codesign: command-line front end.
//
//   codesign train-baseline --config configs/reference.json [--resume]
//   codesign evolve         --config configs/reference.json [--ablate-mutation] [--resume]
//   codesign evaluate       --config configs/reference.json --checkpoint runs/x/baseline.ckpt [--agent a.json]
//   codesign export-mjcf    --agent configs/agents/quadruped.json [--out quadruped.xml]
//
// Exit status: 0 success, 1 any other failure, 2 missing input file,
// 3 policy/agent layout mismatch.

#include <CLI11.hpp>
#include <ctime>
#include <iostream>

#include "codesign/io/config.hpp"
#include "codesign/io/report.hpp"
#include "codesign/morphology/mjcf.hpp"

using namespace codesign;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out;
  bool resume = false;
  bool ablate_mutation = false;
  bool from_scratch = false;
  bool quiet = false;
  std::string checkpoint;
  std::string agent;
  int episodes = 20;
  std::optional<std::uint64_t> eval_seed;
  std::string trajectory;
};

ExperimentConfig load_config(const Options& o) {
  if (o.config.empty()) throw Error(ErrorCode::InvalidAttribute, "--config is required");
  ExperimentConfig c = load_experiment(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.train.threads = *o.threads;
  if (!o.out.empty()) c.output = o.out;
  return c;
}

void write_manifest(const ExperimentConfig& c, const std::string& command) {
  fs::create_directories(c.output);
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  nlohmann::json m = {{"command", command},
                      {"seed", c.seed},
                      {"threads", c.train.threads},
                      {"started", stamp},
                      {"config", c.to_json()},
                      {"versions",
                       {{"codesign", kVersion},
                        {"compiler", __VERSION__},
                        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                      "." + std::to_string(EIGEN_MINOR_VERSION)},
                        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}}};
  write_text_file(c.output / ("manifest_" + command + ".json"), m.dump(2) + "\n");
}

void log(const Options& o, const std::string& line) {
  if (!o.quiet) std::cout << line << std::endl;
}

std::string fmt(double v, int prec = 3) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(prec) << v;
  return s.str();
}

void plot_reward_curve(const fs::path& metrics_csv_dir, const std::vector<double>& curve, long first_epoch) {
  PlotSeries s{"mean episode return", {}, curve};
  for (size_t i = 0; i < curve.size(); ++i) s.x.push_back(static_cast<double>(first_epoch + static_cast<long>(i)));
  write_text_file(metrics_csv_dir / "baseline_reward.svg",
                  svg_line_plot("Baseline training", "epoch", "mean episode return", {s}));
}

/// Trains (or resumes) the baseline and stores its deterministic fitness in
/// the checkpoint metadata. Returns the trained learner.
Learner train_baseline(const ExperimentConfig& c, const Options& o) {
  const AgentGraph tmpl = load_agent(c.agent);
  const fs::path ckpt = c.output / "baseline.ckpt";
  const fs::path metrics = c.output / "baseline_metrics.csv";
  TrainConfig cfg = c.train;
  std::optional<Learner> resume;
  if (o.resume && fs::exists(ckpt)) {
    resume = load_learner(ckpt);
    cfg.total_epochs = static_cast<int>(std::max<long>(0, c.train.total_epochs - resume->epochs_trained));
    log(o, "resuming from epoch " + std::to_string(resume->epochs_trained) + ", " +
               std::to_string(cfg.total_epochs) + " epochs left");
  } else if (fs::exists(metrics)) {
    fs::remove(metrics);
  }
  if (!fs::exists(metrics)) write_csv(metrics, kMetricsHeader, "");

  const auto save = [&](const Learner& l, const nlohmann::json& extra) {
    nlohmann::json meta = extra;
    meta["seed"] = c.seed;
    save_learner(ckpt, l, meta);
  };
  const EpochCallback on_epoch = [&](const EpochStats& st, const Learner& l) {
    append_csv(metrics, kMetricsHeader, metrics_row(st));
    if (st.epoch % 10 == 0) {
      save(l, {});
      log(o, "epoch " + std::to_string(st.epoch) + "  return " + fmt(st.mean_episode_return, 1) + "  kl " +
                 fmt(st.update.kl, 4) + "  lr " + fmt(st.update.lr * 1e4, 2) + "e-4");
    }
    return true;
  };
  const TrainResult res =
      train_single(tmpl, c.env, cfg, c.net, c.seed, on_epoch, resume ? &*resume : nullptr);
  const EvalResult ev = evaluate(res.learner, tmpl, tmpl, c.env, c.evo.eval_episodes, c.eval_seed);
  save(res.learner, {{"fitness", ev.mean}, {"eval_seed", c.eval_seed}, {"eval_episodes", c.evo.eval_episodes}});

  // The plot covers the whole history in the metrics file, resumed runs included.
  std::vector<double> curve;
  long first = 1;
  {
    std::ifstream in(metrics);
    std::string line;
    std::getline(in, line);
    double carried = std::numeric_limits<double>::quiet_NaN();
    bool first_row = true;
    while (std::getline(in, line)) {
      std::istringstream row(line);
      std::string epoch, ret;
      std::getline(row, epoch, ',');
      std::getline(row, ret, ',');
      if (first_row) first = std::stol(epoch), first_row = false;
      if (!ret.empty()) carried = std::stod(ret);
      curve.push_back(carried);
    }
  }
  plot_reward_curve(c.output, curve, first);
  log(o, "baseline fitness " + fmt(ev.mean, 2) + " (" + std::to_string(c.evo.eval_episodes) + " episodes, seed " +
             std::to_string(c.eval_seed) + "), " + std::to_string(res.learner.epochs_trained) + " epochs");
  return res.learner;
}

int cmd_train_baseline(const Options& o) {
  const ExperimentConfig c = load_config(o);
  write_manifest(c, "train-baseline");
  train_baseline(c, o);
  return 0;
}

void export_best(const fs::path& dir, const AgentGraph& tmpl, const GenerationRecord& r) {
  fs::create_directories(dir);
  char stem[32];
  std::snprintf(stem, sizeof(stem), "generation_%03d", r.index);
  const AgentGraph best = apply_gene(tmpl, r.best_gene);
  write_text_file(dir / (std::string(stem) + ".json"), write_description(best));
  write_text_file(dir / (std::string(stem) + ".xml"), export_mjcf(best));
}

/// One evolution run into `dir`, resumable between generations.
EvolutionState run_evolution_into(const ExperimentConfig& c, const EvoConfig& evo, const fs::path& dir,
                                  const Learner& baseline, const Options& o, const std::string& label) {
  const AgentGraph tmpl = load_agent(c.agent);
  EvolutionSetup s(tmpl, experiment_constraints(c, tmpl));
  s.env = c.env;
  s.train = c.train;
  s.net = c.net;
  s.evo = evo;
  s.seed = c.seed;
  s.eval_seed = c.eval_seed;
  s.checkpoint_dir = dir / "checkpoints";
  fs::create_directories(s.checkpoint_dir);

  const fs::path state_file = dir / "evolution_state.json";
  const fs::path parent_file = dir / "evolution_parent.ckpt";
  EvolutionState st = o.resume && fs::exists(state_file)
                          ? state_from_json(nlohmann::json::parse(read_text_file(state_file)),
                                            load_learner(parent_file), tmpl, s.spec)
                          : start_evolution(s, baseline);
  if (!st.generations.empty()) log(o, label + "resuming after generation " + std::to_string(st.generations.size()));

  const auto persist = [&] {
    save_learner(parent_file, st.parent);
    write_text_file(state_file, state_to_json(st).dump() + "\n");
    std::string rows = history_row(st.baseline);
    for (const auto& g : st.generations) rows += history_row(g);
    write_csv(dir / "history.csv", kHistoryHeader, rows);
    write_text_file(dir / "generations.svg",
                    svg_line_plot("Best fitness per generation", "generation", "fitness",
                                  {best_fitness_series("best", st.baseline, st.generations)}));
  };
  persist();
  export_best(dir / "best", tmpl, st.baseline);
  log(o, label + "baseline fitness " + fmt(st.baseline.best_fitness, 2));
  while (!evolution_done(st, s)) {
    const GenerationRecord& r = advance_evolution(st, s);
    export_best(dir / "best", tmpl, r);
    persist();
    log(o, label + "generation " + std::to_string(r.index) + "  best " + fmt(r.best_fitness, 2) + "  mean " +
               fmt(r.mean_fitness(), 2) + "  change " + fmt(r.actual_change, 2) + "%" +
               (r.rolled_back ? "  (parent policy kept)" : "") + "  " + fmt(r.seconds, 1) + " s");
  }
  save_learner(dir / "final_policy.ckpt", st.parent);
  return st;
}

int cmd_evolve(const Options& o) {
  const ExperimentConfig c = load_config(o);
  write_manifest(c, "evolve");
  Learner baseline;
  const fs::path given = o.checkpoint.empty() ? c.output / "baseline.ckpt" : fs::path(o.checkpoint);
  if (fs::exists(given) && !o.from_scratch) {
    baseline = load_learner(given);
    log(o, "using baseline policy " + given.string());
  } else {
    if (!o.checkpoint.empty() && !o.from_scratch) throw Error(ErrorCode::Io, "checkpoint not found: " + given.string());
    Options fresh = o;
    fresh.resume = false;
    baseline = train_baseline(c, fresh);
  }
  const EvolutionState with = run_evolution_into(c, c.evo, c.output, baseline, o, "");
  if (o.ablate_mutation) {
    EvoConfig off = c.evo;
    off.mutation_prob = 0.0;
    const EvolutionState without =
        run_evolution_into(c, off, c.output / "ablation_no_mutation", baseline, o, "[no mutation] ");
    write_text_file(c.output / "mutation_ablation.svg",
                    svg_line_plot("Mutation ablation", "generation", "best fitness",
                                  {best_fitness_series("with mutation", with.baseline, with.generations),
                                   best_fitness_series("without mutation", without.baseline, without.generations)}));
  }
  return 0;
}

int cmd_evaluate(const Options& o) {
  const ExperimentConfig c = load_config(o);
  const AgentGraph tmpl = load_agent(c.agent);
  const fs::path agent_path = o.agent.empty() ? c.agent : fs::path(o.agent);
  require_file(agent_path, "agent file");
  const AgentGraph agent = load_agent(agent_path);
  const fs::path ckpt = o.checkpoint.empty() ? c.output / "baseline.ckpt" : fs::path(o.checkpoint);
  require_file(ckpt, "checkpoint");
  const Checkpoint raw = read_checkpoint(ckpt);
  const Learner l = learner_from_checkpoint(raw);
  const std::uint64_t seed = o.eval_seed.value_or(c.eval_seed);
  const EvalResult r = evaluate(l, tmpl, agent, c.env, o.episodes, seed);
  std::cout << "episodes " << o.episodes << "  seed " << seed << "\n";
  std::cout << std::setprecision(10) << "mean " << r.mean << "  std " << r.stddev << "\n";
  const auto meta = nlohmann::json::parse(raw.meta);
  if (meta.contains("fitness")) std::cout << "stored fitness " << meta["fitness"].get<double>() << "\n";

  if (!o.trajectory.empty()) {
    std::ofstream out(o.trajectory);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + o.trajectory);
    out << "episode,step,x,y,z,reward,done\n";
    for (int k = 0; k < o.episodes; ++k) {
      Environment e(tmpl, agent, c.env, derive_seed(seed, k, 3));
      Eigen::MatrixXd x(e.obs_dim(), 1);
      for (int t = 1;; ++t) {
        x.col(0) = e.observation();
        l.obs_norm.normalize_inplace(x);
        const Eigen::Vector3d before = e.state().root_pos;
        const StepResult s = e.step(l.ac.actor.mean.forward(x).col(0));
        const Eigen::Vector3d p = s.done ? before : e.state().root_pos;
        out << k << ',' << t << ',' << p.x() << ',' << p.y() << ',' << p.z() << ',' << s.reward.total << ','
            << (s.done ? 1 : 0) << '\n';
        if (s.done) break;
      }
    }
  }
  return 0;
}

int cmd_export_mjcf(const Options& o) {
  fs::path agent_path = o.agent;
  if (agent_path.empty()) agent_path = load_config(o).agent;
  require_file(agent_path, "agent file");
  const std::string xml = export_mjcf(load_agent(agent_path));
  if (o.out.empty()) {
    std::cout << xml;
  } else {
    fs::path out = o.out;
    if (fs::is_directory(out)) out /= agent_path.stem().string() + ".xml";
    write_text_file(out, xml);
  }
  return 0;
}

int exit_code(const Error& e) {
  switch (e.code()) {
    case ErrorCode::Io: return 2;
    case ErrorCode::LayoutMismatch: return 3;
    default: return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Morphology and policy co-design for legged agents"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Experiment config (JSON)");
    sub->add_option("--seed", o.seed, "Override the config seed");
    sub->add_option("--threads", o.threads, "Worker threads (1 is bitwise reproducible)")->check(CLI::PositiveNumber);
    sub->add_option("--out", o.out, "Output directory (or file for export-mjcf)");
    sub->add_flag("--quiet", o.quiet, "No progress output");
  };
  auto* train = app.add_subcommand("train-baseline", "Train a policy on the template agent");
  common(train);
  train->add_flag("--resume", o.resume, "Continue from the last baseline checkpoint");

  auto* evolve = app.add_subcommand("evolve", "Baseline followed by co-design generations");
  common(evolve);
  evolve->add_flag("--resume", o.resume, "Reuse the baseline and continue after the last finished generation");
  evolve->add_flag("--ablate-mutation", o.ablate_mutation, "Also run without mutation and plot both");
  evolve->add_option("--checkpoint", o.checkpoint, "Baseline policy (default: <out>/baseline.ckpt if present)");
  evolve->add_flag("--from-scratch", o.from_scratch, "Train a new baseline even if one exists");

  auto* eval = app.add_subcommand("evaluate", "Deterministic evaluation of a policy on an agent");
  common(eval);
  eval->add_option("--checkpoint", o.checkpoint, "Policy checkpoint (default: <out>/baseline.ckpt)");
  eval->add_option("--agent", o.agent, "Agent description (default: the config's template)");
  eval->add_option("--episodes", o.episodes, "Episodes")->check(CLI::PositiveNumber);
  eval->add_option("--eval-seed", o.eval_seed, "Evaluation seed (default: the config's eval_seed)");
  eval->add_option("--trajectory", o.trajectory, "Write a per-step CSV");

  auto* mjcf = app.add_subcommand("export-mjcf", "Write an agent description as MJCF");
  common(mjcf);
  mjcf->add_option("--agent", o.agent, "Agent description (default: the config's template)");

  CLI11_PARSE(app, argc, argv);
  // --seed doubles as the evaluation seed for the evaluate command.
  if (eval->parsed() && o.seed && !o.eval_seed) o.eval_seed = o.seed;

  try {
    if (train->parsed()) return cmd_train_baseline(o);
    if (evolve->parsed()) return cmd_evolve(o);
    if (eval->parsed()) return cmd_evaluate(o);
    if (mjcf->parsed()) return cmd_export_mjcf(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
