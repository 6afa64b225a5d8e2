#pragma once

// The co-design loop: baseline training on the template, then generations of
// universal-controller training with transfer, evaluation, selection and
// reproduction.

#include <chrono>
#include <filesystem>
#include <functional>
#include <cstdio>

#include "codesign/evolution/operators.hpp"
#include "codesign/ppo/train.hpp"

namespace codesign {

struct GenerationRecord {
  int index = 0;  // 0 is the baseline (template only)
  std::vector<Gene> population;
  std::vector<double> fitness;
  Gene best_gene;
  double best_fitness = 0.0;
  std::string policy_checkpoint;
  double actual_change = 0.0;  // best gene vs template, percent
  double lr = 0.0;
  double seconds = 0.0;
  bool rolled_back = false;  // the parent policy scored higher and was kept

  double mean_fitness() const {
    double s = 0.0;
    for (double f : fitness) s += f;
    return fitness.empty() ? 0.0 : s / static_cast<double>(fitness.size());
  }
  double median_fitness() const {
    if (fitness.empty()) return 0.0;
    std::vector<double> f = fitness;
    std::sort(f.begin(), f.end());
    const size_t n = f.size();
    return n % 2 ? f[n / 2] : 0.5 * (f[n / 2 - 1] + f[n / 2]);
  }
};

inline std::vector<Gene> next_generation(const GenerationRecord& record, const ConstraintSpec& spec,
                                         const EvoConfig& cfg, std::mt19937_64& rng) {
  return next_generation(record.population, record.fitness, spec, cfg, rng);
}

struct EvolutionSetup {
  EvolutionSetup(AgentGraph t, ConstraintSpec s) : tmpl(std::move(t)), spec(std::move(s)) {}

  AgentGraph tmpl;
  ConstraintSpec spec;
  EnvConfig env;
  TrainConfig train;  // total_epochs is the baseline budget
  NetworkConfig net;
  EvoConfig evo;
  std::uint64_t seed = 1;
  std::uint64_t eval_seed = 12345;
  std::filesystem::path checkpoint_dir;  // empty: no generation checkpoints
};

struct EvolutionResult {
  GenerationRecord baseline;
  std::vector<GenerationRecord> generations;
  std::vector<double> baseline_curve;
  Learner final_policy;

  double best_fitness() const {
    double b = baseline.best_fitness;
    for (const auto& g : generations) b = std::max(b, g.best_fitness);
    return b;
  }
  double best_evolved_fitness() const {
    double b = -std::numeric_limits<double>::infinity();
    for (const auto& g : generations) b = std::max(b, g.best_fitness);
    return b;
  }
};

using GenerationCallback = std::function<void(const GenerationRecord&, const Learner&)>;

inline GenerationRecord make_record(int index, std::vector<Gene> population, std::vector<double> fitness,
                                    const Gene& template_gene, const ConstraintSpec& spec) {
  GenerationRecord r;
  r.index = index;
  r.population = std::move(population);
  r.fitness = std::move(fitness);
  const int best = select_top(r.fitness, 1e-9).front();
  r.best_gene = r.population[best];
  r.best_fitness = r.fitness[best];
  r.actual_change = actual_change(template_gene, r.best_gene, &spec);
  return r;
}

/// Trains (or takes) the baseline and evaluates it on the template.
inline GenerationRecord baseline_record(const EvolutionSetup& s, const Learner& baseline) {
  const Gene tg = flatten_gene(s.tmpl);
  const double f = evaluate(baseline, s.tmpl, s.tmpl, s.env, s.evo.eval_episodes, s.eval_seed).mean;
  GenerationRecord r = make_record(0, {tg}, {f}, tg, s.spec);
  r.lr = baseline.lr;
  return r;
}

/// Progress of a run between generations. Everything needed to continue it
/// lives here, so a run can be checkpointed after any generation.
struct EvolutionState {
  GenerationRecord baseline;
  std::vector<GenerationRecord> generations;
  Learner parent;  // policy handed to the next generation
  std::mt19937_64 rng;
  int stale = 0;  // generations in a row without improvement >= tol
  bool stopped = false;

  int next_index() const { return static_cast<int>(generations.size()) + 1; }
};

inline EvolutionState start_evolution(const EvolutionSetup& s, const Learner& baseline) {
  s.evo.validate();
  EvolutionState st;
  st.baseline = baseline_record(s, baseline);
  st.parent = baseline;
  st.rng.seed(derive_seed(s.seed, 0, 31));
  return st;
}

inline bool evolution_done(const EvolutionState& st, const EvolutionSetup& s) {
  return st.stopped || st.next_index() > s.evo.generations;
}

/// Runs one generation: reproduce (or sample, for the first), train the
/// universal controller from the parent policy, evaluate, record.
///
/// With policy_rollback, the population is also evaluated under the parent
/// policy and whichever policy gives the higher best fitness is kept and
/// passed on. Evaluation is deterministic per (policy, gene, eval_seed) and
/// elites are carried unchanged, so the best fitness never decreases from one
/// generation to the next.
inline const GenerationRecord& advance_evolution(EvolutionState& st, const EvolutionSetup& s,
                                                 const EpochCallback& on_epoch = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const int g = st.next_index();
  const Gene tg = flatten_gene(s.tmpl);
  std::vector<Gene> pop = st.generations.empty() ? sample_variants(s.tmpl, s.spec, s.evo.population, st.rng)
                                                 : next_generation(st.generations.back(), s.spec, s.evo, st.rng);
  GenerationTraining gen = train_generation(pop, s.tmpl, st.parent, s.env, s.train, s.evo.epochs_per_generation,
                                            s.evo.eval_episodes, derive_seed(s.seed, g, 21), s.eval_seed, on_epoch);
  std::vector<double> fitness = std::move(gen.fitness);
  bool rolled_back = false;
  if (s.evo.policy_rollback) {
    std::vector<double> parent_fit = evaluate_population(st.parent, s.tmpl, agents_from_genes(s.tmpl, pop), s.env,
                                                         s.evo.eval_episodes, s.eval_seed, s.train.threads);
    if (*std::max_element(parent_fit.begin(), parent_fit.end()) > *std::max_element(fitness.begin(), fitness.end())) {
      fitness = std::move(parent_fit);
      rolled_back = true;
    }
  }
  if (!rolled_back) st.parent = std::move(gen.train.learner);
  GenerationRecord rec = make_record(g, std::move(pop), std::move(fitness), tg, s.spec);
  rec.rolled_back = rolled_back;
  rec.lr = st.parent.lr;
  if (!s.checkpoint_dir.empty()) {
    char name[32];
    std::snprintf(name, sizeof(name), "generation_%03d.ckpt", g);
    const auto path = s.checkpoint_dir / name;
    save_learner(path, st.parent, {{"generation", g}, {"best_fitness", rec.best_fitness}});
    rec.policy_checkpoint = path.string();
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double before = st.generations.empty() ? st.baseline.best_fitness : st.generations.back().best_fitness;
  st.stale = rec.best_fitness - before < s.evo.tol ? st.stale + 1 : 0;
  if (s.evo.patience > 0 && st.stale >= s.evo.patience) st.stopped = true;
  st.generations.push_back(std::move(rec));
  return st.generations.back();
}

/// Generations 1..G starting from a trained baseline.
inline EvolutionResult evolve_from(const EvolutionSetup& s, const Learner& baseline, const GenerationCallback& cb = {},
                                   const EpochCallback& on_epoch = {}) {
  EvolutionState st = start_evolution(s, baseline);
  if (cb) cb(st.baseline, baseline);
  while (!evolution_done(st, s)) {
    const GenerationRecord& rec = advance_evolution(st, s, on_epoch);
    if (cb) cb(rec, st.parent);
  }
  EvolutionResult res;
  res.baseline = std::move(st.baseline);
  res.generations = std::move(st.generations);
  res.final_policy = std::move(st.parent);
  return res;
}

/// Full pipeline: baseline training on the template followed by evolution.
inline EvolutionResult run_evolution(const EvolutionSetup& s, const GenerationCallback& cb = {},
                                     const EpochCallback& on_epoch = {}) {
  const TrainResult base = train_single(s.tmpl, s.env, s.train, s.net, s.seed, on_epoch);
  EvolutionResult res = evolve_from(s, base.learner, cb, on_epoch);
  res.baseline_curve = base.reward_curve;
  return res;
}

}  // namespace codesign
