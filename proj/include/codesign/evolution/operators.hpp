#pragma once

// Genetic operators over genes under a resolved ConstraintSpec. A "unit" is
// either one unlinked attribute or a whole linked group; crossover and
// mutation act on units so linked attributes always move together.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "codesign/morphology/constraints.hpp"

namespace codesign {

struct EvoConfig {
  int population = 16;
  double selection = 0.2;  // fraction carried over as seeds
  double swap_prob = 0.5;
  double mutation_prob = 0.01;
  double mutation_frac = 0.1;  // r as a fraction of the interval width
  int generations = 10;
  int epochs_per_generation = 20;
  int eval_episodes = 3;
  int patience = 0;  // 0 disables early stopping
  double tol = 0.0;
  bool policy_rollback = true;

  void validate() const {
    auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidAttribute, "evolution config: " + what); };
    if (population < 1) bad("population must be positive");
    if (!(selection > 0.0 && selection < 1.0)) bad("selection must lie in (0, 1)");
    if (!(swap_prob >= 0.0 && swap_prob <= 1.0)) bad("swap_prob must lie in [0, 1]");
    if (!(mutation_prob >= 0.0 && mutation_prob <= 1.0)) bad("mutation_prob must lie in [0, 1]");
    if (!(mutation_frac >= 0.0)) bad("mutation_frac must be non-negative");
    if (generations < 0 || epochs_per_generation < 0 || eval_episodes < 1) bad("counts");
  }
};

/// Indices of the ceil(p*n) fittest entries, best first; ties go to the lower
/// index.
inline std::vector<int> select_top(const std::vector<double>& fitness, double p) {
  if (fitness.empty()) return {};
  const int n = static_cast<int>(fitness.size());
  // The small epsilon keeps ceil(0.2 * 150) at 30 despite rounding.
  const int k = std::clamp(static_cast<int>(std::ceil(p * n - 1e-9)), 1, n);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return fitness[a] > fitness[b]; });
  idx.resize(k);
  return idx;
}

namespace evo_detail {

/// Units of a spec: unlinked non-fixed slots as singletons, then each
/// non-fixed group.
inline std::vector<std::vector<int>> units(const ConstraintSpec& spec) {
  std::vector<std::vector<int>> out;
  for (size_t i = 0; i < spec.size(); ++i) {
    if (spec.group[i] < 0 && !spec.fixed[i]) out.push_back({static_cast<int>(i)});
  }
  for (const auto& members : spec.groups) {
    if (!spec.fixed[members[0]]) out.push_back(members);
  }
  return out;
}

inline void check_layout(const Gene& g, const ConstraintSpec& spec) {
  if (g.layout != spec.layout || g.values.size() != spec.size()) {
    throw Error(ErrorCode::LayoutMismatch, "gene layout does not match the constraints");
  }
}

}  // namespace evo_detail

/// Child starts as a copy of a; each unit takes b's value with probability
/// swap_prob. Fixed attributes are never touched.
inline Gene crossover(const Gene& a, const Gene& b, const ConstraintSpec& spec, double swap_prob,
                      std::mt19937_64& rng) {
  evo_detail::check_layout(a, spec);
  evo_detail::check_layout(b, spec);
  Gene child = a;
  std::bernoulli_distribution swap(swap_prob);
  for (const auto& unit : evo_detail::units(spec)) {
    if (!swap(rng)) continue;
    for (int i : unit) child.values[i] = b.values[i];
  }
  return child;
}

/// Each unit mutates with probability mutation_prob: one uniform draw from
/// [-r, r], r = mutation_frac * interval width, added to every member and
/// clamped into the interval. `mutated` (optional) receives the number of
/// units that drew a mutation.
inline Gene mutate(const Gene& g, const ConstraintSpec& spec, const EvoConfig& cfg, std::mt19937_64& rng,
                   int* mutated = nullptr) {
  evo_detail::check_layout(g, spec);
  Gene out = g;
  std::bernoulli_distribution hit(cfg.mutation_prob);
  int count = 0;
  for (const auto& unit : evo_detail::units(spec)) {
    if (!hit(rng)) continue;
    ++count;
    const Interval& iv = spec.intervals[unit[0]];
    const double r = cfg.mutation_frac * iv.width();
    const double delta = r > 0.0 ? std::uniform_real_distribution<double>(-r, r)(rng) : 0.0;
    const double v = std::clamp(out.values[unit[0]] + delta, iv.lo, iv.hi);
    for (int i : unit) out.values[i] = v;
  }
  if (mutated) *mutated = count;
  return out;
}

/// Elites (the selected seeds, unchanged) followed by mutated crossover
/// children of two distinct random seeds.
inline std::vector<Gene> next_generation(const std::vector<Gene>& population, const std::vector<double>& fitness,
                                         const ConstraintSpec& spec, const EvoConfig& cfg, std::mt19937_64& rng) {
  if (population.size() != fitness.size()) {
    throw Error(ErrorCode::LengthMismatch, "population and fitness differ in length");
  }
  const int n = cfg.population;
  const std::vector<int> top = select_top(fitness, cfg.selection);
  std::vector<Gene> out;
  out.reserve(n);
  for (int i : top) {
    if (static_cast<int>(out.size()) == n) break;
    out.push_back(population[i]);
  }
  const int slots = n - static_cast<int>(out.size());
  if (slots > 0 && top.size() < 2) {
    throw Error(ErrorCode::PopulationTooSmall, "need at least two seeds to fill " + std::to_string(slots) + " slots");
  }
  std::uniform_int_distribution<int> pick(0, static_cast<int>(top.size()) - 1);
  for (int k = 0; k < slots; ++k) {
    const int a = pick(rng);
    int b = pick(rng);
    while (b == a) b = pick(rng);
    Gene child = crossover(population[top[a]], population[top[b]], spec, cfg.swap_prob, rng);
    out.push_back(mutate(child, spec, cfg, rng));
  }
  return out;
}

/// Mean absolute relative deviation from the baseline in percent, over the
/// evolvable (non-fixed) attributes when a spec is given, else over all.
/// Attributes whose baseline is 0 use the absolute deviation divided by the
/// interval width (or the bare absolute deviation without a spec).
inline double actual_change(const Gene& baseline, const Gene& evolved, const ConstraintSpec* spec = nullptr) {
  if (baseline.layout != evolved.layout || baseline.values.size() != evolved.values.size()) {
    throw Error(ErrorCode::LayoutMismatch, "actual_change: genes differ in layout");
  }
  if (spec) evo_detail::check_layout(baseline, *spec);
  double sum = 0.0;
  int count = 0;
  for (size_t i = 0; i < baseline.size(); ++i) {
    if (spec && spec->fixed[i]) continue;
    const double b = baseline.values[i];
    const double d = std::abs(evolved.values[i] - b);
    if (b != 0.0) {
      sum += d / std::abs(b);
    } else {
      const double w = spec ? spec->intervals[i].width() : 0.0;
      sum += w > 0.0 ? d / w : d;
    }
    ++count;
  }
  return count == 0 ? 0.0 : 100.0 * sum / count;
}

}  // namespace codesign
