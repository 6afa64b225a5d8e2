#pragma once

// Experiment configuration files and JSON forms of the run-time structures.
//
//   {
//     "agent": "../configs/agents/quadruped.json",
//     "constraints": "../configs/constraints/quadruped_free.json",
//     "seed": 1,
//     "eval_seed": 12345,
//     "output": "runs/reference",
//     "network": {"hidden": [256, 128, 64]},
//     "train": {"env_count": 64, "horizon": 32, "total_epochs": 300},
//     "evolution": {"population": 16, "generations": 10},
//     "reward": {...}, "sim": {...}, "env": {...}
//   }
//
// Relative paths resolve against the directory of the config file. Every
// section is optional; missing keys keep their defaults.

#include <json.hpp>

#include "codesign/evolution/run.hpp"
#include "codesign/morphology/description.hpp"

namespace codesign {

inline nlohmann::json to_json_vec3(const Eigen::Vector3d& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

inline Eigen::Vector3d vec3_or(const nlohmann::json& j, const char* key, const Eigen::Vector3d& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) throw Error(ErrorCode::ParseError, std::string(key) + " must be [x, y, z]");
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ContactParams, ground_stiffness, ground_damping, friction_coeff,
                                                ground_height, slip_damping)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(NetworkConfig, hidden, hidden_gain, policy_output_gain,
                                                value_output_gain, init_log_sigma)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvoConfig, population, selection, swap_prob, mutation_prob,
                                                mutation_frac, generations, epochs_per_generation, eval_episodes,
                                                patience, tol, policy_rollback)

inline void to_json(nlohmann::json& j, const SimConfig& c) {
  j = {{"dt", c.dt},
       {"substeps", c.substeps},
       {"gravity", to_json_vec3(c.gravity)},
       {"contact", c.contact},
       {"ground_contact", c.ground_contact},
       {"self_collision", c.self_collision},
       {"self_collision_stiffness", c.self_collision_stiffness},
       {"self_collision_damping", c.self_collision_damping},
       {"limit_stiffness", c.limit_stiffness},
       {"limit_damping", c.limit_damping},
       {"spawn_clearance", c.spawn_clearance},
       {"fixed_root", c.fixed_root}};
}

inline void from_json(const nlohmann::json& j, SimConfig& c) {
  const SimConfig d;
  c.dt = j.value("dt", d.dt);
  c.substeps = j.value("substeps", d.substeps);
  c.gravity = vec3_or(j, "gravity", d.gravity);
  c.contact = j.value("contact", d.contact);
  c.ground_contact = j.value("ground_contact", d.ground_contact);
  c.self_collision = j.value("self_collision", d.self_collision);
  c.self_collision_stiffness = j.value("self_collision_stiffness", d.self_collision_stiffness);
  c.self_collision_damping = j.value("self_collision_damping", d.self_collision_damping);
  c.limit_stiffness = j.value("limit_stiffness", d.limit_stiffness);
  c.limit_damping = j.value("limit_damping", d.limit_damping);
  c.spawn_clearance = j.value("spawn_clearance", d.spawn_clearance);
  c.fixed_root = j.value("fixed_root", d.fixed_root);
}

inline void to_json(nlohmann::json& j, const RewardConfig& c) {
  j = {{"w_heading", c.w_heading},       {"w_up", c.w_up},       {"t_heading", c.t_heading},
       {"t_up", c.t_up},                 {"w_act", c.w_act},     {"w_energy", c.w_energy},
       {"w_jointlimit", c.w_jointlimit}, {"t_jointlimit", c.t_jointlimit}, {"alive_bonus", c.alive_bonus},
       {"forward", to_json_vec3(c.forward)}, {"vertical", to_json_vec3(c.vertical)}};
}

// dt is not read: the environment always uses the simulator's control step.
inline void from_json(const nlohmann::json& j, RewardConfig& c) {
  const RewardConfig d;
  c.w_heading = j.value("w_heading", d.w_heading);
  c.w_up = j.value("w_up", d.w_up);
  c.t_heading = j.value("t_heading", d.t_heading);
  c.t_up = j.value("t_up", d.t_up);
  c.w_act = j.value("w_act", d.w_act);
  c.w_energy = j.value("w_energy", d.w_energy);
  c.w_jointlimit = j.value("w_jointlimit", d.w_jointlimit);
  c.t_jointlimit = j.value("t_jointlimit", d.t_jointlimit);
  c.alive_bonus = j.value("alive_bonus", d.alive_bonus);
  c.forward = vec3_or(j, "forward", d.forward);
  c.vertical = vec3_or(j, "vertical", d.vertical);
}

inline void to_json(nlohmann::json& j, const TerminationLimits& c) {
  j = {{"flip_threshold", c.flip_threshold},
       {"direction_threshold", c.direction_threshold},
       {"fall_fraction", c.fall_fraction},
       {"scene_half_width", c.scene_half_width},
       {"scene_back", c.scene_back}};
}

inline void from_json(const nlohmann::json& j, TerminationLimits& c) {
  const TerminationLimits d;
  c.flip_threshold = j.value("flip_threshold", d.flip_threshold);
  c.direction_threshold = j.value("direction_threshold", d.direction_threshold);
  c.fall_fraction = j.value("fall_fraction", d.fall_fraction);
  c.scene_half_width = j.value("scene_half_width", d.scene_half_width);
  c.scene_back = j.value("scene_back", d.scene_back);
}

struct ExperimentConfig {
  std::filesystem::path agent;
  std::filesystem::path constraints;
  std::uint64_t seed = 1;
  std::uint64_t eval_seed = 12345;
  std::filesystem::path output = "runs/default";
  EnvConfig env;
  TrainConfig train;
  NetworkConfig net;
  EvoConfig evo;

  nlohmann::json to_json() const {
    return {{"agent", agent.string()},
            {"constraints", constraints.string()},
            {"seed", seed},
            {"eval_seed", eval_seed},
            {"output", output.string()},
            {"network", net},
            {"train", train},
            {"evolution", evo},
            {"reward", env.reward},
            {"sim", env.sim},
            {"limits", env.limits},
            {"env", {{"max_episode_steps", env.max_episode_steps}, {"init_randomization", env.init_randomization}}}};
  }
};

inline std::filesystem::path resolve_path(const std::filesystem::path& base_dir, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : (base_dir / path).lexically_normal();
}

inline void require_file(const std::filesystem::path& p, const char* what) {
  if (!std::filesystem::is_regular_file(p)) {
    throw Error(ErrorCode::Io, std::string(what) + " not found: " + p.string());
  }
}

/// Parses a config document. `base_dir` anchors relative paths. Referenced
/// files must exist.
inline ExperimentConfig experiment_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  try {
    if (!j.contains("agent")) throw Error(ErrorCode::ParseError, "config needs an \"agent\" path");
    c.agent = resolve_path(base_dir, j.at("agent").get<std::string>());
    if (j.contains("constraints")) c.constraints = resolve_path(base_dir, j.at("constraints").get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.eval_seed = j.value("eval_seed", c.eval_seed);
    if (j.contains("output")) c.output = resolve_path(base_dir, j.at("output").get<std::string>());
    c.net = j.value("network", c.net);
    c.train = j.value("train", c.train);
    c.evo = j.value("evolution", c.evo);
    c.env.reward = j.value("reward", c.env.reward);
    c.env.sim = j.value("sim", c.env.sim);
    c.env.limits = j.value("limits", c.env.limits);
    if (j.contains("env")) {
      const auto& e = j.at("env");
      c.env.max_episode_steps = e.value("max_episode_steps", c.env.max_episode_steps);
      c.env.init_randomization = e.value("init_randomization", c.env.init_randomization);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("config: ") + e.what());
  }
  c.env.limits.forward = c.env.reward.forward;
  require_file(c.agent, "agent file");
  if (!c.constraints.empty()) require_file(c.constraints, "constraint file");
  c.train.validate();
  c.evo.validate();
  if (c.env.max_episode_steps < 1) throw Error(ErrorCode::InvalidAttribute, "max_episode_steps must be positive");
  return c;
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
  require_file(path, "config file");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return experiment_from_json(j, path.parent_path());
}

/// Constraints of an experiment: the rule file when given, else the plain
/// global band.
inline ConstraintSpec experiment_constraints(const ExperimentConfig& c, const AgentGraph& tmpl) {
  return c.constraints.empty() ? resolve_constraints(tmpl, 0.2)
                               : resolve_constraints(tmpl, load_constraint_rules(c.constraints));
}

// ---------------------------------------------------------------------------
// Evolution state files (resuming a run between generations).

inline nlohmann::json record_to_json(const GenerationRecord& r) {
  nlohmann::json pop = nlohmann::json::array();
  for (const Gene& g : r.population) pop.push_back(g.values);
  return {{"index", r.index},
          {"population", pop},
          {"fitness", r.fitness},
          {"policy_checkpoint", r.policy_checkpoint},
          {"lr", r.lr},
          {"seconds", r.seconds},
          {"rolled_back", r.rolled_back}};
}

inline GenerationRecord record_from_json(const nlohmann::json& j, const Gene& template_gene,
                                         const ConstraintSpec& spec) {
  std::vector<Gene> pop;
  for (const auto& values : j.at("population")) {
    Gene g = template_gene;
    g.values = values.get<std::vector<double>>();
    if (g.values.size() != template_gene.size()) throw Error(ErrorCode::LayoutMismatch, "stored gene length");
    pop.push_back(std::move(g));
  }
  GenerationRecord r = make_record(j.at("index").get<int>(), std::move(pop),
                                   j.at("fitness").get<std::vector<double>>(), template_gene, spec);
  r.policy_checkpoint = j.value("policy_checkpoint", std::string{});
  r.lr = j.value("lr", 0.0);
  r.seconds = j.value("seconds", 0.0);
  r.rolled_back = j.value("rolled_back", false);
  return r;
}

/// The state minus the parent policy, which is stored as a checkpoint.
inline nlohmann::json state_to_json(const EvolutionState& st) {
  std::ostringstream rng;
  rng << st.rng;
  nlohmann::json gens = nlohmann::json::array();
  for (const auto& g : st.generations) gens.push_back(record_to_json(g));
  return {{"format", "codesign-evolution-state/1"},
          {"baseline", record_to_json(st.baseline)},
          {"generations", gens},
          {"rng", rng.str()},
          {"stale", st.stale},
          {"stopped", st.stopped}};
}

inline EvolutionState state_from_json(const nlohmann::json& j, Learner parent, const AgentGraph& tmpl,
                                      const ConstraintSpec& spec) {
  if (j.value("format", std::string{}) != "codesign-evolution-state/1") {
    throw Error(ErrorCode::CheckpointFormat, "not an evolution state file");
  }
  const Gene tg = flatten_gene(tmpl);
  EvolutionState st;
  st.baseline = record_from_json(j.at("baseline"), tg, spec);
  for (const auto& g : j.at("generations")) st.generations.push_back(record_from_json(g, tg, spec));
  std::istringstream rng(j.at("rng").get<std::string>());
  rng >> st.rng;
  if (!rng) throw Error(ErrorCode::CheckpointFormat, "bad generator state");
  st.stale = j.value("stale", 0);
  st.stopped = j.value("stopped", false);
  st.parent = std::move(parent);
  return st;
}

}  // namespace codesign
