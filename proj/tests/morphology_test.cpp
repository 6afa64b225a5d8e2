#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "codesign/morphology/constraints.hpp"
#include "codesign/morphology/generator.hpp"
#include "codesign/morphology/mjcf.hpp"

using namespace codesign;

namespace {

const std::string kAgents = std::string(CODESIGN_SOURCE_DIR) + "/configs/agents/";

AgentGraph fixture(const std::string& name) { return load_agent(kAgents + name + ".json"); }

const char* kSingleCapsule = R"({
  "root": "B0",
  "parts": [{"id": "B0", "class": "B", "length": 0.4, "radius": 0.1, "density": 5.0,
             "init_dir": [0, 1, 0]}],
  "joints": []
})";

std::string two_part(const std::string& joints, double length = 0.4,
                     const std::string& dir = "[0, 1, 0]") {
  return R"({"root": "B0", "parts": [
    {"id": "B0", "length": 0.4, "radius": 0.1, "density": 5, "init_dir": [0, 1, 0]},
    {"id": "B1", "length": )" +
         std::to_string(length) + R"(, "radius": 0.1, "density": 5, "attach_pos": 1, "init_dir": )" +
         dir + R"(}], "joints": )" + joints + "}";
}

const char* kJointB0B1 =
    R"([{"parent": "B0", "child": "B1", "axis": [1, 0, 0], "range": [-1, 1], "max_effort": 5}])";

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::Io;
}

}  // namespace

TEST(BuildGraph, SingleCapsuleIsSmallestTree) {
  AgentGraph g = build_graph(kSingleCapsule);
  EXPECT_EQ(g.parts().size(), 1u);
  EXPECT_EQ(g.joints().size(), 0u);
  EXPECT_EQ(g.root(), "B0");
}

TEST(BuildGraph, TwelvePartAgent) {
  AgentGraph g = fixture("twelve_part");
  EXPECT_EQ(g.parts().size(), 12u);
  EXPECT_EQ(g.joints().size(), 11u);
}

TEST(BuildGraph, TreePropertyOnFixtures) {
  for (const char* name : {"twelve_part", "eight_part", "ant_eleven_part", "quadruped"}) {
    AgentGraph g = fixture(name);
    EXPECT_EQ(g.joints().size() + 1, g.parts().size()) << name;
    EXPECT_EQ(g.dfs_order().size(), g.parts().size()) << name;
    for (size_t i = 0; i < g.parts().size(); ++i) {
      int cur = static_cast<int>(i), hops = 0;
      while (cur != g.root_index() && hops <= static_cast<int>(g.parts().size())) {
        cur = g.part_index(g.joints()[g.parent_joint(cur)].parent);
        ++hops;
      }
      EXPECT_EQ(cur, g.root_index());
    }
  }
}

TEST(BuildGraph, ChildIsAncestorIsCycle) {
  const std::string joints = R"([
    {"parent": "B0", "child": "B1", "axis": [1, 0, 0], "range": [-1, 1], "max_effort": 5},
    {"parent": "B1", "child": "B0", "axis": [1, 0, 0], "range": [-1, 1], "max_effort": 5}])";
  EXPECT_EQ(code_of([&] { build_graph(two_part(joints)); }), ErrorCode::CycleDetected);
}

TEST(BuildGraph, CycleAwayFromRoot) {
  const char* doc = R"({"root": "B0", "parts": [
    {"id": "B0", "length": 0.4, "radius": 0.1, "density": 5, "init_dir": [0, 1, 0]},
    {"id": "B1", "length": 0.4, "radius": 0.1, "density": 5, "init_dir": [0, 1, 0]},
    {"id": "B2", "length": 0.4, "radius": 0.1, "density": 5, "init_dir": [0, 1, 0]}],
    "joints": [
    {"parent": "B1", "child": "B2", "axis": [1, 0, 0], "range": [-1, 1], "max_effort": 5},
    {"parent": "B2", "child": "B1", "axis": [1, 0, 0], "range": [-1, 1], "max_effort": 5}]})";
  EXPECT_EQ(code_of([&] { build_graph(doc); }), ErrorCode::CycleDetected);
}

TEST(BuildGraph, Errors) {
  EXPECT_EQ(code_of([&] { build_graph(two_part("[]")); }), ErrorCode::DisconnectedPart);
  EXPECT_EQ(code_of([&] { build_graph(two_part(kJointB0B1, 0.0)); }), ErrorCode::NonPositiveDimension);
  EXPECT_EQ(code_of([&] { build_graph(two_part(kJointB0B1, 0.4, "[0, 1, 1]")); }),
            ErrorCode::BadUnitVector);
  EXPECT_EQ(code_of([&] { build_graph("{ not json"); }), ErrorCode::ParseError);
  const std::string unknown =
      R"([{"parent": "B0", "child": "B7", "axis": [1, 0, 0], "range": [-1, 1], "max_effort": 5}])";
  EXPECT_EQ(code_of([&] { build_graph(two_part(unknown)); }), ErrorCode::UnknownId);
  const std::string bad_axis =
      R"([{"parent": "B0", "child": "B1", "axis": [1, 1, 0], "range": [-1, 1], "max_effort": 5}])";
  EXPECT_EQ(code_of([&] { build_graph(two_part(bad_axis)); }), ErrorCode::BadUnitVector);
  const std::string bad_range =
      R"([{"parent": "B0", "child": "B1", "axis": [1, 0, 0], "range": [1, -1], "max_effort": 5}])";
  EXPECT_EQ(code_of([&] { build_graph(two_part(bad_range)); }), ErrorCode::InvalidAttribute);
}

TEST(BuildGraph, DescriptionRoundTrip) {
  AgentGraph g = fixture("ant_eleven_part");
  EXPECT_EQ(build_graph(write_description(g)), g);
}

TEST(CapsuleMass, BaselineBodyZero) {
  // density * (pi r^2 l + 4/3 pi r^3) evaluated for (0.40, 0.10, 5.00).
  EXPECT_NEAR(capsule_mass(0.40, 0.10, 5.00), 0.08377580409572782, 1e-15);
  EXPECT_NEAR(capsule_mass(0.40, 0.10, 5.00), 0.08378, 5e-6);
}

TEST(CapsuleMass, RejectsNonPositive) {
  EXPECT_EQ(code_of([] { capsule_mass(0.4, 0.1, 0.0); }), ErrorCode::NonPositiveDimension);
  EXPECT_EQ(code_of([] { capsule_mass(-0.4, 0.1, 1.0); }), ErrorCode::NonPositiveDimension);
}

TEST(CapsuleMass, LinearInDensityAndMonotone) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 2.0);
  for (int i = 0; i < 1000; ++i) {
    const double l = u(rng), r = u(rng), d = u(rng);
    const double m = capsule_mass(l, r, d);
    EXPECT_EQ(capsule_mass(l, r, 2.0 * d), 2.0 * m);
    EXPECT_GT(capsule_mass(l * 1.01, r, d), m);
    EXPECT_GT(capsule_mass(l, r * 1.01, d), m);
    EXPECT_GT(capsule_mass(l, r, d * 1.01), m);
  }
}

TEST(Gene, RoundTripIsBitExact) {
  for (const char* name : {"twelve_part", "eight_part", "ant_eleven_part", "quadruped"}) {
    AgentGraph g = fixture(name);
    Gene gene = flatten_gene(g);
    EXPECT_EQ(gene.values.size(), gene.layout.size());
    EXPECT_EQ(apply_gene(g, gene), g) << name;
    EXPECT_EQ(flatten_gene(apply_gene(g, gene)), gene) << name;
  }
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    AgentGraph g = random_agent(GeneratorConfig{}, rng);
    EXPECT_EQ(apply_gene(g, flatten_gene(g)), g);
  }
}

TEST(Gene, CanonicalOrderingParentsFirst) {
  AgentGraph g = fixture("quadruped");
  auto layout = gene_layout(g);
  ASSERT_GE(layout.size(), 3u);
  EXPECT_EQ(layout[0].path(), "B0.length");
  EXPECT_EQ(layout[1].path(), "B0.radius");
  EXPECT_EQ(layout[2].path(), "B0.density");
  EXPECT_EQ(layout[3].path(), "B0.init_dir.x");
  // The first child joint's PD attributes come straight after the root part.
  EXPECT_EQ(layout[6].path(), "RL0_0.stiffness");
  EXPECT_EQ(layout[9].path(), "RL0_0.length");
}

TEST(Gene, SingleAttributeChange) {
  AgentGraph g = fixture("twelve_part");
  Gene gene = flatten_gene(g);
  ASSERT_EQ(gene.layout[0].path(), "B0.length");
  EXPECT_EQ(gene.values[0], 0.40);
  gene.values[0] = 0.42;
  AgentGraph changed = apply_gene(g, gene);
  EXPECT_EQ(changed.parts()[0].length, 0.42);
  std::vector<BodyPart> parts = changed.parts();
  parts[0].length = 0.40;
  EXPECT_EQ(AgentGraph::create(parts, changed.joints(), changed.root()), g);
}

TEST(Gene, LayoutMismatch) {
  AgentGraph g = fixture("twelve_part");
  Gene gene = flatten_gene(g);
  gene.values.pop_back();
  EXPECT_EQ(code_of([&] { apply_gene(g, gene); }), ErrorCode::LayoutMismatch);
  Gene other = flatten_gene(fixture("quadruped"));
  EXPECT_EQ(code_of([&] { apply_gene(g, other); }), ErrorCode::LayoutMismatch);
}

TEST(Gene, DirectionsRenormalisedOnApply) {
  AgentGraph g = fixture("quadruped");
  Gene gene = flatten_gene(g);
  for (size_t i = 0; i < gene.size(); ++i) {
    if (gene.layout[i].attribute == Attribute::InitDirX) gene.values[i] *= 1.1;
  }
  AgentGraph changed = apply_gene(g, gene);
  for (const auto& p : changed.parts()) EXPECT_NEAR(p.init_dir.norm(), 1.0, 1e-12);
}

TEST(RandomAgent, SingleCapsule) {
  GeneratorConfig cfg;
  cfg.min_body_parts = cfg.max_body_parts = 1;
  cfg.min_leg_pairs = cfg.max_leg_pairs = 0;
  std::mt19937_64 rng(1);
  AgentGraph g = random_agent(cfg, rng);
  EXPECT_EQ(g.parts().size(), 1u);
  EXPECT_EQ(g.joints().size(), 0u);
}

TEST(RandomAgent, CountsAndMirroring) {
  GeneratorConfig cfg;
  cfg.min_body_parts = cfg.max_body_parts = 4;
  cfg.min_leg_pairs = cfg.max_leg_pairs = 2;
  for (int segments : {1, 2, 3}) {
    cfg.segments_per_leg = segments;
    std::mt19937_64 rng(100 + segments);
    AgentGraph g = random_agent(cfg, rng);
    EXPECT_EQ(g.parts().size(), static_cast<size_t>(4 + 2 * 2 * segments));
    EXPECT_EQ(g.joints().size(), g.parts().size() - 1);
    for (const auto& p : g.parts()) {
      if (p.part_class != PartClass::RightLeg) continue;
      const BodyPart& l = g.part("LL" + p.id.substr(2));
      EXPECT_EQ(l.init_dir, Eigen::Vector3d(-p.init_dir.x(), p.init_dir.y(), p.init_dir.z()));
      EXPECT_EQ(l.length, p.length);
      const Joint& jr = g.joints()[g.parent_joint(g.part_index(p.id))];
      const Joint& jl = g.joints()[g.parent_joint(g.part_index(l.id))];
      EXPECT_EQ(jl.axis, Eigen::Vector3d(jr.axis.x(), -jr.axis.y(), -jr.axis.z()));
    }
    // Passes the same validation as a hand-written description.
    EXPECT_EQ(build_graph(write_description(g)), g);
  }
}

TEST(RandomAgent, DeterministicForSeed) {
  std::mt19937_64 a(42), b(42);
  EXPECT_EQ(random_agent(GeneratorConfig{}, a), random_agent(GeneratorConfig{}, b));
}

TEST(RandomAgent, EmptyConfig) {
  GeneratorConfig cfg;
  cfg.max_body_parts = 0;
  std::mt19937_64 rng(1);
  EXPECT_EQ(code_of([&] { random_agent(cfg, rng); }), ErrorCode::ConfigEmpty);
  GeneratorConfig cfg2;
  cfg2.leg_length = {0.5, 0.4};
  EXPECT_EQ(code_of([&] { random_agent(cfg2, rng); }), ErrorCode::ConfigEmpty);
}

TEST(SampleVariants, ZeroGlobalChangeGivesTemplate) {
  AgentGraph g = fixture("twelve_part");
  ConstraintSpec spec = resolve_constraints(g, 0.0);
  std::mt19937_64 rng(5);
  for (const Gene& gene : sample_variants(g, spec, 10, rng)) EXPECT_EQ(gene, flatten_gene(g));
}

TEST(SampleVariants, PopulationSize) {
  AgentGraph g = fixture("twelve_part");
  ConstraintSpec spec = resolve_constraints(g, 0.2);
  std::mt19937_64 rng(5);
  EXPECT_EQ(sample_variants(g, spec, 150, rng).size(), 150u);
  EXPECT_EQ(code_of([&] { sample_variants(g, spec, 0, rng); }), ErrorCode::ConfigEmpty);
}

TEST(SampleVariants, UniformCoverageOfBand) {
  AgentGraph g = fixture("quadruped");
  ConstraintSpec spec = resolve_constraints(g, 0.2);
  std::mt19937_64 rng(9);
  const double v = flatten_gene(g).values[0];
  auto genes = sample_variants(g, spec, 10000, rng);
  double lo = 1e300, hi = -1e300;
  for (const auto& gene : genes) {
    lo = std::min(lo, gene.values[0]);
    hi = std::max(hi, gene.values[0]);
  }
  EXPECT_GE(lo, 0.8 * v);
  EXPECT_LE(hi, 1.2 * v);
  EXPECT_GE((hi - lo) / (0.4 * v), 0.95);
}

TEST(SampleVariants, OutputAlwaysValid) {
  AgentGraph g = fixture("quadruped");
  ConstraintRules rules = load_constraint_rules(std::string(CODESIGN_SOURCE_DIR) +
                                                "/configs/constraints/quadruped_fixed_torso.json");
  ConstraintSpec spec = resolve_constraints(g, rules);
  std::mt19937_64 rng(13);
  for (const Gene& gene : sample_variants(g, spec, 500, rng)) {
    EXPECT_TRUE(validate_constraints(gene, spec).empty());
    EXPECT_NO_THROW(apply_gene(g, gene));
  }
}

TEST(Constraints, ResolveRules) {
  AgentGraph g = fixture("quadruped");
  ConstraintRules rules;
  rules.global_change = 0.2;
  rules.mirror_legs = true;
  rules.entries.push_back({"B0.*", std::nullopt, std::nullopt, true, ""});
  rules.entries.push_back({"*.stiffness", std::nullopt, std::nullopt, false, "kp"});
  rules.entries.push_back({"RL0_0.length", 0.40, 0.50, false, ""});
  ConstraintSpec spec = resolve_constraints(g, rules);
  for (size_t i = 0; i < spec.size(); ++i) {
    if (spec.layout[i].owner == "B0") {
      EXPECT_TRUE(spec.fixed[i]);
      EXPECT_EQ(spec.intervals[i].lo, spec.intervals[i].hi);
    }
    if (spec.layout[i].path() == "RL0_0.length") {
      EXPECT_EQ(spec.intervals[i].lo, 0.40);
      EXPECT_EQ(spec.intervals[i].hi, 0.50);
    }
  }
  for (const auto& members : spec.groups) {
    for (int m : members) EXPECT_EQ(spec.intervals[m], spec.intervals[members[0]]);
  }
}

TEST(Constraints, LinkedGroupsMustStartEqual) {
  AgentGraph g = fixture("eight_part");
  ConstraintRules rules;
  rules.entries.push_back({"?L0_0.length", std::nullopt, std::nullopt, false, "legs"});
  EXPECT_EQ(code_of([&] { resolve_constraints(g, rules); }), ErrorCode::InvalidAttribute);
}

TEST(ValidateConstraints, TemplateIsValid) {
  AgentGraph g = fixture("twelve_part");
  ConstraintSpec spec = resolve_constraints(g, 0.2);
  EXPECT_TRUE(validate_constraints(flatten_gene(g), spec).empty());
}

TEST(ValidateConstraints, FixedPerturbationIsNamed) {
  AgentGraph g = fixture("quadruped");
  ConstraintRules rules;
  rules.entries.push_back({"B0.length", std::nullopt, std::nullopt, true, ""});
  ConstraintSpec spec = resolve_constraints(g, rules);
  Gene gene = flatten_gene(g);
  gene.values[0] += 1e-6;
  auto v = validate_constraints(gene, spec);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, ViolationKind::FixedModified);
  EXPECT_EQ(v[0].path, "B0.length");
}

TEST(ValidateConstraints, LinkedUnequal) {
  AgentGraph g = fixture("twelve_part");
  ConstraintRules rules;
  rules.mirror_legs = true;
  ConstraintSpec spec = resolve_constraints(g, rules);
  Gene gene = flatten_gene(g);
  for (size_t i = 0; i < gene.size(); ++i) {
    if (gene.layout[i].path() == "RL0_0.length") gene.values[i] = 0.40;
    if (gene.layout[i].path() == "LL0_0.length") gene.values[i] = 0.41;
  }
  auto v = validate_constraints(gene, spec);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, ViolationKind::LinkedUnequal);
}

TEST(ValidateConstraints, OutOfRange) {
  AgentGraph g = fixture("quadruped");
  ConstraintSpec spec = resolve_constraints(g, 0.1);
  Gene gene = flatten_gene(g);
  gene.values[0] *= 1.5;
  auto v = validate_constraints(gene, spec);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, ViolationKind::OutOfRange);
  EXPECT_EQ(v[0].index, 0);
}

namespace {
int count(const std::string& text, const std::string& needle) {
  int n = 0;
  for (size_t pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}
}  // namespace

TEST(ExportMjcf, SingleCapsule) {
  std::string xml = export_mjcf(build_graph(kSingleCapsule));
  EXPECT_EQ(count(xml, "<geom "), 1);
  EXPECT_EQ(count(xml, "type=\"hinge\""), 0);
}

TEST(ExportMjcf, EightPartAgent) {
  std::string xml = export_mjcf(fixture("eight_part"));
  EXPECT_EQ(count(xml, "<geom "), 8);
  EXPECT_EQ(count(xml, "type=\"hinge\""), 7);
  EXPECT_EQ(count(xml, "<position "), 7);
}

TEST(ExportMjcf, ParseReproducesGraphAndTextIsStable) {
  std::mt19937_64 rng(21);
  std::vector<AgentGraph> agents = {fixture("twelve_part"), fixture("eight_part"),
                                    fixture("ant_eleven_part"), fixture("quadruped")};
  for (int i = 0; i < 20; ++i) agents.push_back(random_agent(GeneratorConfig{}, rng));
  for (const auto& g : agents) {
    const std::string xml = export_mjcf(g);
    AgentGraph parsed = parse_mjcf(xml);
    EXPECT_EQ(parsed, g.canonical());
    EXPECT_EQ(export_mjcf(parsed), xml);
  }
}

TEST(ExportMjcf, FromToFollowsAttachment) {
  AgentGraph g = fixture("quadruped");
  std::string xml = export_mjcf(g);
  // Root capsule is centred on its body frame.
  EXPECT_NE(xml.find("fromto=\"0 -0.3 0 0 0.3 0\""), std::string::npos) << xml;
  // Front legs sit 0.4 of the torso length ahead of its centre.
  EXPECT_NE(xml.find("<body name=\"RL0_0\" pos=\"0 0.24"), std::string::npos) << xml;
}

TEST(ExportMjcf, RejectsMalformed) {
  EXPECT_EQ(code_of([] { parse_mjcf("<mujoco><worldbody></mujoco>"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_mjcf("<robot/>"); }), ErrorCode::ParseError);
}
