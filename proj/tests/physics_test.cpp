#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "codesign/morphology/description.hpp"
#include "codesign/morphology/generator.hpp"
#include "codesign/physics/observation.hpp"

using namespace codesign;

namespace {

const std::string kAgents = std::string(CODESIGN_SOURCE_DIR) + "/configs/agents/";

AgentGraph capsule(double length = 0.4, double radius = 0.05, double density = 1000.0,
                   Eigen::Vector3d dir = Eigen::Vector3d::UnitY()) {
  BodyPart p;
  p.id = "B0";
  p.length = length;
  p.radius = radius;
  p.density = density;
  p.init_dir = dir;
  return AgentGraph::create({p}, {}, "B0");
}

// Root capsule along y with one child hanging straight down from its centre.
AgentGraph pendulum(double length, double radius, double density, Eigen::Vector3d axis = Eigen::Vector3d::UnitX()) {
  BodyPart root;
  root.id = "B0";
  root.length = 0.2;
  root.radius = 0.02;
  root.density = 1000.0;
  BodyPart arm = root;
  arm.id = "B1";
  arm.length = length;
  arm.radius = radius;
  arm.density = density;
  arm.attach_pos = 0.5;
  arm.init_dir = -Eigen::Vector3d::UnitZ();
  Joint j;
  j.parent = "B0";
  j.child = "B1";
  j.axis = axis;
  j.range_lo = -3.0;
  j.range_hi = 3.0;
  j.max_effort = 10.0;
  return AgentGraph::create({root, arm}, {j}, "B0");
}

// Three-link chain with wide ranges, useful for conservation checks.
AgentGraph chain() {
  std::vector<BodyPart> parts;
  std::vector<Joint> joints;
  const Eigen::Vector3d dirs[] = {Eigen::Vector3d::UnitY(), Eigen::Vector3d(0, 0.6, -0.8),
                                  Eigen::Vector3d(0.6, 0, -0.8)};
  const Eigen::Vector3d axes[] = {Eigen::Vector3d::UnitX(), Eigen::Vector3d(0, 0.8, 0.6).normalized()};
  for (int i = 0; i < 3; ++i) {
    BodyPart p;
    p.id = "B" + std::to_string(i);
    p.length = 0.3 + 0.1 * i;
    p.radius = 0.04;
    p.density = 800.0 + 100.0 * i;
    p.attach_pos = i == 0 ? 0.0 : (i == 1 ? 0.8 : 1.0);
    p.init_dir = dirs[i];
    parts.push_back(p);
    if (i > 0) {
      Joint j;
      j.parent = "B" + std::to_string(i - 1);
      j.child = p.id;
      j.axis = axes[i - 1];
      j.range_lo = -1.0e3;  // never reached: the limit penalty would dissipate energy
      j.range_hi = 1.0e3;
      j.max_effort = 5.0;
      joints.push_back(j);
    }
  }
  return AgentGraph::create(parts, joints, "B0");
}

SimConfig vacuum() {
  SimConfig cfg;
  cfg.ground_contact = false;
  cfg.gravity.setZero();
  return cfg;
}

}  // namespace

TEST(CapsuleInertia, MatchesSlicedIntegration) {
  // Sum thin discs along the axis: mass, axial and transverse moments about the centre.
  for (auto [L, r] : {std::pair{0.4, 0.1}, std::pair{1.0, 0.05}, std::pair{0.1, 0.3}}) {
    const double rho = 750.0;
    const int slices = 400000;
    const double z0 = -L / 2 - r, dz = (L + 2 * r) / slices;
    double m = 0, Ia = 0, Ip = 0;
    for (int k = 0; k < slices; ++k) {
      const double z = z0 + (k + 0.5) * dz;
      double rad2 = r * r;
      if (z > L / 2) rad2 = r * r - (z - L / 2) * (z - L / 2);
      if (z < -L / 2) rad2 = r * r - (z + L / 2) * (z + L / 2);
      if (rad2 <= 0) continue;
      const double dm = rho * std::numbers::pi * rad2 * dz;
      m += dm;
      Ia += dm * rad2 / 2;
      Ip += dm * (rad2 / 4 + z * z);
    }
    const CapsuleInertia ci = capsule_inertia(L, r, rho);
    EXPECT_NEAR(ci.mass / m, 1.0, 1e-8);
    EXPECT_NEAR(ci.axial / Ia, 1.0, 1e-8);
    EXPECT_NEAR(ci.perp / Ip, 1.0, 1e-8);
    EXPECT_DOUBLE_EQ(ci.mass, capsule_mass(L, r, rho));
  }
}

TEST(Step, FreeFallMatchesAnalytic) {
  SimConfig cfg;
  cfg.ground_contact = false;
  Simulator sim(capsule(), cfg);
  std::mt19937_64 rng(0);
  SimState s = sim.init(0.0, rng);
  const double z0 = s.root_pos.z();
  for (int k = 0; k < 60; ++k) sim.step(s, Eigen::VectorXd(0));
  EXPECT_NEAR(s.t, 1.0, 1e-12);
  EXPECT_NEAR(z0 - s.root_pos.z(), 0.5 * 9.81, 1e-3);
  EXPECT_NEAR(s.root_lin_vel.z(), -9.81, 1e-9);
}

TEST(Step, SmallAnglePendulumPeriod) {
  for (double L : {0.3, 0.6, 1.0}) {
    SimConfig cfg;
    cfg.fixed_root = true;
    cfg.ground_contact = false;
    const double r = 0.03, rho = 1000.0;
    Simulator sim(pendulum(L, r, rho), cfg);
    const CapsuleInertia ci = capsule_inertia(L, r, rho);
    const double d = L / 2;
    const double expected = 2 * std::numbers::pi * std::sqrt((ci.perp + ci.mass * d * d) / (ci.mass * 9.81 * d));

    SimState s;
    s.q = Eigen::VectorXd::Constant(1, 0.02);
    s.qdot = Eigen::VectorXd::Zero(1);
    std::vector<double> crossings;
    double prev = s.q[0], prev_t = 0;
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
    while (crossings.size() < 5 && s.t < 30) {
      sim.step(s, zero);
      if ((prev > 0) != (s.q[0] > 0)) crossings.push_back(prev_t + (s.t - prev_t) * prev / (prev - s.q[0]));
      prev = s.q[0];
      prev_t = s.t;
    }
    ASSERT_EQ(crossings.size(), 5u);
    const double period = (crossings[4] - crossings[0]) / 2;
    EXPECT_NEAR(period / expected, 1.0, 0.02) << "L=" << L;
  }
}

TEST(Step, SingleHingeVelocityConstantWithoutForces) {
  SimConfig cfg = vacuum();
  cfg.fixed_root = true;
  Simulator sim(pendulum(0.5, 0.04, 900.0, Eigen::Vector3d(0.6, 0.8, 0)), cfg);
  SimState s;
  s.q = Eigen::VectorXd::Constant(1, 0.1);
  s.qdot = Eigen::VectorXd::Constant(1, 1.3);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
  for (int k = 0; k < 100; ++k) {
    const double before = s.qdot[0];
    sim.step(s, zero);
    EXPECT_LT(std::abs(s.qdot[0] - before), 1e-9);
  }
}

TEST(Step, FreeBodyMomentumConserved) {
  Simulator sim(capsule(0.5, 0.05, 1000.0, Eigen::Vector3d(0, 0.6, 0.8)), vacuum());
  SimState s;
  s.q.resize(0);
  s.qdot.resize(0);
  s.root_pos = {0.3, -0.2, 1.0};
  s.root_lin_vel = {0.4, -1.0, 0.25};
  s.root_ang_vel = 3.0 * Eigen::Vector3d(0, 0.6, 0.8);  // spin about the symmetry axis
  auto [p0, L0] = sim.momentum(s);
  for (int k = 0; k < 100; ++k) {
    auto [pa, La] = sim.momentum(s);
    sim.step(s, Eigen::VectorXd(0));
    auto [pb, Lb] = sim.momentum(s);
    EXPECT_LT((pb - pa).norm(), 1e-9);
    EXPECT_LT((Lb - La).norm(), 1e-9);
  }
  EXPECT_LT((sim.momentum(s).first - p0).norm(), 1e-9);
  EXPECT_NEAR(s.root_quat.norm(), 1.0, 1e-12);
}

TEST(Step, ArticulatedMomentumRateIsZero) {
  // d/dt of total momentum under the computed accelerations, by central differences.
  Simulator sim(chain(), vacuum());
  SimState s;
  s.q = Eigen::Vector2d(0.4, -0.7);
  s.qdot = Eigen::Vector2d(1.5, -2.0);
  s.root_quat = Eigen::Quaterniond(Eigen::AngleAxisd(0.3, Eigen::Vector3d(1, 2, 3).normalized()));
  s.root_lin_vel = {0.2, 0.1, -0.3};
  s.root_ang_vel = {0.5, -0.4, 0.9};
  const Eigen::VectorXd acc = sim.accelerations(s, Eigen::Vector2d(0.3, -0.2));
  auto shifted = [&](double e) {
    SimState o = s;
    o.root_pos += e * s.root_lin_vel;
    const Eigen::Vector3d rot = e * s.root_ang_vel;
    o.root_quat = Eigen::Quaterniond(Eigen::AngleAxisd(rot.norm(), rot.normalized())) * s.root_quat;
    o.q += e * s.qdot;
    o.root_lin_vel += e * acc.head<3>();
    o.root_ang_vel += e * acc.segment<3>(3);
    o.qdot += e * acc.tail(2);
    return sim.momentum(o);
  };
  const double e = 1e-6;
  auto [pp, Lp] = shifted(e);
  auto [pm, Lm] = shifted(-e);
  EXPECT_LT(((pp - pm) / (2 * e)).norm(), 1e-6);
  EXPECT_LT(((Lp - Lm) / (2 * e)).norm(), 1e-6);
}

TEST(Step, PowerBalance) {
  // dE/dt equals the power of the joint torques when nothing else acts.
  SimConfig cfg;
  cfg.ground_contact = false;
  Simulator sim(chain(), cfg);
  SimState s;
  s.q = Eigen::Vector2d(-0.2, 0.9);
  s.qdot = Eigen::Vector2d(0.7, 1.1);
  s.root_pos = {0, 0, 2};
  s.root_lin_vel = {0.3, -0.2, 0.1};
  s.root_ang_vel = {-0.6, 0.2, 0.4};
  const Eigen::Vector2d tau(0.8, -0.5);
  const Eigen::VectorXd acc = sim.accelerations(s, tau);
  auto energy_at = [&](double e) {
    SimState o = s;
    o.root_pos += e * s.root_lin_vel;
    const Eigen::Vector3d rot = e * s.root_ang_vel;
    o.root_quat = Eigen::Quaterniond(Eigen::AngleAxisd(rot.norm(), rot.normalized())) * s.root_quat;
    o.q += e * s.qdot;
    o.root_lin_vel += e * acc.head<3>();
    o.root_ang_vel += e * acc.segment<3>(3);
    o.qdot += e * acc.tail(2);
    return sim.energy(o);
  };
  const double e = 1e-6;
  const double dE = (energy_at(e) - energy_at(-e)) / (2 * e);
  EXPECT_NEAR(dE, tau.dot(s.qdot), 1e-6);
}

TEST(Step, EnergyDriftOverTenSeconds) {
  SimConfig cfg;
  cfg.ground_contact = false;
  cfg.fixed_root = true;
  Simulator sim(chain(), cfg);
  SimState s;
  s.q = Eigen::Vector2d(1.0, -0.5);
  s.qdot = Eigen::Vector2d::Zero();
  const double e0 = sim.energy(s);
  double max_ke = 0, max_drift = 0;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  for (int k = 0; k < 600; ++k) {
    sim.step(s, zero);
    const double e = sim.energy(s);
    max_drift = std::max(max_drift, std::abs(e - e0));
    SimState still = s;
    still.qdot.setZero();
    max_ke = std::max(max_ke, e - sim.energy(still));
  }
  ASSERT_GT(max_ke, 0.1);
  EXPECT_LT(max_drift / max_ke, 0.005);
}

TEST(Step, FrameConsistency) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    AgentGraph g = random_agent(GeneratorConfig{}, rng);
    Simulator sim(g);
    SimState s = sim.init(0.1, rng);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int k = 0; k < 20; ++k) {
      Eigen::VectorXd a(sim.joint_count());
      for (int j = 0; j < a.size(); ++j) a[j] = u(rng);
      sim.step_pd(s, a);
    }
    // Independent chain of quaternions over the graph itself.
    const auto& internal = sim.internal_poses();
    std::map<std::string, std::pair<Eigen::Quaterniond, Eigen::Vector3d>> world;
    world[g.root()] = {s.root_quat, s.root_pos};
    const auto order = g.dfs_joint_order();
    for (size_t k = 0; k < order.size(); ++k) {
      const Joint& j = g.joints()[order[k]];
      const BodyPart& parent = g.part(j.parent);
      const BodyPart& child = g.part(j.child);
      const double along = j.parent == g.root() ? child.attach_pos - 0.5 : child.attach_pos;
      auto [qp, pp] = world[j.parent];
      world[j.child] = {qp * Eigen::Quaterniond(Eigen::AngleAxisd(s.q[k], j.axis)),
                        pp + qp * (along * parent.length * parent.init_dir)};
    }
    for (size_t i = 0; i < g.dfs_order().size(); ++i) {
      const auto& [q, p] = world[g.parts()[g.dfs_order()[i]].id];
      EXPECT_LT((internal[i].p - p).norm(), 1e-9);
      EXPECT_LT((internal[i].R - q.toRotationMatrix()).norm(), 1e-9);
    }
  }
}

TEST(Step, DeterministicTrajectories) {
  AgentGraph g = load_agent(kAgents + "quadruped.json");
  auto run = [&] {
    Simulator sim(g);
    std::mt19937_64 rng(4);
    SimState s = sim.init(0.05, rng);
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    for (int k = 0; k < 120; ++k) {
      Eigen::VectorXd a(sim.joint_count());
      for (int j = 0; j < a.size(); ++j) a[j] = u(rng);
      sim.step_pd(s, a);
    }
    return s;
  };
  SimState a = run(), b = run();
  EXPECT_EQ(a.q, b.q);
  EXPECT_EQ(a.qdot, b.qdot);
  EXPECT_EQ(a.root_pos, b.root_pos);
  EXPECT_EQ(a.root_quat.coeffs(), b.root_quat.coeffs());
}

TEST(Step, QuadrupedStandsUnderPd) {
  AgentGraph g = load_agent(kAgents + "quadruped.json");
  Simulator sim(g);
  std::mt19937_64 rng(1);
  SimState s = sim.init(0.0, rng);
  const double h0 = s.root_pos.z();
  const Eigen::VectorXd hold = Eigen::VectorXd::Zero(sim.joint_count());
  for (int k = 0; k < 180; ++k) {
    sim.step_pd(s, hold);
    ASSERT_NEAR(s.root_quat.norm(), 1.0, 1e-9);
  }
  EXPECT_GT(s.root_pos.z(), 0.6 * h0);
  EXPECT_LT(s.root_lin_vel.norm(), 0.05);
  EXPECT_EQ(terminated(s, h0), TerminationReason::None);
}

TEST(Step, RejectsWrongCommandLength) {
  Simulator sim(chain(), vacuum());
  std::mt19937_64 rng(1);
  SimState s = sim.init(0.0, rng);
  try {
    sim.step(s, Eigen::VectorXd::Zero(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(Step, DivergenceIsReported) {
  Simulator sim(chain(), vacuum());
  std::mt19937_64 rng(1);
  SimState s = sim.init(0.0, rng);
  s.qdot[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    sim.step(s, Eigen::VectorXd::Zero(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NumericalDivergence);
  }
}

TEST(PdTorque, Examples) {
  EXPECT_EQ(pd_torque(0.3, 0.3, 0.0, 5.0, 2.0, 5.0), 0.0);
  EXPECT_NEAR(pd_torque(0.1, 0.0, 0.0, 5.0, 2.0, 5.0), 0.5, 1e-15);
  EXPECT_EQ(pd_torque(20.0, 0.0, 0.0, 5.0, 2.0, 5.0), 5.0);
  EXPECT_EQ(pd_torque(-20.0, 0.0, 0.0, 5.0, 2.0, 5.0), -5.0);
}

TEST(PdTorque, NeverExceedsEffort) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-100, 100), pos(0.01, 50);
  for (int k = 0; k < 100000; ++k) {
    const double e = pos(rng);
    EXPECT_LE(std::abs(pd_torque(u(rng), u(rng), u(rng), pos(rng), pos(rng), e)), e);
  }
}

TEST(InitSim, Randomization) {
  AgentGraph g = load_agent(kAgents + "twelve_part.json");
  Simulator sim(g);
  std::mt19937_64 r1(3), r2(99);
  SimState a = sim.init(0.0, r1), b = sim.init(0.0, r2);
  EXPECT_EQ(a.q, b.q);
  EXPECT_EQ(a.root_pos, b.root_pos);
  for (int seed = 0; seed < 1000; ++seed) {
    std::mt19937_64 rng(seed);
    SimState s = sim.init(0.05, rng);
    EXPECT_LE(s.q.cwiseAbs().maxCoeff(), 0.05);
    EXPECT_TRUE(s.qdot.isZero(0));
  }
}

TEST(InitSim, LowestPointAtClearance) {
  AgentGraph g = load_agent(kAgents + "ant_eleven_part.json");
  Simulator sim(g);
  std::mt19937_64 rng(3);
  SimState s = sim.init(0.1, rng);
  double lowest = 1e9;
  for (const auto& c : sim.capsules(s)) lowest = std::min({lowest, c.a.z() - c.radius, c.b.z() - c.radius});
  EXPECT_NEAR(lowest, sim.config().spawn_clearance, 1e-12);
  EXPECT_EQ(s.root_pos.head<2>(), Eigen::Vector2d::Zero());
}

TEST(Observe, InitialPoseAndDims) {
  AgentGraph g = load_agent(kAgents + "quadruped.json");
  Simulator sim(g);
  Observer obs(g, g);
  std::mt19937_64 rng(3);
  SimState s = sim.init(0.0, rng);
  Eigen::VectorXd o = obs.observe(s, sim);
  ASSERT_EQ(o.size(), obs.dims().total());
  const auto R = s.root_quat.toRotationMatrix();
  EXPECT_LT((Observer::up(R) - Eigen::Vector3d::UnitZ()).norm(), 1e-9);
  EXPECT_NEAR(Observer::heading(R).dot(Eigen::Vector3d::UnitY()), 1.0, 1e-9);
  EXPECT_EQ(o.tail<3>(), Eigen::Vector3d(0, 0, 1));
  const int parts = 5, joints = 4;
  EXPECT_EQ(obs.dims().morphology, 7 * parts + 8 * joints);
  EXPECT_EQ(obs.dims().perceptive, 5 + 7 * (parts - 1) + 3 * joints + 6);
  EXPECT_EQ(obs.dims().global, 7);
}

TEST(Observe, MorphologyBlockConstantAcrossEpisode) {
  AgentGraph g = load_agent(kAgents + "quadruped.json");
  Simulator sim(g);
  Observer obs(g, g);
  std::mt19937_64 rng(3);
  SimState s = sim.init(0.05, rng);
  const Eigen::VectorXd m0 = obs.observe(s, sim).head(obs.dims().morphology);
  EXPECT_TRUE(m0.allFinite());
  for (int k = 0; k < 30; ++k) {
    sim.step_pd(s, Eigen::VectorXd::Constant(sim.joint_count(), 0.5));
    EXPECT_EQ(obs.observe(s, sim).head(obs.dims().morphology), m0);
  }
}

TEST(Observe, MorphologyRelativeToTemplate) {
  AgentGraph g = load_agent(kAgents + "quadruped.json");
  Gene gene = flatten_gene(g);
  gene.values[0] *= 1.2;  // B0.length
  Observer obs(g, apply_gene(g, gene));
  EXPECT_NEAR(obs.morphology()[0], 1.0, 1e-12);
  EXPECT_EQ(Observer(g, g).morphology()[0], 0.0);
  EXPECT_THROW(Observer(g, load_agent(kAgents + "eight_part.json")), Error);
}

TEST(Observe, JointNormalisation) {
  AgentGraph g = load_agent(kAgents + "quadruped.json");
  Observer obs(g, g);
  EXPECT_EQ(obs.normalized_joint(0, -0.8), -1.0);
  EXPECT_EQ(obs.normalized_joint(0, 0.8), 1.0);
  EXPECT_EQ(obs.normalized_joint(0, 0.0), 0.0);
  EXPECT_EQ(obs.normalized_joint(0, 5.0), 1.0);
}

TEST(Terminated, Conditions) {
  SimState s;
  s.q = s.qdot = Eigen::VectorXd::Zero(0);
  s.root_pos = {0, 0, 0.5};
  EXPECT_EQ(terminated(s, 0.5), TerminationReason::None);
  SimState flipped = s;
  flipped.root_quat = Eigen::Quaterniond(Eigen::AngleAxisd(std::numbers::pi, Eigen::Vector3d::UnitY()));
  EXPECT_EQ(terminated(flipped, 0.5), TerminationReason::Flipped);
  SimState back = s;
  back.root_quat = Eigen::Quaterniond(Eigen::AngleAxisd(std::numbers::pi, Eigen::Vector3d::UnitZ()));
  EXPECT_EQ(terminated(back, 0.5), TerminationReason::WrongDirection);
  SimState away = s;
  away.root_pos.y() = -1.5;
  EXPECT_EQ(terminated(away, 0.5), TerminationReason::LeftScene);
  away.root_pos = {3.5, 2, 0.5};
  EXPECT_EQ(terminated(away, 0.5), TerminationReason::LeftScene);
  SimState fallen = s;
  fallen.root_pos.z() = 0.05;
  EXPECT_EQ(terminated(fallen, 0.5), TerminationReason::Fell);
}

TEST(Step, LightAgentStaysFiniteUnderRandomTargets) {
  // Appendix-scale agent: tens of grams per capsule.
  AgentGraph g = load_agent(kAgents + "twelve_part.json");
  Simulator sim(g);
  std::mt19937_64 rng(2);
  SimState s = sim.init(0.05, rng);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 1500; ++k) {
    Eigen::VectorXd a(sim.joint_count());
    for (int j = 0; j < a.size(); ++j) a[j] = u(rng);
    ASSERT_NO_THROW(sim.step_pd(s, a)) << "step " << k;
  }
  EXPECT_GT(s.root_pos.z(), 0.0);
  EXPECT_LT(s.root_lin_vel.norm(), 10.0);
}
