#include "morphshell/mesh_io.hpp"
#include "morphshell/solver.hpp"
#include "morphshell/verification.hpp"
#include "test_support.hpp"

#include <Eigen/LU>
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace morphshell;
using namespace morphshell::testing;

namespace {

// Right triangle with one free DOF, node 1's x coordinate. Edge (0,1) has
// strain x - 1 and edge (1,2) strain sqrt(x^2 + 1)/sqrt(2) - 1.
struct SingleSpring {
  Mesh mesh = build_mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}}, {});
  EnergyParams params = EnergyParams::with_default_beta(bilayer_material(1.0), 1.0);
  std::vector<int> pinned{0, 1, 2, 4, 5, 6, 7, 8};

  double ks() const { return params.material.single.stretch; }

  double newton_update(double x) const {
    const double r = std::sqrt(x * x + 1.0);
    const double f1 = x - 1.0;
    const double f2 = r / std::sqrt(2.0) - 1.0;
    const double d2 = x / (std::sqrt(2.0) * r);
    const double dd2 = 1.0 / (std::sqrt(2.0) * r * r * r);
    const double g = ks() * (f1 + f2 * d2);
    const double h = ks() * (1.0 + d2 * d2 + f2 * dd2);
    return x - g / h;
  }
};

EnergyParams strip_params(double l0, double y_scale = 1.0) {
  MaterialConfig mc;
  mc.layer1 = LayerSpec{1.0 * y_scale, 0.3};
  mc.layer2 = LayerSpec{3.0 * y_scale, 0.7};
  mc.l0 = l0;
  return EnergyParams::with_default_beta(assemble_material(mc), l0);
}

struct StripProblem {
  Mesh mesh = load_mesh(test_data_dir() / "small_strip.mesh");
  EnergyParams params = strip_params(mesh.mean_edge_length());
  ThermalField distances = thermal_field(mesh, -1.0);
  StimulusSchedule schedule;
  SolverConfig config;

  StripProblem() {
    schedule.target = -0.2;
    schedule.initial_step = 0.05;
    schedule.max_step = 0.1;
    config.tolerance = 1e-6;
  }
};

}  // namespace

TEST(Newton, SingleSpringFollowsAnalyticIterates) {
  const SingleSpring s;
  DofVector x = DofVector::rest(s.mesh);
  x.set_node(1, Vec3(1.3, 0, 0));
  const ThermalField f = ThermalField::zero(s.mesh.num_edges());
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(9);
  SolverConfig cfg;
  double expected = 1.3;
  std::vector<double> errors;
  for (int it = 0; it < 5; ++it) {
    const NewtonResult r = newton_step(s.mesh, x, s.params, f, zero, s.pinned, cfg);
    ASSERT_TRUE(r.ok) << r.failure;
    EXPECT_EQ(r.line_search, 1.0);
    EXPECT_EQ(r.regularization, 0.0);
    expected = s.newton_update(expected);
    EXPECT_NEAR(r.x.node(1).x(), expected, 1e-13);
    for (int d : s.pinned) EXPECT_EQ(r.x.values()[d], x.values()[d]);
    x = r.x;
    errors.push_back(std::abs(x.node(1).x() - 1.0));
  }
  EXPECT_LT(errors.back(), 1e-14);
  // Quadratic convergence: e_{k+1} <= C e_k^2.
  for (std::size_t k = 0; k + 1 < errors.size() && errors[k + 1] > 1e-15; ++k) {
    EXPECT_LT(errors[k + 1], 2.0 * errors[k] * errors[k]);
  }
}

TEST(Newton, SingleSpringConvergesWithinFiveIterations) {
  const SingleSpring s;
  DofVector x = DofVector::rest(s.mesh);
  x.set_node(1, Vec3(1.3, 0, 0));
  SolverConfig cfg;
  cfg.tolerance = 1e-12;
  const EquilibriumResult r = minimize(s.mesh, x, s.params, ThermalField::zero(3),
                                       Eigen::VectorXd::Zero(9), s.pinned, cfg, 1e-12 * s.ks());
  ASSERT_TRUE(r.converged) << r.failure;
  EXPECT_LE(r.iterations, 5);
  EXPECT_NEAR(r.x.node(1).x(), 1.0, 1e-14);
}

TEST(Newton, RestStateGivesZeroCorrection) {
  const Mesh m = load_mesh(pattern_path('c'));
  const EnergyParams p = strip_params(m.mean_edge_length());
  const DofVector x = DofVector::rest(m);
  SolverConfig cfg;
  const auto pinned = pinned_dofs(m, cfg);
  const NewtonResult r = newton_step(m, x, p, ThermalField::zero(m.num_edges()),
                                     Eigen::VectorXd::Zero(m.num_dofs()), pinned, cfg);
  ASSERT_TRUE(r.ok);
  EXPECT_EQ(r.relative_step, 0.0);
  EXPECT_EQ(r.max_force, 0.0);
  EXPECT_EQ((r.x.values() - x.values()).norm(), 0.0);
}

TEST(Newton, QuadraticObjectiveSolvedInOneStep) {
  // Inertia with a vanishing elastic part: the objective is quadratic, so a
  // single Newton step lands on x_hat + dt^2 F / m.
  const Mesh m = equilateral_strip(5, 4, 1.0, std::vector<int>{0, 1});
  const EnergyParams p = strip_params(1.0, 1e-14);
  const DofVector x = DofVector::rest(m);
  const Eigen::VectorXd mass = lumped_mass(m, 1.0, 1.0);
  const Eigen::VectorXd force = transverse_load(m, 1e-3);
  SolverConfig cfg;
  cfg.mode = SolverMode::Dynamic;
  cfg.time_step = 0.5;
  Inertia inertia{mass, x.values(), cfg.time_step};
  const NewtonResult r = newton_step(m, x, p, ThermalField::zero(m.num_edges()), force, {}, cfg, &inertia);
  ASSERT_TRUE(r.ok);
  EXPECT_EQ(r.line_search, 1.0);
  const Eigen::VectorXd expected = cfg.time_step * cfg.time_step * force.cwiseQuotient(mass);
  EXPECT_LT((r.x.values() - x.values() - expected).norm(), 1e-10 * expected.norm());
}

TEST(Dynamic, RestStaysAtRest) {
  const Mesh m = equilateral_strip(5, 4, 1.0, std::vector<int>{0, 1});
  const EnergyParams p = strip_params(1.0);
  SolverConfig cfg;
  cfg.mode = SolverMode::Dynamic;
  const DofVector x = DofVector::rest(m);
  const DynamicResult d = dynamic_step(m, x, Eigen::VectorXd::Zero(x.size()), lumped_mass(m, 1.0, 1.0), p,
                                       ThermalField::zero(m.num_edges()), Eigen::VectorXd::Zero(x.size()),
                                       {}, cfg);
  ASSERT_TRUE(d.solve.converged);
  EXPECT_EQ((d.x.values() - x.values()).norm(), 0.0);
  EXPECT_EQ(d.velocity.norm(), 0.0);
}

TEST(Dynamic, FreeFlightUnderDeadLoad) {
  const Mesh m = equilateral_strip(5, 4, 1.0, std::vector<int>{0, 1});
  const EnergyParams p = strip_params(1.0, 1e-14);
  SolverConfig cfg;
  cfg.mode = SolverMode::Dynamic;
  cfg.time_step = 0.1;
  cfg.force_tolerance = 1e-14;
  const DofVector x = DofVector::rest(m);
  const Eigen::VectorXd mass = lumped_mass(m, 2.0, 0.5);
  const Eigen::VectorXd force = transverse_load(m, 1e-2);
  const DynamicResult d = dynamic_step(m, x, Eigen::VectorXd::Zero(x.size()), mass, p,
                                       ThermalField::zero(m.num_edges()), force, {}, cfg);
  ASSERT_TRUE(d.solve.converged) << d.solve.failure;
  const Eigen::VectorXd dx = d.x.values() - x.values();
  const Eigen::VectorXd expected = cfg.time_step * cfg.time_step * force.cwiseQuotient(mass);
  EXPECT_LT((dx - expected).norm(), 1e-9 * expected.norm());
  EXPECT_LT((d.velocity - expected / cfg.time_step).norm(), 1e-9 * expected.norm() / cfg.time_step);
}

TEST(Dynamic, SettlesOnStaticEquilibrium) {
  StripProblem sp;
  const SolverState st = solve_equilibrium(sp.mesh, sp.params, sp.distances, sp.schedule, sp.config);
  ASSERT_TRUE(st.converged) << st.message;
  SolverConfig dyn = sp.config;
  dyn.mode = SolverMode::Dynamic;
  dyn.time_step = 100.0;
  const SolverState sd = solve_equilibrium(sp.mesh, sp.params, sp.distances, sp.schedule, dyn);
  ASSERT_TRUE(sd.converged) << sd.message;
  const double l0 = sp.mesh.mean_edge_length();
  double worst = 0.0;
  for (int i = 0; i < sp.mesh.num_nodes(); ++i) {
    worst = std::max(worst, (st.x.node(i) - sd.x.node(i)).norm());
  }
  EXPECT_LT(worst, 1e-3 * l0);
}

TEST(Solver, ThreeTwoOneRemovesRigidModes) {
  for (char p : {'a', 'b', 'c'}) {
    const Mesh m = load_mesh(pattern_path(p));
    const auto dofs = three_two_one_dofs(m);
    ASSERT_EQ(dofs.size(), 6u);
    Eigen::Matrix<double, 6, 6> restricted;
    for (int a = 0; a < 6; ++a) {
      for (int r = 0; r < 6; ++r) {
        const int node = dofs[r] / 3, axis = dofs[r] % 3;
        Vec3 v = Vec3::Zero();
        if (a < 3) {
          v[a] = 1.0;
        } else {
          v = Vec3::Unit(a - 3).cross(m.node(node));
        }
        restricted(r, a) = v[axis];
      }
    }
    const Eigen::FullPivLU<Eigen::Matrix<double, 6, 6>> lu(restricted);
    EXPECT_EQ(lu.rank(), 6) << p;
  }
}

TEST(Solver, PinnedDofsValidation) {
  const Mesh m = two_triangle_mesh();
  SolverConfig cfg;
  cfg.pinned_dofs = {0, 100};
  EXPECT_THROW(pinned_dofs(m, cfg), InputError);
  cfg.pinned_dofs = {1, 1, 2};
  cfg.constraints = ConstraintScheme::Explicit;
  EXPECT_THROW(cfg.validate(), InputError);
  cfg.pinned_dofs = {0, 1, 2, 4, 5, 8};
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(pinned_dofs(m, cfg), (std::vector<int>{0, 1, 2, 4, 5, 8}));
}

TEST(Solver, ConfigValidation) {
  SolverConfig cfg;
  cfg.tolerance = 0.0;
  EXPECT_THROW(cfg.validate(), InputError);
  cfg = {};
  cfg.force_tolerance = -1.0;
  EXPECT_THROW(cfg.validate(), InputError);
  cfg = {};
  cfg.mode = SolverMode::Dynamic;
  cfg.time_step = 0.0;
  EXPECT_THROW(cfg.validate(), InputError);
  cfg = {};
  cfg.armijo = 1.5;
  EXPECT_THROW(cfg.validate(), InputError);
}

TEST(Solver, LumpedMassAndLoad) {
  const Mesh m = equilateral_strip(4, 3, 2.0);
  const Eigen::VectorXd mass = lumped_mass(m, 1.5, 0.4);
  double area = 0.0;
  for (const Triangle& t : m.triangles()) {
    area += 0.5 * (m.node(t[1]) - m.node(t[0])).cross(m.node(t[2]) - m.node(t[0])).norm();
  }
  EXPECT_NEAR(mass.sum() / 3.0, 1.5 * 0.4 * area, 1e-12);
  const Eigen::VectorXd f = transverse_load(m, 0.25);
  for (int i = 0; i < m.num_nodes(); ++i) {
    EXPECT_EQ(f[3 * i], 0.0);
    EXPECT_EQ(f[3 * i + 2], 0.25);
  }
}

TEST(Solver, DefaultForceTolerance) {
  const EnergyParams p = strip_params(2.0);
  const double ks = std::max(p.material.single.stretch, p.material.bilayer.stretch);
  EXPECT_DOUBLE_EQ(default_force_tolerance(p, 1e-5), 1e-5 * ks / 2.0);
}

TEST(Solver, ZeroTargetReturnsStart) {
  StripProblem sp;
  sp.schedule.target = 0.0;
  const SolverState st = solve_equilibrium(sp.mesh, sp.params, sp.distances, sp.schedule, sp.config);
  ASSERT_TRUE(st.converged);
  EXPECT_EQ(st.history.size(), 1u);
  EXPECT_EQ((st.x.values() - DofVector::rest(sp.mesh).values()).norm(), 0.0);
}

TEST(Solver, StripActuationProperties) {
  StripProblem sp;
  std::vector<double> energies;
  const auto pinned = pinned_dofs(sp.mesh, sp.config);
  const DofVector rest = DofVector::rest(sp.mesh);
  const SolverState st = solve_equilibrium(
      sp.mesh, sp.params, sp.distances, sp.schedule, sp.config,
      [&](const StepRecord& rec, const DofVector& x) {
        energies.push_back(rec.energy);
        for (int d : pinned) EXPECT_EQ(x.values()[d], rest.values()[d]);
      });
  ASSERT_TRUE(st.converged) << st.message;
  EXPECT_EQ(st.status, SolveStatus::Converged);
  EXPECT_EQ(st.eps_pre, -0.2);
  ASSERT_FALSE(st.history.empty());
  EXPECT_EQ(st.history.back().eps_pre, -0.2);
  EXPECT_EQ(energies.size(), st.history.size());
  for (std::size_t k = 0; k < st.history.size(); ++k) {
    const StepRecord& r = st.history[k];
    EXPECT_EQ(r.index, static_cast<int>(k));
    EXPECT_LE(r.max_force, st.force_tolerance);
    EXPECT_LT(r.relative_step, sp.config.tolerance);
    if (k > 0) EXPECT_LT(r.eps_pre, st.history[k - 1].eps_pre);
  }
  // The sheet leaves the plane.
  double zmax = 0.0;
  for (int i = 0; i < sp.mesh.num_nodes(); ++i) zmax = std::max(zmax, std::abs(st.x.node(i).z()));
  EXPECT_GT(zmax, 0.1 * sp.mesh.mean_edge_length());
}

TEST(Solver, NewtonObjectiveDecreases) {
  StripProblem sp;
  const ThermalField f = sp.distances.rescaled(-0.1);
  const auto pinned = pinned_dofs(sp.mesh, sp.config);
  const Eigen::VectorXd load = transverse_load(sp.mesh, 1e-4);
  DofVector x = DofVector::rest(sp.mesh);
  double previous = INFINITY;
  for (int it = 0; it < 30; ++it) {
    const NewtonResult r = newton_step(sp.mesh, x, sp.params, f, load, pinned, sp.config);
    ASSERT_TRUE(r.ok) << r.failure;
    EXPECT_LE(r.objective, previous);
    previous = r.objective;
    x = r.x;
    if (r.relative_step < 1e-12) break;
  }
}

TEST(Solver, Deterministic) {
  StripProblem sp;
  const SolverState a = solve_equilibrium(sp.mesh, sp.params, sp.distances, sp.schedule, sp.config);
  const SolverState b = solve_equilibrium(sp.mesh, sp.params, sp.distances, sp.schedule, sp.config);
  ASSERT_TRUE(a.converged && b.converged);
  EXPECT_EQ(a.x.values(), b.x.values());
  EXPECT_EQ(a.history.size(), b.history.size());
}

TEST(Solver, RejectsMismatchedField) {
  StripProblem sp;
  EXPECT_THROW(solve_equilibrium(sp.mesh, sp.params, ThermalField::zero(3), sp.schedule, sp.config),
               InputError);
}

TEST(Benchmarks, UniaxialStripIsHomogeneous) {
  const UniaxialResult r = uniaxial_benchmark(11, 5, 0.01);
  ASSERT_TRUE(r.converged);
  EXPECT_LT(r.max_strain_error, 1e-8);
}

TEST(Benchmarks, CantileverConvergesWithPositiveDeflection) {
  const CantileverResult r = cantilever_benchmark(21, 5, 1.0, 1.0);
  ASSERT_TRUE(r.converged);
  EXPECT_GT(r.tip_deflection, 0.0);
  EXPECT_NEAR(r.beam_deflection, 1e-3 * r.length, 1e-15 * r.length);
}
