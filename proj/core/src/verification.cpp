#include "morphshell/verification.hpp"

#include "morphshell/solver.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <random>

namespace morphshell {

namespace {

MaterialModel reference_material(double l0) {
  MaterialConfig mc;
  mc.layer1 = LayerSpec{1.0, 0.3};
  mc.layer2 = LayerSpec{3.0, 0.7};
  mc.l0 = l0;
  return assemble_material(mc);
}

DofVector random_state(const Mesh& mesh, double amplitude, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DofVector x = DofVector::rest(mesh);
  const double scale = amplitude * mesh.mean_edge_length();
  for (Eigen::Index i = 0; i < x.size(); ++i) x.values()[i] += scale * u(rng);
  return x;
}

ThermalField random_field(const Mesh& mesh, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.3, 0.0);
  ThermalField f = ThermalField::zero(mesh.num_edges());
  for (double& e : f.eps_th) e = u(rng);
  return f;
}

double energy_at(const Mesh& mesh, const DofVector& x, const EnergyParams& p,
                 const ThermalField& f) {
  return evaluate_energy(mesh, x, p, f, EvalLevel::Energy).energy;
}

}  // namespace

Mesh two_triangle_mesh(std::span<const int> bilayer_triangles) {
  std::vector<Vec3> nodes{{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {0.5, 0.8, 0.0}, {0.5, -0.8, 0.0}};
  std::vector<Triangle> tris{{0, 1, 2}, {1, 0, 3}};
  return build_mesh(std::move(nodes), std::move(tris), bilayer_triangles);
}

FdErrors finite_difference_check(const Mesh& mesh, const EnergyParams& params, int samples,
                                 double amplitude, std::uint64_t seed) {
  if (samples < 1) throw InputError("finite_difference_check needs at least one sample");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double h = 1e-6 * mesh.mean_edge_length();
  const Eigen::Index n = mesh.num_dofs();

  FdErrors err;
  for (int s = 0; s < samples; ++s) {
    const DofVector x = random_state(mesh, amplitude, rng);
    const ThermalField f = random_field(mesh, rng);
    const EnergyEvaluation ev = evaluate_energy(mesh, x, params, f, EvalLevel::Hessian);
    const Eigen::MatrixXd H(ev.hessian);

    Eigen::VectorXd g_fd(n);
    Eigen::MatrixXd H_fd(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      DofVector xp = x, xm = x;
      xp.values()[i] += h;
      xm.values()[i] -= h;
      g_fd[i] = (energy_at(mesh, xp, params, f) - energy_at(mesh, xm, params, f)) / (2.0 * h);
      H_fd.col(i) = (energy_gradient(mesh, xp, params, f) - energy_gradient(mesh, xm, params, f)) /
                    (2.0 * h);
    }

    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
    v.normalize();
    DofVector xp = x, xm = x;
    xp.values() += h * v;
    xm.values() -= h * v;
    const double dd_fd = (energy_at(mesh, xp, params, f) - energy_at(mesh, xm, params, f)) / (2.0 * h);
    const double dd = ev.gradient.dot(v);

    err.gradient = std::max(err.gradient, (ev.gradient - g_fd).norm() / g_fd.norm());
    err.hessian = std::max(err.hessian, (H - H_fd).norm() / H_fd.norm());
    err.symmetry = std::max(err.symmetry, (H - H.transpose()).norm());
    err.directional = std::max(err.directional, std::abs(dd - dd_fd) / std::abs(dd));
    ++err.samples;
  }
  return err;
}

DiscreteShellsTerms discrete_shells_energy(const Mesh& mesh, const DofVector& x,
                                           const MaterialModel& material) {
  DiscreteShellsTerms t;
  t.stretch.reserve(static_cast<std::size_t>(mesh.num_edges()));
  for (const Edge& e : mesh.edges()) {
    const double l = (x.node(e.nodes[1]) - x.node(e.nodes[0])).norm();
    const double eps = l / e.rest_length - 1.0;
    t.stretch.push_back(0.5 * material[e.region].stretch * eps * eps);
  }
  auto normal = [&](int tri) {
    const Triangle& v = mesh.triangles()[static_cast<std::size_t>(tri)];
    return Vec3((x.node(v[1]) - x.node(v[0])).cross(x.node(v[2]) - x.node(v[0])));
  };
  t.bend.reserve(static_cast<std::size_t>(mesh.num_hinges()));
  for (const Hinge& h : mesh.hinges()) {
    const Vec3 n1 = normal(h.triangles[0]);
    const Vec3 n2 = normal(h.triangles[1]);
    const Vec3 e = (x.node(h.nodes[1]) - x.node(h.nodes[0])).normalized();
    const double theta = std::atan2(n1.cross(n2).dot(e), n1.dot(n2));
    const double d = theta - h.rest_angle;
    t.bend.push_back(0.5 * material[mesh.edge(h.edge).region].bend * d * d);
  }
  for (double v : t.stretch) t.total += v;
  for (double v : t.bend) t.total += v;
  return t;
}

double classical_limit_error(const Mesh& mesh, const MaterialModel& material, int samples,
                             double amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const EnergyParams params{material, 0.0, mesh.mean_edge_length()};
  const ThermalField zero = ThermalField::zero(mesh.num_edges());
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const DofVector x = random_state(mesh, amplitude, rng);
    const EnergyReport model = total_energy(mesh, x, params, zero);
    const DiscreteShellsTerms ref = discrete_shells_energy(mesh, x, material);
    double scale = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < ref.stretch.size(); ++i) {
      scale = std::max(scale, std::abs(ref.stretch[i]));
      diff = std::max(diff, std::abs(model.stretch_energy[i] - ref.stretch[i]));
    }
    for (std::size_t j = 0; j < ref.bend.size(); ++j) {
      scale = std::max(scale, std::abs(ref.bend[j]));
      diff = std::max(diff, std::abs(model.bend_energy[j] - ref.bend[j]));
    }
    if (scale > 0.0) worst = std::max(worst, diff / scale);
  }
  return worst;
}

UniaxialResult uniaxial_benchmark(int cols, int rows, double applied_strain) {
  const double l0 = 1.0;
  const Mesh mesh = equilateral_strip(cols, rows, l0);
  MaterialConfig mc;
  mc.layer1 = LayerSpec{1.0, 1.0};
  mc.layer2 = LayerSpec{1.0, 1.0};
  mc.l0 = l0;
  const EnergyParams params = EnergyParams::with_default_beta(assemble_material(mc), l0);

  SolverConfig cfg;
  cfg.constraints = ConstraintScheme::Explicit;
  cfg.tolerance = 1e-13;
  DofVector start = DofVector::rest(mesh);
  for (int j = 0; j < rows; ++j) {
    for (int i : {0, cols - 1}) {
      const int v = j * cols + i;
      start.values()[3 * v] *= 1.0 + applied_strain;
      cfg.pinned_dofs.push_back(3 * v);
    }
  }
  cfg.pinned_dofs.push_back(1);
  cfg.pinned_dofs.push_back(2);
  cfg.pinned_dofs.push_back(3 * (cols - 1) + 2);
  cfg.pinned_dofs.push_back(3 * ((rows - 1) * cols) + 2);
  std::sort(cfg.pinned_dofs.begin(), cfg.pinned_dofs.end());

  const double ftol = 1e-13 * params.material.single.stretch / l0;
  const EquilibriumResult r =
      minimize(mesh, start, params, ThermalField::zero(mesh.num_edges()),
               Eigen::VectorXd::Zero(mesh.num_dofs()), cfg.pinned_dofs, cfg, ftol);

  UniaxialResult out;
  out.applied_strain = applied_strain;
  out.converged = r.converged;
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const Edge& ed = mesh.edge(e);
    const bool axial = std::abs(mesh.node(ed.nodes[0]).y() - mesh.node(ed.nodes[1]).y()) < 1e-12;
    const double expected = axial ? applied_strain : 0.0;
    out.max_strain_error =
        std::max(out.max_strain_error, std::abs(axial_strain(mesh, r.x, e) - expected));
  }
  return out;
}

CantileverResult cantilever_benchmark(int cols, int rows, double young_modulus, double thickness) {
  if (cols < 4 || rows < 2) throw InputError("cantilever_benchmark needs cols >= 4, rows >= 2");
  const double l0 = 1.0;
  const Mesh mesh = equilateral_strip(cols, rows, l0);
  MaterialConfig mc;
  mc.layer1 = LayerSpec{young_modulus, thickness};
  mc.layer2 = LayerSpec{young_modulus, thickness};
  mc.l0 = l0;
  const EnergyParams params = EnergyParams::with_default_beta(assemble_material(mc), l0);

  CantileverResult out;
  double x_clamp = 0.0, x_tip = 0.0;
  SolverConfig cfg;
  cfg.constraints = ConstraintScheme::Explicit;
  cfg.tolerance = 1e-10;
  std::vector<int> tip;
  for (int j = 0; j < rows; ++j) {
    for (int i : {0, 1}) {
      const int v = j * cols + i;
      for (int k = 0; k < 3; ++k) cfg.pinned_dofs.push_back(3 * v + k);
    }
    x_clamp += mesh.node(j * cols + 1).x() / rows;
    tip.push_back(j * cols + cols - 1);
    x_tip += mesh.node(j * cols + cols - 1).x() / rows;
  }
  std::sort(cfg.pinned_dofs.begin(), cfg.pinned_dofs.end());

  out.length = x_tip - x_clamp;
  out.width = (rows - 1) * l0 * std::sqrt(3.0) / 2.0;
  const double inertia = out.width * std::pow(thickness, 3) / 12.0;
  const double stiffness = 3.0 * young_modulus * inertia / std::pow(out.length, 3);
  const double load = 1e-3 * out.length * stiffness;

  Eigen::VectorXd f = Eigen::VectorXd::Zero(mesh.num_dofs());
  for (int v : tip) f[3 * v + 2] = load / static_cast<double>(tip.size());
  const EquilibriumResult r = minimize(mesh, DofVector::rest(mesh), params,
                                       ThermalField::zero(mesh.num_edges()), f, cfg.pinned_dofs,
                                       cfg, 1e-5 * load);
  out.converged = r.converged;
  for (int v : tip) out.tip_deflection += r.x.node(v).z() / static_cast<double>(tip.size());
  out.beam_deflection = load / stiffness;
  out.ratio = out.tip_deflection / out.beam_deflection;
  return out;
}

std::vector<CheckResult> run_verification(const VerificationOptions& options) {
  std::vector<CheckResult> out;
  auto below = [&](std::string name, double value, double limit) {
    out.push_back({std::move(name), value, limit, value < limit});
  };

  const Mesh pair = two_triangle_mesh(std::vector<int>{0});
  const Mesh strip = equilateral_strip(5, 5, 1.0, std::vector<int>{0, 1, 2, 3, 4, 5});

  if (options.finite_differences) {
    for (const auto& [label, mesh] : {std::pair<const char*, const Mesh*>{"two_triangle", &pair},
                                      std::pair<const char*, const Mesh*>{"strip_5x5", &strip}}) {
      const EnergyParams p =
          EnergyParams::with_default_beta(reference_material(mesh->mean_edge_length()),
                                          mesh->mean_edge_length());
      const FdErrors e = finite_difference_check(*mesh, p, options.samples, 0.1, options.seed);
      const std::string base = std::string("fd.") + label;
      below(base + ".gradient", e.gradient, 1e-6);
      below(base + ".directional", e.directional, 1e-6);
      below(base + ".hessian", e.hessian, 1e-5);
      out.push_back({base + ".symmetry", e.symmetry, 0.0, e.symmetry == 0.0});
    }
  }
  if (options.classical_limit) {
    double worst = 0.0;
    for (const Mesh* m : {&pair, &strip}) {
      worst = std::max(worst, classical_limit_error(*m, reference_material(m->mean_edge_length()),
                                                    options.samples, 0.1, options.seed));
    }
    below("classical_limit", worst, 1e-12);
  }
  if (options.uniaxial) {
    const UniaxialResult u = uniaxial_benchmark(11, 5, 0.01);
    below("uniaxial.strain_error", u.converged ? u.max_strain_error : INFINITY, 1e-8);
  }
  if (options.cantilever) {
    const CantileverResult c = cantilever_benchmark(41, 5, 1.0, 1.0);
    below("cantilever.relative_error", c.converged ? std::abs(c.ratio - 1.0) : INFINITY, 0.02);
  }
  return out;
}

}  // namespace morphshell
