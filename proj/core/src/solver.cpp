#include "morphshell/solver.hpp"

#include <Eigen/Geometry>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace morphshell {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<char> free_mask(int ndof, std::span<const int> pinned) {
  std::vector<char> free(static_cast<std::size_t>(ndof), 1);
  for (int d : pinned) {
    free[static_cast<std::size_t>(d)] = 0;
  }
  return free;
}

void zero_pinned(Eigen::VectorXd& v, std::span<const int> pinned) {
  for (int d : pinned) {
    v[d] = 0.0;
  }
}

double max_nodal_force(const Eigen::VectorXd& residual) {
  double best = 0.0;
  for (Eigen::Index i = 0; i + 2 < residual.size(); i += 3) {
    best = std::max(best, residual.segment<3>(i).norm());
  }
  return best;
}

struct Objective {
  const Mesh& mesh;
  const EnergyParams& params;
  const ThermalField& field;
  const Eigen::VectorXd& f_ext;
  const Inertia* inertia;

  // E(x) - f.x (+ inertia). Returns +inf where the energy is undefined.
  double value(const DofVector& x) const {
    double e;
    try {
      e = evaluate_energy(mesh, x, params, field, EvalLevel::Energy).energy;
    } catch (const GeometryError&) {
      return kInf;
    }
    e -= f_ext.dot(x.values());
    if (inertia) {
      const Eigen::VectorXd d = x.values() - inertia->predictor;
      e += 0.5 / (inertia->time_step * inertia->time_step) *
           d.dot(inertia->mass.cwiseProduct(d));
    }
    return std::isfinite(e) ? e : kInf;
  }

  EnergyEvaluation evaluate(const DofVector& x, EvalLevel level) const {
    EnergyEvaluation ev = evaluate_energy(mesh, x, params, field, level);
    ev.energy -= f_ext.dot(x.values());
    ev.gradient -= f_ext;
    if (inertia) {
      const double w = 1.0 / (inertia->time_step * inertia->time_step);
      const Eigen::VectorXd d = x.values() - inertia->predictor;
      ev.energy += 0.5 * w * d.dot(inertia->mass.cwiseProduct(d));
      ev.gradient += w * inertia->mass.cwiseProduct(d);
      if (level == EvalLevel::Hessian) {
        for (Eigen::Index i = 0; i < d.size(); ++i) {
          ev.hessian.coeffRef(i, i) += w * inertia->mass[i];
        }
      }
    }
    return ev;
  }
};

double infinity_norm(const Eigen::SparseMatrix<double>& h) {
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(h.rows());
  for (int k = 0; k < h.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(h, k); it; ++it) {
      rows[it.row()] += std::abs(it.value());
    }
  }
  return rows.size() ? rows.maxCoeff() : 0.0;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(tolerance > 0.0)) {
    throw InputError("solver tolerance must be positive");
  }
  if (force_tolerance && !(*force_tolerance > 0.0)) {
    throw InputError("solver force_tolerance must be positive");
  }
  if (max_iterations < 1 || fast_iterations < 0) {
    throw InputError("solver iteration limits must be positive");
  }
  if (!(step_growth >= 1.0)) {
    throw InputError("solver step_growth must be >= 1");
  }
  if (!(regularization_start > 0.0) || !(regularization_growth > 1.0) || max_regularizations < 1) {
    throw InputError("solver regularization settings out of range");
  }
  if (!(armijo > 0.0 && armijo < 1.0) || max_line_search < 1) {
    throw InputError("solver line-search settings out of range");
  }
  if (mode == SolverMode::Dynamic) {
    if (!(time_step > 0.0) || !(density > 0.0) || !(thickness > 0.0) || max_time_steps < 1) {
      throw InputError("dynamic mode needs positive time_step, density, thickness, max_time_steps");
    }
  }
  if (mode == SolverMode::Static && constraints == ConstraintScheme::Explicit &&
      pinned_dofs.size() < 6) {
    throw InputError("static mode needs at least 6 pinned DOFs (use the 3-2-1 scheme)");
  }
}

std::vector<int> three_two_one_dofs(const Mesh& mesh) {
  if (mesh.num_triangles() == 0) {
    throw InputError("3-2-1 constraints need at least one triangle");
  }
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : mesh.nodes()) {
    centroid += p;
  }
  centroid /= mesh.num_nodes();

  int a = 0;
  double best = kInf;
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    const double d = (mesh.node(i) - centroid).squaredNorm();
    if (d < best && !mesh.node_edges(i).empty()) {
      best = d;
      a = i;
    }
  }
  // First triangle containing a gives b and c.
  int tri = -1;
  for (int t = 0; t < mesh.num_triangles() && tri < 0; ++t) {
    for (int k : mesh.triangles()[static_cast<std::size_t>(t)]) {
      if (k == a) {
        tri = t;
      }
    }
  }
  const auto& T = mesh.triangles()[static_cast<std::size_t>(tri)];
  int slot = 0;
  while (T[static_cast<std::size_t>(slot)] != a) {
    ++slot;
  }
  const int b = T[static_cast<std::size_t>((slot + 1) % 3)];
  const int c = T[static_cast<std::size_t>((slot + 2) % 3)];

  Eigen::Index along, normal;
  (mesh.node(b) - mesh.node(a)).cwiseAbs().maxCoeff(&along);
  (mesh.node(b) - mesh.node(a)).cross(mesh.node(c) - mesh.node(a)).cwiseAbs().maxCoeff(&normal);

  std::vector<int> dofs = {3 * a, 3 * a + 1, 3 * a + 2};
  for (int k = 0; k < 3; ++k) {
    if (k != along) {
      dofs.push_back(3 * b + k);
    }
  }
  dofs.push_back(3 * c + static_cast<int>(normal));
  std::sort(dofs.begin(), dofs.end());
  return dofs;
}

std::vector<int> pinned_dofs(const Mesh& mesh, const SolverConfig& config) {
  std::vector<int> out = config.pinned_dofs;
  for (int d : out) {
    if (d < 0 || d >= mesh.num_dofs()) {
      throw InputError("pinned DOF " + std::to_string(d) + " out of range");
    }
  }
  if (config.constraints == ConstraintScheme::ThreeTwoOne) {
    const auto auto_dofs = three_two_one_dofs(mesh);
    out.insert(out.end(), auto_dofs.begin(), auto_dofs.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Eigen::VectorXd lumped_mass(const Mesh& mesh, double density, double thickness) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(mesh.num_dofs());
  for (const auto& t : mesh.triangles()) {
    const Vec3& p0 = mesh.node(t[0]);
    const double area = 0.5 * (mesh.node(t[1]) - p0).cross(mesh.node(t[2]) - p0).norm();
    const double share = density * thickness * area / 3.0;
    for (int k : t) {
      m.segment<3>(3 * k).array() += share;
    }
  }
  return m;
}

Eigen::VectorXd transverse_load(const Mesh& mesh, double magnitude) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(mesh.num_dofs());
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    f[3 * i + 2] = magnitude;
  }
  return f;
}

double default_force_tolerance(const EnergyParams& params, double tolerance) {
  const double ks = std::max(params.material.single.stretch, params.material.bilayer.stretch);
  return tolerance * ks / params.l0;
}

NewtonResult newton_step(const Mesh& mesh, const DofVector& x, const EnergyParams& params,
                         const ThermalField& field, const Eigen::VectorXd& f_ext,
                         std::span<const int> pinned, const SolverConfig& config,
                         const Inertia* inertia, double tau_hint) {
  NewtonResult out;
  out.x = x;
  const Objective obj{mesh, params, field, f_ext, inertia};
  const int n = mesh.num_dofs();
  const auto free = free_mask(n, pinned);

  EnergyEvaluation ev;
  try {
    ev = obj.evaluate(x, EvalLevel::Hessian);
  } catch (const GeometryError& e) {
    out.failure = e.what();
    return out;
  }
  Eigen::VectorXd g = ev.gradient;
  zero_pinned(g, pinned);
  if (!std::isfinite(ev.energy) || !g.allFinite()) {
    out.failure = "non-finite energy or gradient";
    return out;
  }
  out.objective = ev.energy;
  out.max_force = max_nodal_force(g);

  // Decouple pinned DOFs: zero their rows and columns, unit diagonal.
  Eigen::SparseMatrix<double> H = ev.hessian;
  H.prune([&](Eigen::Index i, Eigen::Index j, double) {
    return free[static_cast<std::size_t>(i)] && free[static_cast<std::size_t>(j)];
  });
  Eigen::SparseMatrix<double> I(n, n);
  I.setIdentity();
  H += I;  // reserves the full diagonal so regularisation keeps the pattern
  for (int i = 0; i < n; ++i) {
    H.coeffRef(i, i) -= free[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  }
  if (g.norm() == 0.0) {
    out.ok = true;
    return out;
  }

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  ldlt.analyzePattern(H);
  const double hnorm = infinity_norm(H);
  Eigen::VectorXd delta;
  double tau = 0.0;
  bool solved = false;
  for (int attempt = 0; attempt <= config.max_regularizations; ++attempt) {
    if (attempt > 0) {
      const double next =
          attempt == 1 ? std::max(config.regularization_start * std::max(hnorm, 1e-300), tau_hint)
                       : tau * config.regularization_growth;
      for (int i = 0; i < n; ++i) {
        if (free[static_cast<std::size_t>(i)]) {
          H.coeffRef(i, i) += next - tau;
        }
      }
      tau = next;
    }
    ldlt.factorize(H);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) {
      continue;
    }
    delta = ldlt.solve(-g);
    zero_pinned(delta, pinned);
    if (ldlt.info() == Eigen::Success && delta.allFinite() && g.dot(delta) < 0.0) {
      solved = true;
      break;
    }
  }
  if (!solved) {
    out.failure = "Hessian not positive definite after maximal regularization";
    return out;
  }
  out.regularization = tau;

  // Armijo backtracking on the objective.
  const double slope = g.dot(delta);
  const double slack = 1e-13 * std::abs(ev.energy);
  double alpha = 1.0;
  DofVector trial = x;
  bool accepted = false;
  for (int k = 0; k < config.max_line_search; ++k) {
    trial.values() = x.values() + alpha * delta;
    const double phi = obj.value(trial);
    if (phi <= ev.energy + config.armijo * alpha * slope + slack) {
      accepted = true;
      out.objective = phi;
      break;
    }
    alpha *= 0.5;
  }
  if (!accepted) {
    out.failure = "line search failed";
    return out;
  }
  // Pinned entries of delta are exactly zero, so pinned coordinates are
  // bitwise unchanged.
  out.line_search = alpha;
  out.relative_step = alpha * delta.norm() / std::max(trial.values().norm(), 1e-300);
  try {
    Eigen::VectorXd gn = obj.evaluate(trial, EvalLevel::Gradient).gradient;
    zero_pinned(gn, pinned);
    out.max_force = max_nodal_force(gn);
  } catch (const GeometryError& e) {
    out.failure = e.what();
    return out;
  }
  out.x = std::move(trial);
  out.ok = true;
  return out;
}

EquilibriumResult minimize(const Mesh& mesh, const DofVector& start, const EnergyParams& params,
                           const ThermalField& field, const Eigen::VectorXd& f_ext,
                           std::span<const int> pinned, const SolverConfig& config,
                           double force_tolerance, const Inertia* inertia) {
  EquilibriumResult out;
  out.x = start;
  double tau_hint = 0.0;
  for (int it = 1; it <= config.max_iterations; ++it) {
    NewtonResult r =
        newton_step(mesh, out.x, params, field, f_ext, pinned, config, inertia, tau_hint);
    tau_hint = r.regularization / config.regularization_growth;
    out.iterations = it;
    if (!r.ok) {
      out.failure = r.failure;
      return out;
    }
    out.x = std::move(r.x);
    out.relative_step = r.relative_step;
    out.max_force = r.max_force;
    out.energy = r.objective;
    if (!out.x.all_finite()) {
      out.failure = "non-finite coordinates";
      return out;
    }
    if (r.relative_step < config.tolerance && r.max_force <= force_tolerance) {
      out.converged = true;
      return out;
    }
  }
  out.failure = "no convergence in " + std::to_string(config.max_iterations) + " iterations";
  return out;
}

DynamicResult dynamic_step(const Mesh& mesh, const DofVector& x, const Eigen::VectorXd& velocity,
                           const Eigen::VectorXd& mass, const EnergyParams& params,
                           const ThermalField& field, const Eigen::VectorXd& f_ext,
                           std::span<const int> pinned, const SolverConfig& config) {
  if (velocity.size() != x.size() || mass.size() != x.size()) {
    throw InputError("dynamic_step: velocity and mass must match the DOF vector");
  }
  Inertia inertia{mass, x.values() + config.time_step * velocity, config.time_step};
  for (int d : pinned) {
    inertia.predictor[d] = x.values()[d];
  }
  const double ftol = config.force_tolerance.value_or(default_force_tolerance(params, config.tolerance));
  DynamicResult out;
  out.solve = minimize(mesh, x, params, field, f_ext, pinned, config, ftol, &inertia);
  out.x = out.solve.x;
  out.velocity = (out.x.values() - x.values()) / config.time_step;
  return out;
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged:
      return "converged";
    case SolveStatus::Diverged:
      return "diverged";
    case SolveStatus::NotFinite:
      return "not-finite";
  }
  return "unknown";
}

namespace {

// Static equilibrium at one load level, or dynamic relaxation to it.
EquilibriumResult settle(const Mesh& mesh, const DofVector& start, const EnergyParams& params,
                         const ThermalField& field, const Eigen::VectorXd& f_ext,
                         std::span<const int> pinned, const SolverConfig& config, double ftol,
                         const Eigen::VectorXd& mass) {
  if (config.mode == SolverMode::Static) {
    return minimize(mesh, start, params, field, f_ext, pinned, config, ftol);
  }
  EquilibriumResult out;
  out.x = start;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(start.size());
  for (int k = 1; k <= config.max_time_steps; ++k) {
    DynamicResult d = dynamic_step(mesh, out.x, v, mass, params, field, f_ext, pinned, config);
    out.iterations += d.solve.iterations;
    if (!d.solve.converged) {
      out.failure = d.solve.failure;
      return out;
    }
    const double moved = (d.x.values() - out.x.values()).norm() / d.x.values().norm();
    out.x = std::move(d.x);
    v = std::move(d.velocity);
    Eigen::VectorXd g = evaluate_energy(mesh, out.x, params, field, EvalLevel::Gradient).gradient - f_ext;
    zero_pinned(g, pinned);
    out.max_force = max_nodal_force(g);
    out.relative_step = moved;
    out.energy = evaluate_energy(mesh, out.x, params, field, EvalLevel::Energy).energy -
                 f_ext.dot(out.x.values());
    if (moved < config.tolerance && out.max_force <= ftol) {
      out.converged = true;
      return out;
    }
  }
  out.failure = "dynamic relaxation did not settle in " + std::to_string(config.max_time_steps) +
                " time steps";
  return out;
}

}  // namespace

SolverState solve_equilibrium(const Mesh& mesh, const EnergyParams& params,
                              const ThermalField& distances, const StimulusSchedule& schedule,
                              const SolverConfig& config, const StepCallback& on_step) {
  return solve_equilibrium(mesh, DofVector::rest(mesh), params, distances, schedule, config,
                           on_step);
}

SolverState solve_equilibrium(const Mesh& mesh, const DofVector& start,
                              const EnergyParams& params, const ThermalField& distances,
                              const StimulusSchedule& schedule, const SolverConfig& config,
                              const StepCallback& on_step) {
  schedule.validate();
  config.validate();
  check_dofs(mesh, start);
  if (static_cast<int>(distances.eps_th.size()) != mesh.num_edges()) {
    throw InputError("thermal field does not match the mesh");
  }
  const auto pinned = pinned_dofs(mesh, config);
  const Eigen::VectorXd mass = config.mode == SolverMode::Dynamic
                                   ? lumped_mass(mesh, config.density, config.thickness)
                                   : Eigen::VectorXd();

  SolverState state;
  state.x = start;
  state.force_tolerance =
      config.force_tolerance.value_or(default_force_tolerance(params, config.tolerance));

  auto run_level = [&](double eps, double step) -> bool {
    const ThermalField field =
        eps == 0.0 ? ThermalField::zero(mesh.num_edges()) : distances.rescaled(eps);
    const double p = schedule.perturbation_at(eps);
    const Eigen::VectorXd f = transverse_load(mesh, p);
    EquilibriumResult r =
        settle(mesh, state.x, params, field, f, pinned, config, state.force_tolerance, mass);
    if (!r.x.all_finite() || !std::isfinite(r.energy)) {
      state.status = SolveStatus::NotFinite;
      state.message = "non-finite state at eps_pre = " + std::to_string(eps);
      return false;
    }
    if (!r.converged) {
      state.message = r.failure;
      return false;
    }
    StepRecord rec;
    rec.index = static_cast<int>(state.history.size());
    rec.eps_pre = eps;
    rec.perturbation = p;
    rec.step_size = step;
    rec.iterations = r.iterations;
    rec.relative_step = r.relative_step;
    rec.max_force = r.max_force;
    rec.energy = r.energy;
    state.x = std::move(r.x);
    state.eps_pre = eps;
    state.history.push_back(rec);
    if (on_step) {
      on_step(rec, state.x);
    }
    return true;
  };

  if (schedule.target == 0.0) {
    if (!run_level(0.0, 0.0)) {
      if (state.status != SolveStatus::NotFinite) {
        state.status = SolveStatus::Diverged;
      }
      return state;
    }
    state.converged = true;
    return state;
  }

  double h = schedule.initial_step;
  double eps = 0.0;
  while (eps > schedule.target) {
    double next = eps - h;
    if (next <= schedule.target + 1e-12) {
      next = schedule.target;
    }
    const DofVector saved = state.x;
    if (run_level(next, eps - next)) {
      const StepRecord& rec = state.history.back();
      eps = next;
      if (rec.iterations <= config.fast_iterations) {
        h = std::min(h * config.step_growth, schedule.max_step);
      }
      continue;
    }
    if (state.status == SolveStatus::NotFinite) {
      return state;
    }
    state.x = saved;
    h *= 0.5;
    if (h < schedule.min_step) {
      state.status = SolveStatus::Diverged;
      state.message = "step halving exhausted at eps_pre = " + std::to_string(eps) + ": " +
                      state.message;
      return state;
    }
  }
  state.message.clear();
  state.status = SolveStatus::Converged;
  state.converged = true;
  return state;
}

}  // namespace morphshell
