#pragma once

#include "morphshell/energy.hpp"
#include "morphshell/mesh.hpp"
#include "morphshell/stimulus.hpp"

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace morphshell {

enum class SolverMode { Static, Dynamic };

enum class ConstraintScheme {
  ThreeTwoOne,  // statically determinate pinning of a free body
  Explicit,     // only the DOFs listed in SolverConfig::pinned_dofs
};

struct SolverConfig {
  double tolerance = 1e-5;               // on |dX| / |X|
  std::optional<double> force_tolerance; // max nodal force; default tolerance * k_s,max / l0
  int max_iterations = 500;              // Newton iterations per load step
  int fast_iterations = 5;               // grow the step when converged within this many
  double step_growth = 1.5;

  double regularization_start = 1e-6;    // relative to |H|_inf
  double regularization_growth = 10.0;
  int max_regularizations = 16;

  double armijo = 1e-4;
  int max_line_search = 40;

  ConstraintScheme constraints = ConstraintScheme::ThreeTwoOne;
  std::vector<int> pinned_dofs;          // always applied, in addition to the scheme

  SolverMode mode = SolverMode::Static;
  double time_step = 1.0;
  double density = 1.0;                  // mass per volume for lumping
  double thickness = 1.0;                // mm, lumping thickness
  int max_time_steps = 500;              // dynamic mode, per load step

  void validate() const;
};

/// DOF indices pinned by the 3-2-1 scheme: the node nearest the rest
/// centroid in all three axes, one neighbour in the two axes other than the
/// dominant direction of their joining edge, and the third node of a shared
/// triangle along the axis closest to that triangle's normal.
std::vector<int> three_two_one_dofs(const Mesh& mesh);

/// Sorted, deduplicated pinned DOFs implied by the configuration.
std::vector<int> pinned_dofs(const Mesh& mesh, const SolverConfig& config);

/// Lumped nodal mass: density * thickness * (sum of incident rest triangle
/// areas) / 3.
Eigen::VectorXd lumped_mass(const Mesh& mesh, double density, double thickness);

/// Uniform +z dead load of `magnitude` N on every node.
Eigen::VectorXd transverse_load(const Mesh& mesh, double magnitude);

/// Default force tolerance: tolerance * max(k_s) / l0.
double default_force_tolerance(const EnergyParams& params, double tolerance);

/// Inertial term of the implicit-Euler update,
/// 1/(2 dt^2) (x - x_hat)^T M (x - x_hat) with x_hat = x_k + dt v_k.
struct Inertia {
  Eigen::VectorXd mass;  // per DOF
  Eigen::VectorXd predictor;
  double time_step = 1.0;
};

struct NewtonResult {
  DofVector x;
  bool ok = false;
  std::string failure;          // set when !ok
  double relative_step = 0.0;   // |dX| / |X|
  double max_force = 0.0;       // max nodal residual force after the step
  double objective = 0.0;       // E - F.x (+ inertia) after the step
  double regularization = 0.0;  // tau used
  double line_search = 1.0;     // accepted step length
};

/// One regularised Newton iteration on E(x) - f_ext.x (+ inertia) over the
/// free DOFs, with Armijo backtracking. The unshifted Hessian is tried
/// first, then tau = max(regularization_start * |H|_inf, tau_hint), growing
/// by regularization_growth. Never throws on numerical trouble; failures
/// come back as ok = false.
NewtonResult newton_step(const Mesh& mesh, const DofVector& x, const EnergyParams& params,
                         const ThermalField& field, const Eigen::VectorXd& f_ext,
                         std::span<const int> pinned, const SolverConfig& config,
                         const Inertia* inertia = nullptr, double tau_hint = 0.0);

/// Newton iteration to convergence at a fixed load.
struct EquilibriumResult {
  DofVector x;
  bool converged = false;
  int iterations = 0;
  double relative_step = 0.0;
  double max_force = 0.0;
  double energy = 0.0;
  std::string failure;
};

EquilibriumResult minimize(const Mesh& mesh, const DofVector& start, const EnergyParams& params,
                           const ThermalField& field, const Eigen::VectorXd& f_ext,
                           std::span<const int> pinned, const SolverConfig& config,
                           double force_tolerance, const Inertia* inertia = nullptr);

struct DynamicResult {
  DofVector x;
  Eigen::VectorXd velocity;
  EquilibriumResult solve;
};

/// One implicit-Euler step: minimises
/// 1/(2 dt^2) (x - x_k - dt v_k)^T M (...) + E(x) - f.x, then
/// v_{k+1} = (x_{k+1} - x_k) / dt.
DynamicResult dynamic_step(const Mesh& mesh, const DofVector& x, const Eigen::VectorXd& velocity,
                           const Eigen::VectorXd& mass, const EnergyParams& params,
                           const ThermalField& field, const Eigen::VectorXd& f_ext,
                           std::span<const int> pinned, const SolverConfig& config);

struct StepRecord {
  int index = 0;
  double eps_pre = 0.0;
  double perturbation = 0.0;
  double step_size = 0.0;
  int iterations = 0;
  double relative_step = 0.0;
  double max_force = 0.0;
  double energy = 0.0;
};

enum class SolveStatus { Converged, Diverged, NotFinite };

const char* to_string(SolveStatus s);

struct SolverState {
  DofVector x;
  double eps_pre = 0.0;
  std::vector<StepRecord> history;
  SolveStatus status = SolveStatus::Converged;
  bool converged = false;
  double force_tolerance = 0.0;
  std::string message;
};

/// Called after every accepted load step.
using StepCallback = std::function<void(const StepRecord&, const DofVector&)>;

/// Quasi-static actuation from the rest state to schedule.target.
///
/// `distances` supplies the rest-configuration distance field; each load
/// step rescales it to the current eps_pre. Failed steps are halved down to
/// schedule.min_step; steps converging within config.fast_iterations grow by
/// config.step_growth up to schedule.max_step.
SolverState solve_equilibrium(const Mesh& mesh, const EnergyParams& params,
                              const ThermalField& distances, const StimulusSchedule& schedule,
                              const SolverConfig& config, const StepCallback& on_step = {});

/// Same, starting from an arbitrary configuration.
SolverState solve_equilibrium(const Mesh& mesh, const DofVector& start,
                              const EnergyParams& params, const ThermalField& distances,
                              const StimulusSchedule& schedule, const SolverConfig& config,
                              const StepCallback& on_step = {});

}  // namespace morphshell
