#pragma once

#include "morphshell/mesh.hpp"

#include <filesystem>
#include <utility>
#include <vector>

namespace morphshell {

/// Measured substrate contraction L/L0 against normalised temperature T/Tg.
class ShrinkCurve {
 public:
  struct Sample {
    double t_ratio;
    double length_ratio;
  };

  /// Validates: non-empty, T/Tg strictly increasing, L/L0 in (0, 1], and
  /// L/L0 = 1 wherever T/Tg <= 1.
  explicit ShrinkCurve(std::vector<Sample> samples, double glass_transition_kelvin = 366.5);

  /// Two-column text (T/Tg, L/L0); `#` starts a comment.
  static ShrinkCurve load(const std::filesystem::path& path);

  const std::vector<Sample>& samples() const { return samples_; }
  double glass_transition() const { return tg_; }

 private:
  std::vector<Sample> samples_;
  double tg_;
};

/// L/L0 - 1 at `t_ratio`: zero at or below T/Tg = 1, linear between
/// samples, held at the last sample beyond the curve.
double shrink_to_strain(const ShrinkCurve& curve, double t_ratio);

/// Rest-configuration distance of every edge midpoint to the nearest bilayer
/// edge midpoint. Zero on bilayer edges.
struct DistanceField {
  std::vector<double> distance;
  double max_distance = 0.0;
  int argmax_edge = -1;
};

/// Brute-force nearest search. Throws InputError when the mesh has no
/// bilayer edge or no single-layer edge.
DistanceField edge_distances(const Mesh& mesh);

/// Prescribed per-edge thermal strain, eps_th = eps_pre * d / d_max on
/// single-layer edges and 0 on bilayer edges.
struct ThermalField {
  std::vector<double> eps_th;
  std::vector<double> distance;
  double eps_pre = 0.0;
  double max_distance = 0.0;

  /// All-zero field for `num_edges` edges (no distance information).
  static ThermalField zero(int num_edges);
  static ThermalField from_distances(const DistanceField& d, double eps_pre);

  /// Same distances, different driving strain.
  ThermalField rescaled(double new_eps_pre) const;
};

/// Throws InputError if eps_pre > 0 or the regions are degenerate.
ThermalField thermal_field(const Mesh& mesh, double eps_pre);

enum class PerturbationDecay { Linear, Constant };

struct StimulusSchedule {
  double target = 0.0;          // eps_pre at the end of actuation, <= 0
  double initial_step = 0.02;
  double min_step = 1e-4;
  double max_step = 0.05;
  double perturbation = 0.0;    // N per node at zero actuation
  PerturbationDecay decay = PerturbationDecay::Linear;

  void validate() const;

  /// Perturbation magnitude at actuation level eps; exactly 0 at the target.
  double perturbation_at(double eps) const;
};

struct LoadStep {
  double eps_pre;
  double perturbation;
};

/// Nominal load path with the initial step size: eps_pre marches from 0 to
/// the target (first entry one step in, last entry exactly the target).
/// A zero target yields the single step (0, 0).
std::vector<LoadStep> plan_steps(const StimulusSchedule& schedule);

}  // namespace morphshell
