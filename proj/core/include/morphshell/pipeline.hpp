#pragma once

#include "morphshell/config.hpp"
#include "morphshell/energy.hpp"
#include "morphshell/metrics.hpp"
#include "morphshell/solver.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace morphshell {

enum ExitCode : int {
  kExitOk = 0,
  kExitInputError = 2,
  kExitNonConvergence = 3,
  kExitVerificationBreach = 4,
};

/// Everything a run needs, loaded and checked before any output is written.
struct PreparedRun {
  RunConfig config;
  Mesh mesh;
  EnergyParams params;
  ThermalField distances;     // distance field at the target eps_pre
  StimulusSchedule schedule;  // target and perturbation resolved
  std::optional<TriangleSurface> reference;
};

/// Loads the mesh, curve and reference shape and assembles the model.
/// Errors are rethrown as ConfigError pointing at the responsible entry.
PreparedRun prepare_run(const RunConfig& config);

/// Default perturbation per node: 1e-4 * k_b,single / l0^2.
double default_perturbation(const EnergyParams& params);

/// Shape comparison: similarity alignment of `sim` onto `ref`, voxel SSIM
/// in a common cube, and both aspect ratios.
struct ShapeComparison {
  AlignmentResult alignment;
  SsimResult ssim;
  double sim_aspect_ratio = 0.0;
  double ref_aspect_ratio = 0.0;
};

ShapeComparison compare_shapes(const TriangleSurface& sim, const TriangleSurface& ref,
                               int resolution, double margin,
                               const std::optional<BoundingBox>& box = std::nullopt);

/// Columnar report: header comments, then `i j k ssim` per voxel.
void write_ssim_report(const std::filesystem::path& path, const ShapeComparison& c);

/// Per-edge table: edge, node0, node1, region, rest_length, strain,
/// thermal_strain, stretch_energy.
void write_edge_table(const std::filesystem::path& path, const Mesh& mesh,
                      const EnergyReport& report, const ThermalField& field);

/// Per-hinge table: hinge, edge, region, angle, delta_strain,
/// delta_strain_elastic, delta_strain_thermal, bend_energy.
void write_hinge_table(const std::filesystem::path& path, const Mesh& mesh,
                       const EnergyReport& report);

void write_run_log(const std::filesystem::path& path, const std::vector<StepRecord>& history);

struct RunSummary {
  SolveStatus status = SolveStatus::Converged;
  std::string message;
  double eps_pre = 0.0;
  double target = 0.0;
  int steps = 0;
  int snapshots = 0;
  double energy = 0.0;
  double force_tolerance = 0.0;
  AspectFrame aspect;
  double aspect_ratio = 0.0;
  double max_abs_angle = 0.0;
  int max_angle_hinge = -1;
  Region max_angle_region = Region::SingleLayer;
  std::optional<ShapeComparison> comparison;

  int exit_code() const {
    return status == SolveStatus::Converged ? kExitOk : kExitNonConvergence;
  }
};

/// Largest |theta| over all hinges of configuration x.
struct AngleExtreme {
  double value = 0.0;
  int hinge = -1;
  Region region = Region::SingleLayer;
};
AngleExtreme max_abs_angle(const Mesh& mesh, const DofVector& x);

/// load -> solve -> export. Writes into config.output_dir:
/// step_NNNN.obj, step_NNNN_edges.tsv, step_NNNN_hinges.tsv per snapshot,
/// run_log.tsv, summary.txt, and ssim_report.tsv when a reference is set.
/// Progress lines go to `log`.
RunSummary execute_run(const PreparedRun& run, std::ostream& log);

/// Runs several prepared configurations on up to `jobs` threads. Results
/// come back in input order; each run's progress is written to `log` as one
/// block after all runs finish.
std::vector<RunSummary> execute_sweep(const std::vector<PreparedRun>& runs, int jobs,
                                      std::ostream& log);

std::string format_summary(const RunSummary& s);

}  // namespace morphshell
