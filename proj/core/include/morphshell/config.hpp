#pragma once

#include "morphshell/material.hpp"
#include "morphshell/metrics.hpp"
#include "morphshell/solver.hpp"
#include "morphshell/stimulus.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace morphshell {

/// Configuration error carrying the file and line of the offending entry.
class ConfigError : public InputError {
 public:
  ConfigError(const std::string& location, const std::string& message)
      : InputError(location + ": " + message) {}
};

/// A parsed run configuration. Relative paths are resolved against the
/// directory of the configuration file. Keys that were present are
/// remembered with their line numbers so that downstream errors can point
/// back at the entry.
///
///     mesh:      path, regions | bilayer_triangles
///     material:  layer1 {young_modulus, thickness}, layer2 {...},
///                stretch_scale, beta, l0
///     schedule:  target | (temperature_ratio, shrink_curve),
///                initial_step, min_step, max_step, perturbation, decay
///     solver:    mode, tolerance, force_tolerance, max_iterations,
///                constraints, pinned_dofs, time_step, density, thickness,
///                max_time_steps
///     output:    directory, snapshot_every
///     metrics:   reference, reference_regions, resolution, margin,
///                box {lower, upper}
struct RunConfig {
  std::filesystem::path source;  // the configuration file, or a label

  std::filesystem::path mesh_path;
  std::optional<std::filesystem::path> region_path;
  std::optional<std::vector<int>> bilayer_triangles;

  MaterialConfig material;
  std::optional<double> beta;

  std::optional<double> target;
  std::optional<double> temperature_ratio;
  std::optional<std::filesystem::path> shrink_curve;
  StimulusSchedule schedule;               // target filled in by resolve_target
  std::optional<double> perturbation;      // default 1e-4 * k_b,single / l0^2

  SolverConfig solver;

  std::filesystem::path output_dir = "output";
  int snapshot_every = 1;                  // 0 = final state only

  std::optional<std::filesystem::path> reference;
  std::optional<std::filesystem::path> reference_regions;
  int resolution = 10;
  double margin = 0.05;
  std::optional<BoundingBox> box;

  std::map<std::string, int> lines;        // dotted key -> 1-based line

  /// "file:line" of a dotted key, or just the file when the key is absent.
  std::string where(const std::string& key) const;

  /// Range checks on every field; throws ConfigError.
  void validate() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

/// Parses YAML text; relative paths resolve against `base_dir`.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir,
                           const std::filesystem::path& source = "<config>");

/// Actuation target eps_pre: the configured target, or L/L0 - 1 of the
/// shrink curve at the configured temperature ratio.
double resolve_target(const RunConfig& config);

}  // namespace morphshell
