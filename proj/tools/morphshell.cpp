#include "morphshell/config.hpp"
#include "morphshell/mesh_io.hpp"
#include "morphshell/pipeline.hpp"
#include "morphshell/verification.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace morphshell;

namespace {

/// Command-line values that override configuration entries.
struct RunFlags {
  std::optional<double> target;
  std::optional<std::string> output;
  std::optional<double> tolerance;
  std::optional<std::string> mode;
  std::optional<int> snapshot_every;
  std::optional<double> perturbation;
  std::optional<std::string> reference;
  std::optional<int> resolution;

  void add_to(CLI::App* app) {
    app->add_option("--target", target, "Target eps_pre (<= 0); replaces schedule.target");
    app->add_option("-o,--output", output, "Output directory; replaces output.directory");
    app->add_option("--tolerance", tolerance, "Newton tolerance on |dX|/|X|");
    app->add_option("--mode", mode, "Solver mode")->check(CLI::IsMember({"static", "dynamic"}));
    app->add_option("--snapshot-every", snapshot_every, "Snapshot cadence in accepted steps (0 = final only)");
    app->add_option("--perturbation", perturbation, "Perturbation load per node at zero actuation");
    app->add_option("--reference", reference, "Reference shape for SSIM comparison");
    app->add_option("--resolution", resolution, "Voxel grid resolution N_s");
  }

  void apply(RunConfig& cfg) const {
    if (target) {
      cfg.target = *target;
      cfg.temperature_ratio.reset();
    }
    if (output) cfg.output_dir = *output;
    if (tolerance) cfg.solver.tolerance = *tolerance;
    if (mode) cfg.solver.mode = *mode == "dynamic" ? SolverMode::Dynamic : SolverMode::Static;
    if (snapshot_every) cfg.snapshot_every = *snapshot_every;
    if (perturbation) cfg.perturbation = *perturbation;
    if (reference) cfg.reference = fs::path(*reference);
    if (resolution) cfg.resolution = *resolution;
  }
};

int cmd_run(const std::string& config_path, const RunFlags& flags) {
  RunConfig cfg = load_run_config(config_path);
  flags.apply(cfg);
  const PreparedRun run = prepare_run(cfg);
  const RunSummary s = execute_run(run, std::cout);
  std::cout << format_summary(s);
  return s.exit_code();
}

int cmd_verify(const VerificationOptions& options) {
  bool ok = true;
  for (const CheckResult& c : run_verification(options)) {
    std::printf("%-28s %-4s value %.3e limit %.1e\n", c.name.c_str(), c.passed ? "ok" : "FAIL",
                c.value, c.limit);
    ok = ok && c.passed;
  }
  return ok ? kExitOk : kExitVerificationBreach;
}

TriangleSurface load_surface(const std::string& path) {
  MeshData data = load_mesh_data(path);
  TriangleSurface s{std::move(data.nodes), std::move(data.triangles)};
  s.validate();
  return s;
}

int cmd_compare(const std::string& sim, const std::string& ref, int resolution, double margin,
                const std::optional<std::string>& report) {
  if (resolution < 2) throw InputError("--resolution must be >= 2");
  if (!(margin >= 0.0)) throw InputError("--margin must be >= 0");
  const ShapeComparison c = compare_shapes(load_surface(sim), load_surface(ref), resolution, margin);
  std::printf("mean_ssim\t%.10e\nalignment_scale\t%.10e\nalignment_rms\t%.10e\n"
              "sim_aspect_ratio\t%.10e\nref_aspect_ratio\t%.10e\n",
              c.ssim.mean, c.alignment.transform.scale, c.alignment.rms, c.sim_aspect_ratio,
              c.ref_aspect_ratio);
  if (report) write_ssim_report(*report, c);
  return kExitOk;
}

int cmd_sweep(const std::vector<std::string>& configs, const std::vector<double>& targets,
              const RunFlags& flags, int jobs) {
  std::vector<PreparedRun> runs;
  for (const std::string& path : configs) {
    RunConfig base = load_run_config(path);
    flags.apply(base);
    if (targets.empty()) {
      runs.push_back(prepare_run(base));
      continue;
    }
    for (double t : targets) {
      RunConfig cfg = base;
      cfg.target = t;
      cfg.temperature_ratio.reset();
      char name[32];
      std::snprintf(name, sizeof name, "eps_%.4f", t);
      cfg.output_dir = base.output_dir / name;
      runs.push_back(prepare_run(cfg));
    }
  }
  const std::vector<RunSummary> results = execute_sweep(runs, jobs, std::cout);
  int code = kExitOk;
  std::printf("output\tstatus\teps_pre\taspect_ratio\tmax_abs_angle\n");
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const RunSummary& s = results[i];
    std::printf("%s\t%s\t%.10e\t%.10e\t%.10e\n", runs[i].config.output_dir.string().c_str(),
                to_string(s.status), s.eps_pre, s.aspect_ratio, s.max_abs_angle);
    if (s.exit_code() != kExitOk) code = s.exit_code();
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bilayer shell morphing simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Solve one configuration and write snapshots");
  std::string run_config;
  RunFlags run_flags;
  run->add_option("config", run_config, "Run configuration (YAML)")->required();
  run_flags.add_to(run);

  auto* verify = app.add_subcommand("verify", "Derivative checks and analytic benchmarks");
  VerificationOptions vopt;
  std::vector<std::string> checks;
  verify->add_option("--samples", vopt.samples, "Random states per FD mesh")->check(CLI::PositiveNumber);
  verify->add_option("--seed", vopt.seed, "Random seed");
  verify->add_option("--checks", checks, "Subset of: fd, classical, uniaxial, cantilever")
      ->delimiter(',')
      ->check(CLI::IsMember({"fd", "classical", "uniaxial", "cantilever"}));

  auto* compare = app.add_subcommand("compare", "Align two shapes and report SSIM and h/d");
  std::string sim_path, ref_path;
  int resolution = 10;
  double margin = 0.05;
  std::optional<std::string> report;
  compare->add_option("simulated", sim_path, "Simulated shape (.obj or native mesh)")->required();
  compare->add_option("reference", ref_path, "Reference shape (.obj or native mesh)")->required();
  compare->add_option("--resolution", resolution, "Voxel grid resolution N_s");
  compare->add_option("--margin", margin, "Relative margin of the voxel cube");
  compare->add_option("--report", report, "Write the per-voxel SSIM report here");

  auto* sweep = app.add_subcommand("sweep", "Run several configurations or targets concurrently");
  std::vector<std::string> sweep_configs;
  std::vector<double> targets;
  int jobs = 1;
  RunFlags sweep_flags;
  sweep->add_option("configs", sweep_configs, "Run configurations")->required();
  sweep->add_option("--targets", targets, "eps_pre values; each goes to <output>/eps_<value>")
      ->delimiter(',');
  sweep->add_option("-j,--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);
  sweep_flags.add_to(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (*run) return cmd_run(run_config, run_flags);
    if (*verify) {
      if (!checks.empty()) {
        auto has = [&](const char* c) { return std::find(checks.begin(), checks.end(), c) != checks.end(); };
        vopt.finite_differences = has("fd");
        vopt.classical_limit = has("classical");
        vopt.uniaxial = has("uniaxial");
        vopt.cantilever = has("cantilever");
      }
      return cmd_verify(vopt);
    }
    if (*compare) return cmd_compare(sim_path, ref_path, resolution, margin, report);
    if (*sweep) return cmd_sweep(sweep_configs, targets, sweep_flags, jobs);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
