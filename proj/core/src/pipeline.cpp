#include "morphshell/pipeline.hpp"

#include "morphshell/mesh_io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

namespace morphshell {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10e", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

std::string step_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%04d", index);
  return buf;
}

template <class F>
auto at_entry(const RunConfig& cfg, const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const InputError& e) {
    throw ConfigError(cfg.where(key), e.what());
  } catch (const GeometryError& e) {
    throw ConfigError(cfg.where(key), e.what());
  }
}

}  // namespace

double default_perturbation(const EnergyParams& params) {
  return 1e-4 * params.material.single.bend / (params.l0 * params.l0);
}

PreparedRun prepare_run(const RunConfig& config) {
  config.validate();
  const std::string mesh_key = config.region_path ? "mesh.regions"
                               : config.bilayer_triangles ? "mesh.bilayer_triangles"
                                                          : "mesh.path";
  Mesh mesh = at_entry(config, mesh_key, [&] {
    MeshData data = load_mesh_data(config.mesh_path, config.region_path);
    if (config.bilayer_triangles) data.bilayer_triangles = *config.bilayer_triangles;
    return build_mesh(std::move(data.nodes), std::move(data.triangles), data.bilayer_triangles);
  });

  MaterialConfig mc = config.material;
  if (!mc.l0) mc.l0 = mesh.mean_edge_length();
  const MaterialModel material = at_entry(config, "material", [&] { return assemble_material(mc); });
  EnergyParams params = EnergyParams::with_default_beta(material, *mc.l0);
  if (config.beta) params.beta = *config.beta;

  StimulusSchedule schedule = config.schedule;
  schedule.target = resolve_target(config);
  schedule.perturbation = config.perturbation.value_or(default_perturbation(params));
  at_entry(config, "schedule", [&] { schedule.validate(); });

  ThermalField distances =
      at_entry(config, "mesh.path", [&] { return thermal_field(mesh, schedule.target); });

  at_entry(config, "solver.pinned_dofs", [&] {
    for (int d : config.solver.pinned_dofs) {
      if (d < 0 || d >= mesh.num_dofs()) {
        throw InputError("pinned DOF " + std::to_string(d) + " out of range for " +
                         std::to_string(mesh.num_dofs()) + " DOFs");
      }
    }
  });

  std::optional<TriangleSurface> reference;
  if (config.reference) {
    reference = at_entry(config, "metrics.reference", [&] {
      MeshData data = load_mesh_data(*config.reference, config.reference_regions);
      TriangleSurface s{std::move(data.nodes), std::move(data.triangles)};
      s.validate();
      return s;
    });
  }
  return {config, std::move(mesh), params, std::move(distances), schedule, std::move(reference)};
}

ShapeComparison compare_shapes(const TriangleSurface& sim, const TriangleSurface& ref,
                               int resolution, double margin, const std::optional<BoundingBox>& box) {
  const AlignmentResult alignment = align(sim, ref);
  const TriangleSurface aligned = alignment.transform.apply(sim);
  const BoundingBox b = box.value_or(BoundingBox::cube_around(aligned, ref, margin));
  return {alignment, ssim(voxelize(aligned, b, resolution), voxelize(ref, b, resolution)),
          aspect_ratio(sim), aspect_ratio(ref)};
}

void write_ssim_report(const fs::path& path, const ShapeComparison& c) {
  auto out = open_out(path);
  const VoxelVolume& m = c.ssim.map;
  const SimilarityTransform& t = c.alignment.transform;
  out << "# mean_ssim " << num(c.ssim.mean) << "\n";
  out << "# resolution " << m.resolution() << "\n";
  out << "# box_lower " << num(m.box().lower.x()) << ' ' << num(m.box().lower.y()) << ' '
      << num(m.box().lower.z()) << "\n";
  out << "# box_upper " << num(m.box().upper.x()) << ' ' << num(m.box().upper.y()) << ' '
      << num(m.box().upper.z()) << "\n";
  out << "# k1 " << num(c.ssim.k1) << " k2 " << num(c.ssim.k2) << "\n";
  out << "# alignment_scale " << num(t.scale) << "\n";
  out << "# alignment_rms " << num(c.alignment.rms) << "\n";
  out << "# alignment_iterations " << c.alignment.iterations << "\n";
  out << "# sim_aspect_ratio " << num(c.sim_aspect_ratio) << "\n";
  out << "# ref_aspect_ratio " << num(c.ref_aspect_ratio) << "\n";
  out << "i\tj\tk\tssim\n";
  for (int k = 0; k < m.resolution(); ++k) {
    for (int j = 0; j < m.resolution(); ++j) {
      for (int i = 0; i < m.resolution(); ++i) {
        out << i << '\t' << j << '\t' << k << '\t' << num(m.at(i, j, k)) << "\n";
      }
    }
  }
}

void write_edge_table(const fs::path& path, const Mesh& mesh, const EnergyReport& report,
                      const ThermalField& field) {
  auto out = open_out(path);
  out << "edge\tnode0\tnode1\tregion\trest_length\tstrain\tthermal_strain\tstretch_energy\n";
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const Edge& ed = mesh.edge(e);
    const auto i = static_cast<std::size_t>(e);
    out << e << '\t' << ed.nodes[0] << '\t' << ed.nodes[1] << '\t' << to_string(ed.region) << '\t'
        << num(ed.rest_length) << '\t' << num(report.strain[i]) << '\t' << num(field.eps_th[i])
        << '\t' << num(report.stretch_energy[i]) << "\n";
  }
}

void write_hinge_table(const fs::path& path, const Mesh& mesh, const EnergyReport& report) {
  auto out = open_out(path);
  out << "hinge\tedge\tregion\tangle\tdelta_strain\tdelta_strain_elastic\tdelta_strain_thermal\t"
         "bend_energy\n";
  for (int h = 0; h < mesh.num_hinges(); ++h) {
    const Hinge& hg = mesh.hinge(h);
    const auto j = static_cast<std::size_t>(h);
    out << h << '\t' << hg.edge << '\t' << to_string(mesh.edge(hg.edge).region) << '\t'
        << num(report.angle[j]) << '\t' << num(report.delta_strain[j]) << '\t'
        << num(report.delta_strain_elastic[j]) << '\t' << num(report.delta_strain_thermal[j])
        << '\t' << num(report.bend_energy[j]) << "\n";
  }
}

void write_run_log(const fs::path& path, const std::vector<StepRecord>& history) {
  auto out = open_out(path);
  out << "step\teps_pre\tperturbation\tstep_size\titerations\trelative_step\tmax_force\tenergy\n";
  for (const StepRecord& r : history) {
    out << r.index + 1 << '\t' << num(r.eps_pre) << '\t' << num(r.perturbation) << '\t'
        << num(r.step_size) << '\t' << r.iterations << '\t' << num(r.relative_step) << '\t'
        << num(r.max_force) << '\t' << num(r.energy) << "\n";
  }
}

AngleExtreme max_abs_angle(const Mesh& mesh, const DofVector& x) {
  AngleExtreme out;
  for (int h = 0; h < mesh.num_hinges(); ++h) {
    const double a = std::abs(dihedral_angle(mesh, x, h));
    if (a > out.value) {
      out.value = a;
      out.hinge = h;
      out.region = mesh.edge(mesh.hinge(h).edge).region;
    }
  }
  return out;
}

std::string format_summary(const RunSummary& s) {
  std::ostringstream out;
  out << "status\t" << to_string(s.status) << "\n";
  if (!s.message.empty()) out << "message\t" << s.message << "\n";
  out << "target_eps_pre\t" << num(s.target) << "\n";
  out << "eps_pre\t" << num(s.eps_pre) << "\n";
  out << "steps\t" << s.steps << "\n";
  out << "snapshots\t" << s.snapshots << "\n";
  out << "energy\t" << num(s.energy) << "\n";
  out << "force_tolerance\t" << num(s.force_tolerance) << "\n";
  out << "height\t" << num(s.aspect.height) << "\n";
  out << "diameter\t" << num(s.aspect.diameter) << "\n";
  out << "aspect_ratio\t" << num(s.aspect_ratio) << "\n";
  out << "max_abs_angle\t" << num(s.max_abs_angle) << "\n";
  out << "max_angle_hinge\t" << s.max_angle_hinge << "\n";
  out << "max_angle_region\t" << to_string(s.max_angle_region) << "\n";
  if (s.comparison) {
    out << "mean_ssim\t" << num(s.comparison->ssim.mean) << "\n";
    out << "alignment_rms\t" << num(s.comparison->alignment.rms) << "\n";
    out << "reference_aspect_ratio\t" << num(s.comparison->ref_aspect_ratio) << "\n";
  }
  return out.str();
}

RunSummary execute_run(const PreparedRun& run, std::ostream& log) {
  const RunConfig& cfg = run.config;
  const Mesh& mesh = run.mesh;
  fs::create_directories(cfg.output_dir);

  RunSummary summary;
  summary.target = run.schedule.target;

  auto snapshot = [&](const StepRecord& rec, const DofVector& x) {
    const ThermalField field = rec.eps_pre == 0.0 ? ThermalField::zero(mesh.num_edges())
                                                  : run.distances.rescaled(rec.eps_pre);
    const EnergyReport report = total_energy(mesh, x, run.params, field);
    const std::string base = step_name(rec.index + 1);
    write_obj(cfg.output_dir / (base + ".obj"), mesh, x);
    write_edge_table(cfg.output_dir / (base + "_edges.tsv"), mesh, report, field);
    write_hinge_table(cfg.output_dir / (base + "_hinges.tsv"), mesh, report);
    ++summary.snapshots;
  };

  int last_written = -1;
  const SolverState state = solve_equilibrium(
      mesh, run.params, run.distances, run.schedule, cfg.solver,
      [&](const StepRecord& rec, const DofVector& x) {
        log << step_name(rec.index + 1) << " eps_pre " << num(rec.eps_pre) << " iterations "
            << rec.iterations << " max_force " << num(rec.max_force) << "\n";
        const bool at_target = rec.eps_pre == run.schedule.target;
        if (at_target || (cfg.snapshot_every > 0 && (rec.index + 1) % cfg.snapshot_every == 0)) {
          snapshot(rec, x);
          last_written = rec.index;
        }
      });

  // A failed solve still leaves its last accepted state on disk.
  if (!state.history.empty() && last_written != state.history.back().index) {
    snapshot(state.history.back(), state.x);
  }

  summary.status = state.status;
  summary.message = state.message;
  summary.eps_pre = state.eps_pre;
  summary.steps = static_cast<int>(state.history.size());
  summary.force_tolerance = state.force_tolerance;
  if (!state.history.empty()) summary.energy = state.history.back().energy;
  const TriangleSurface shape = TriangleSurface::from_mesh(mesh, state.x);
  summary.aspect = aspect_axes(shape);
  summary.aspect_ratio = summary.aspect.diameter > 0.0 ? summary.aspect.height / summary.aspect.diameter : 0.0;
  const AngleExtreme extreme = max_abs_angle(mesh, state.x);
  summary.max_abs_angle = extreme.value;
  summary.max_angle_hinge = extreme.hinge;
  summary.max_angle_region = extreme.region;

  write_run_log(cfg.output_dir / "run_log.tsv", state.history);
  if (run.reference && state.converged) {
    summary.comparison = compare_shapes(shape, *run.reference, cfg.resolution, cfg.margin, cfg.box);
    write_ssim_report(cfg.output_dir / "ssim_report.tsv", *summary.comparison);
  }
  auto out = open_out(cfg.output_dir / "summary.txt");
  out << format_summary(summary);
  return summary;
}

std::vector<RunSummary> execute_sweep(const std::vector<PreparedRun>& runs, int jobs,
                                      std::ostream& log) {
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (std::size_t j = i + 1; j < runs.size(); ++j) {
      if (fs::weakly_canonical(runs[i].config.output_dir) ==
          fs::weakly_canonical(runs[j].config.output_dir)) {
        throw InputError("sweep runs " + std::to_string(i) + " and " + std::to_string(j) +
                         " share the output directory '" + runs[i].config.output_dir.string() + "'");
      }
    }
  }
  std::vector<RunSummary> results(runs.size());
  std::vector<std::string> logs(runs.size());
  std::vector<std::exception_ptr> errors(runs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      std::ostringstream buf;
      try {
        results[i] = execute_run(runs[i], buf);
      } catch (...) {
        errors[i] = std::current_exception();
      }
      logs[i] = buf.str();
    }
  };
  const int n = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(runs.size(), 1)));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t i = 0; i < runs.size(); ++i) {
    log << "== " << runs[i].config.output_dir.string() << "\n" << logs[i];
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace morphshell
