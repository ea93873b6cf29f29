#include "morphshell/config.hpp"
#include "morphshell/mesh_io.hpp"
#include "morphshell/pipeline.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace morphshell;
using namespace morphshell::testing;
namespace fs = std::filesystem;

namespace {

std::string strip_config(const std::string& extra_schedule = "target: -0.2") {
  return "mesh:\n"
         "  path: " + (test_data_dir() / "small_strip.mesh").string() + "\n"
         "material:\n"
         "  layer1: {young_modulus: 1.0, thickness: 0.3}\n"
         "  layer2: {young_modulus: 3.0, thickness: 0.7}\n"
         "schedule:\n"
         "  " + extra_schedule + "\n"
         "  initial_step: 0.05\n"
         "  max_step: 0.1\n"
         "solver:\n"
         "  tolerance: 1.0e-6\n"
         "output:\n"
         "  directory: out\n";
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Config, ParsesAndRecordsLines) {
  const RunConfig c = parse_run_config(strip_config(), "/base", "run.yaml");
  EXPECT_EQ(c.mesh_path, test_data_dir() / "small_strip.mesh");
  EXPECT_EQ(*c.target, -0.2);
  EXPECT_EQ(c.schedule.initial_step, 0.05);
  EXPECT_EQ(c.solver.tolerance, 1e-6);
  EXPECT_EQ(c.material.layer2->young_modulus, 3.0);
  EXPECT_EQ(c.output_dir, fs::path("/base/out"));
  EXPECT_EQ(c.where("schedule.target"), "run.yaml:7");
  EXPECT_EQ(c.where("solver.mode"), "run.yaml:10");
  EXPECT_EQ(c.where("nothing.here"), "run.yaml");
}

TEST(Config, DefaultsWhenOptionalBlocksAbsent) {
  const RunConfig c = parse_run_config(strip_config(), "/base");
  EXPECT_EQ(c.snapshot_every, 1);
  EXPECT_EQ(c.resolution, 10);
  EXPECT_EQ(c.margin, 0.05);
  EXPECT_EQ(c.solver.mode, SolverMode::Static);
  EXPECT_EQ(c.solver.constraints, ConstraintScheme::ThreeTwoOne);
  EXPECT_EQ(c.solver.max_iterations, 500);
  EXPECT_FALSE(c.beta.has_value());
  EXPECT_FALSE(c.perturbation.has_value());
  EXPECT_EQ(c.material.stretch_scale, 10.0);
}

TEST(Config, UnknownKeyNamesFileAndLine) {
  std::string text = strip_config();
  text.insert(text.find("  layer2"), "  bogus: 1\n");
  const std::string msg = error_of([&] { parse_run_config(text, "/base", "run.yaml"); });
  EXPECT_NE(msg.find("run.yaml:5"), std::string::npos) << msg;
  EXPECT_NE(msg.find("material.bogus"), std::string::npos) << msg;
  EXPECT_NE(error_of([&] { parse_run_config("meshes: {}\n", "/b"); }).find("unknown key 'meshes'"),
            std::string::npos);
}

TEST(Config, TypeAndChoiceErrors) {
  std::string text = strip_config();
  text.replace(text.find("1.0e-6"), 6, "tight");
  EXPECT_NE(error_of([&] { parse_run_config(text, "/b", "r.yaml"); }).find("r.yaml:11"), std::string::npos);
  EXPECT_NE(error_of([&] { parse_run_config(strip_config() + "  bad: [\n", "/b", "r.yaml"); }).find("r.yaml:"),
            std::string::npos);
  const std::string mode = strip_config() + "metrics:\n  resolution: 8\n";
  EXPECT_NO_THROW(parse_run_config(mode, "/b"));
  std::string bad_mode = strip_config();
  bad_mode.insert(bad_mode.find("  tolerance"), "  mode: implicit\n");
  EXPECT_NE(error_of([&] { parse_run_config(bad_mode, "/b"); }).find("must be one of"), std::string::npos);
  EXPECT_THROW(parse_run_config("", "/b"), ConfigError);
}

TEST(Config, ConflictingTargetsRejected) {
  const std::string text = strip_config("target: -0.2\n  temperature_ratio: 1.1");
  EXPECT_NE(error_of([&] { parse_run_config(text, "/b"); }).find("not both"), std::string::npos);
}

TEST(Config, TemperatureRatioResolvesThroughCurve) {
  const std::string text = strip_config("temperature_ratio: 1.10\n  shrink_curve: " +
                                        (data_dir() / "shrink_curve.txt").string());
  RunConfig c = parse_run_config(text, "/b");
  c.validate();
  EXPECT_NEAR(resolve_target(c), -0.34, 1e-15);
}

TEST(Config, ValidatePointsAtOffendingEntry) {
  const auto dir = scratch_dir("config_validate");
  std::string text = strip_config();
  text.replace(text.find(test_data_dir().string()), (test_data_dir() / "small_strip.mesh").string().size(),
               "missing.mesh");
  std::ofstream(dir / "run.yaml") << text;
  const std::string msg = error_of([&] { load_run_config(dir / "run.yaml"); });
  EXPECT_NE(msg.find("run.yaml:2"), std::string::npos) << msg;
  EXPECT_NE(msg.find((dir / "missing.mesh").string()), std::string::npos) << msg;

  RunConfig ok = parse_run_config(strip_config(), dir, dir / "run.yaml");
  ok.target = 0.3;
  EXPECT_NE(error_of([&] { ok.validate(); }).find("run.yaml:7"), std::string::npos);
  ok.target = -0.2;
  ok.material.layer1->thickness = -1.0;
  EXPECT_NE(error_of([&] { ok.validate(); }).find("run.yaml:4:"), std::string::npos);
  ok.material.layer1->thickness = 0.3;
  ok.resolution = 1;
  EXPECT_THROW(ok.validate(), ConfigError);
  ok.resolution = 10;
  EXPECT_NO_THROW(ok.validate());
}

TEST(Pipeline, PrepareFillsDefaults) {
  const RunConfig c = parse_run_config(strip_config(), scratch_dir("prepare"));
  const PreparedRun run = prepare_run(c);
  const double l0 = run.mesh.mean_edge_length();
  EXPECT_EQ(run.params.l0, l0);
  EXPECT_DOUBLE_EQ(run.params.coupling(), 1.0);
  EXPECT_EQ(run.schedule.target, -0.2);
  EXPECT_DOUBLE_EQ(run.schedule.perturbation, default_perturbation(run.params));
  EXPECT_DOUBLE_EQ(default_perturbation(run.params), 1e-4 * run.params.material.single.bend / (l0 * l0));
  EXPECT_EQ(run.distances.eps_pre, -0.2);
}

TEST(Pipeline, InputErrorsLeaveNoOutput) {
  const auto dir = scratch_dir("no_output");
  RunConfig c = parse_run_config(strip_config(), dir);
  c.solver.constraints = ConstraintScheme::Explicit;
  c.solver.pinned_dofs = {0, 1, 2, 3, 4, 100000};
  EXPECT_THROW(prepare_run(c), InputError);
  c = parse_run_config(strip_config(), dir);
  c.reference = dir / "absent.obj";
  EXPECT_THROW(prepare_run(c), InputError);
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Pipeline, RunWritesSnapshotsAndIsReproducible) {
  const auto dir = scratch_dir("run_twice");
  std::ofstream(dir / "run.yaml") << strip_config();
  std::ostringstream log1, log2;
  RunConfig c = load_run_config(dir / "run.yaml");
  const RunSummary s1 = execute_run(prepare_run(c), log1);
  ASSERT_EQ(s1.exit_code(), kExitOk) << s1.message;
  EXPECT_EQ(s1.eps_pre, -0.2);
  EXPECT_GT(s1.aspect_ratio, 0.0);
  EXPECT_EQ(s1.snapshots, s1.steps);
  for (int k = 1; k <= s1.steps; ++k) {
    char base[32];
    std::snprintf(base, sizeof base, "step_%04d", k);
    EXPECT_TRUE(fs::exists(dir / "out" / (std::string(base) + ".obj")));
    EXPECT_TRUE(fs::exists(dir / "out" / (std::string(base) + "_edges.tsv")));
    EXPECT_TRUE(fs::exists(dir / "out" / (std::string(base) + "_hinges.tsv")));
  }
  EXPECT_TRUE(fs::exists(dir / "out" / "run_log.tsv"));
  EXPECT_EQ(slurp(dir / "out" / "summary.txt"), format_summary(s1));

  c.output_dir = dir / "again";
  const RunSummary s2 = execute_run(prepare_run(c), log2);
  EXPECT_EQ(log1.str().size(), log2.str().size());
  for (const auto& entry : fs::directory_iterator(dir / "out")) {
    EXPECT_EQ(slurp(entry.path()), slurp(dir / "again" / entry.path().filename())) << entry.path();
  }
  EXPECT_EQ(s1.aspect_ratio, s2.aspect_ratio);

  // The final snapshot reloads as the solved shape.
  char last[32];
  std::snprintf(last, sizeof last, "step_%04d.obj", s1.steps);
  const MeshData d = load_mesh_data(dir / "out" / last);
  EXPECT_NEAR(aspect_ratio(TriangleSurface{d.nodes, d.triangles}), s1.aspect_ratio, 1e-8);
}

TEST(Pipeline, SnapshotCadence) {
  const auto dir = scratch_dir("cadence");
  RunConfig c = parse_run_config(strip_config(), dir);
  c.snapshot_every = 0;
  std::ostringstream log;
  const RunSummary s = execute_run(prepare_run(c), log);
  ASSERT_EQ(s.exit_code(), kExitOk);
  EXPECT_EQ(s.snapshots, 1);
  int objs = 0;
  for (const auto& e : fs::directory_iterator(dir / "out")) objs += e.path().extension() == ".obj";
  EXPECT_EQ(objs, 1);
}

TEST(Pipeline, ZeroTargetKeepsFlatSheet) {
  const auto dir = scratch_dir("zero_target");
  RunConfig c = parse_run_config(strip_config("target: 0"), dir);
  std::ostringstream log;
  const RunSummary s = execute_run(prepare_run(c), log);
  ASSERT_EQ(s.exit_code(), kExitOk);
  EXPECT_EQ(s.aspect_ratio, 0.0);
  EXPECT_EQ(s.max_abs_angle, 0.0);
  EXPECT_EQ(s.steps, 1);
}

TEST(Pipeline, ReferenceComparisonOnSelf) {
  const auto dir = scratch_dir("reference");
  RunConfig c = parse_run_config(strip_config(), dir);
  std::ostringstream log;
  const RunSummary first = execute_run(prepare_run(c), log);
  ASSERT_EQ(first.exit_code(), kExitOk);
  char last[32];
  std::snprintf(last, sizeof last, "step_%04d.obj", first.steps);
  c.reference = dir / "out" / last;
  c.output_dir = dir / "with_ref";
  const RunSummary s = execute_run(prepare_run(c), log);
  ASSERT_TRUE(s.comparison.has_value());
  EXPECT_NEAR(s.comparison->ssim.mean, 1.0, 1e-9);
  EXPECT_NEAR(s.comparison->ref_aspect_ratio, s.aspect_ratio, 1e-8);
  EXPECT_TRUE(fs::exists(dir / "with_ref" / "ssim_report.tsv"));
}

TEST(Pipeline, SweepRunsIntoSeparateDirectories) {
  const auto dir = scratch_dir("sweep");
  std::vector<PreparedRun> runs;
  for (double t : {-0.1, -0.2}) {
    RunConfig c = parse_run_config(strip_config(), dir);
    c.target = t;
    c.output_dir = dir / (t == -0.1 ? "a" : "b");
    runs.push_back(prepare_run(c));
  }
  std::ostringstream log;
  const std::vector<RunSummary> res = execute_sweep(runs, 2, log);
  ASSERT_EQ(res.size(), 2u);
  EXPECT_EQ(res[0].eps_pre, -0.1);
  EXPECT_EQ(res[1].eps_pre, -0.2);
  EXPECT_LT(res[0].aspect_ratio, res[1].aspect_ratio);
  EXPECT_TRUE(fs::exists(dir / "a" / "summary.txt"));
  EXPECT_TRUE(fs::exists(dir / "b" / "summary.txt"));

  runs[1].config.output_dir = runs[0].config.output_dir;
  EXPECT_THROW(execute_sweep(runs, 2, log), InputError);
}

TEST(Pipeline, MaxAbsAngleFindsFold) {
  const Mesh m = equilateral_strip(4, 3, 1.0, std::vector<int>{0});
  DofVector x = DofVector::rest(m);
  EXPECT_EQ(max_abs_angle(m, x).value, 0.0);
  const int h = 3;
  const Hinge& hg = m.hinge(h);
  x.set_node(hg.nodes[3], x.node(hg.nodes[3]) + Vec3(0, 0, 0.4));
  const AngleExtreme e = max_abs_angle(m, x);
  EXPECT_GT(e.value, 0.0);
  EXPECT_EQ(e.region, m.edge(m.hinge(e.hinge).edge).region);
}
