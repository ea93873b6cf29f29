#include "morphshell/config.hpp"
#include "morphshell/pipeline.hpp"

#include <benchmark/benchmark.h>

#include <Eigen/Geometry>

#include <filesystem>
#include <map>
#include <random>

using namespace morphshell;

namespace {

const PreparedRun& pattern(char p) {
  static std::map<char, PreparedRun> runs;
  auto it = runs.find(p);
  if (it == runs.end()) {
    const auto path = std::filesystem::path(MORPHSHELL_CONFIG_DIR) / (std::string("pattern_") + p + ".yaml");
    it = runs.emplace(p, prepare_run(load_run_config(path))).first;
  }
  return it->second;
}

DofVector perturbed_rest(const Mesh& m, double amplitude) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  DofVector x = DofVector::rest(m);
  for (double& v : x.values()) v += u(rng);
  return x;
}

char pattern_arg(const benchmark::State& s) { return static_cast<char>('a' + s.range(0)); }

void BM_Energy(benchmark::State& state) {
  const PreparedRun& r = pattern(pattern_arg(state));
  const DofVector x = perturbed_rest(r.mesh, 0.05);
  for (auto _ : state)
    benchmark::DoNotOptimize(evaluate_energy(r.mesh, x, r.params, r.distances, EvalLevel::Energy).energy);
  state.counters["hinges"] = r.mesh.num_hinges();
}

void BM_EnergyGradientHessian(benchmark::State& state) {
  const PreparedRun& r = pattern(pattern_arg(state));
  const DofVector x = perturbed_rest(r.mesh, 0.05);
  for (auto _ : state) {
    EnergyEvaluation e = evaluate_energy(r.mesh, x, r.params, r.distances, EvalLevel::Hessian);
    benchmark::DoNotOptimize(e.hessian.nonZeros());
  }
  state.counters["dofs"] = 3 * r.mesh.num_nodes();
}

void BM_NewtonStep(benchmark::State& state) {
  const PreparedRun& r = pattern(pattern_arg(state));
  const DofVector x = perturbed_rest(r.mesh, 0.05);
  const Eigen::VectorXd f = Eigen::VectorXd::Zero(x.values().size());
  const std::vector<int> pinned = pinned_dofs(r.mesh, r.config.solver);
  for (auto _ : state) {
    NewtonResult n = newton_step(r.mesh, x, r.params, r.distances, f, pinned, r.config.solver);
    benchmark::DoNotOptimize(n.objective);
  }
}

void BM_Voxelize(benchmark::State& state) {
  const PreparedRun& r = pattern('c');
  const TriangleSurface s = TriangleSurface::from_mesh(r.mesh, perturbed_rest(r.mesh, 0.5));
  const BoundingBox box = BoundingBox::cube_around(s);
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(voxelize(s, box, n).data().data());
}

void BM_Ssim(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const BoundingBox box{Vec3::Zero(), Vec3::Ones()};
  VoxelVolume a(n, box), b(n, box);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : a.data()) v = u(rng);
  for (double& v : b.data()) v = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b).mean);
}

void BM_Align(benchmark::State& state) {
  const PreparedRun& r = pattern('c');
  const TriangleSurface ref = TriangleSurface::from_mesh(r.mesh, perturbed_rest(r.mesh, 0.5));
  const SimilarityTransform t{1.3, Eigen::AngleAxisd(0.4, Vec3(1, 2, 3).normalized()).toRotationMatrix(),
                              Vec3(2, -1, 5)};
  const TriangleSurface sim = t.apply(ref);
  for (auto _ : state) benchmark::DoNotOptimize(align(sim, ref).rms);
}

}  // namespace

BENCHMARK(BM_Energy)->DenseRange(0, 2)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_EnergyGradientHessian)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_NewtonStep)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Voxelize)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Ssim)->Arg(10)->Arg(32)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Align)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
