#pragma once

#include "morphshell/energy.hpp"
#include "morphshell/mesh.hpp"
#include "morphshell/stimulus.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace morphshell {

/// Two triangles sharing one edge: nodes (0,0,0), (1,0,0), (0.5,0.8,0),
/// (0.5,-0.8,0), triangles (0,1,2) and (1,0,3).
Mesh two_triangle_mesh(std::span<const int> bilayer_triangles = {});

/// Worst relative errors over a batch of randomized states.
struct FdErrors {
  double gradient = 0.0;    // |g - g_fd| / |g_fd|
  double hessian = 0.0;     // |H - H_fd|_F / |H_fd|_F, H_fd from central differences of g
  double symmetry = 0.0;    // |H - H^T|_F
  double directional = 0.0; // |g.v - (E(x+hv) - E(x-hv))/2h| / |g.v|
  int samples = 0;
};

/// Central finite differences with step 1e-6 * mean edge length around
/// states x = rest + amplitude * l0 * U(-1, 1), with per-edge thermal
/// strains drawn from U(-0.3, 0).
FdErrors finite_difference_check(const Mesh& mesh, const EnergyParams& params, int samples,
                                 double amplitude, std::uint64_t seed);

/// Classical discrete-shells energy terms evaluated from first principles:
/// 1/2 k_s eps_i^2 per edge and 1/2 k_b (theta_j - rest_angle_j)^2 per
/// hinge, theta_j from the triangles' oriented normals.
struct DiscreteShellsTerms {
  std::vector<double> stretch;
  std::vector<double> bend;
  double total = 0.0;
};

DiscreteShellsTerms discrete_shells_energy(const Mesh& mesh, const DofVector& x,
                                           const MaterialModel& material);

/// Largest term-by-term difference between the model energy with beta = 0
/// and a zero thermal field and discrete_shells_energy, relative to the
/// largest term, over `samples` random states.
double classical_limit_error(const Mesh& mesh, const MaterialModel& material, int samples,
                             double amplitude, std::uint64_t seed);

struct UniaxialResult {
  double applied_strain = 0.0;
  double max_strain_error = 0.0;  // over all edges, vs the homogeneous solution
  bool converged = false;
};

/// Equilateral strip with its end columns displaced affinely by
/// applied_strain along x, lateral sides free. The homogeneous solution has
/// strain applied_strain on axial edges and zero on inclined edges.
UniaxialResult uniaxial_benchmark(int cols, int rows, double applied_strain);

struct CantileverResult {
  double tip_deflection = 0.0;
  double beam_deflection = 0.0;  // P L^3 / (3 Y I)
  double ratio = 0.0;
  double length = 0.0;
  double width = 0.0;
  bool converged = false;
};

/// Equilateral strip along x, the first two node columns clamped, total
/// transverse load P spread over the last column. L runs from the mean x of
/// the last clamped column to the mean x of the loaded column; the width is
/// (rows - 1) * sqrt(3)/2 * l0, the band carrying bending hinges;
/// I = b h^3 / 12. P is chosen so that the beam-theory deflection is
/// 1e-3 L.
CantileverResult cantilever_benchmark(int cols, int rows, double young_modulus, double thickness);

struct CheckResult {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  bool passed = false;
};

struct VerificationOptions {
  int samples = 100;
  std::uint64_t seed = 20240611;
  bool finite_differences = true;
  bool classical_limit = true;
  bool uniaxial = true;
  bool cantilever = true;
};

/// The standard suite: FD checks on the two-triangle mesh and a 5x5 strip,
/// the classical limit (1e-12), the uniaxial benchmark (1e-8) and the
/// cantilever benchmark (2%).
std::vector<CheckResult> run_verification(const VerificationOptions& options);

}  // namespace morphshell
