#pragma once

#include "morphshell/material.hpp"
#include "morphshell/mesh.hpp"
#include "morphshell/stimulus.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <vector>

namespace morphshell {

struct EnergyParams {
  MaterialModel material;
  double beta = 0.0;  // 1/mm
  double l0 = 0.0;    // mm

  /// Dimensionless prefactor of the strain-mismatch rest angle.
  double coupling() const { return beta * l0; }

  /// beta = 1 / l0, so the coupling prefactor is exactly 1.
  static EnergyParams with_default_beta(const MaterialModel& material, double l0) {
    return {material, 1.0 / l0, l0};
  }
};

/// Energy of one configuration, with the per-element parts kept for export.
struct EnergyReport {
  double total = 0.0;
  double stretch_total = 0.0;
  double bend_total = 0.0;

  std::vector<double> strain;          // per edge: eps_i
  std::vector<double> stretch_energy;  // per edge: 1/2 k_s (eps_i - eps_th_i)^2

  std::vector<double> angle;                 // per hinge: theta_j
  std::vector<double> delta_strain;          // per hinge: sum_p s_p (eps_p - eps_th_p)
  std::vector<double> delta_strain_elastic;  // per hinge: sum_p s_p eps_p
  std::vector<double> delta_strain_thermal;  // per hinge: sum_p s_p eps_th_p
  std::vector<double> bend_energy;           // per hinge
};

/// Strain mismatch across a hinge: sum over the four flanking edges of
/// s_p (eps_p - eps_th_p).
double delta_strain(const Mesh& mesh, const DofVector& x, const ThermalField& field, int hinge);

/// E = sum_i 1/2 k_s (eps_i - eps_th_i)^2
///   + sum_j 1/2 k_b (theta_j - beta l0 delta_eps_j)^2,
/// each edge using its region's k_s and each hinge the k_b of its shared
/// edge's region.
EnergyReport total_energy(const Mesh& mesh, const DofVector& x, const EnergyParams& params,
                          const ThermalField& field);

Eigen::VectorXd energy_gradient(const Mesh& mesh, const DofVector& x, const EnergyParams& params,
                                const ThermalField& field);

/// Full (both triangles stored) symmetric 3N x 3N Hessian.
Eigen::SparseMatrix<double> energy_hessian(const Mesh& mesh, const DofVector& x,
                                           const EnergyParams& params, const ThermalField& field);

/// Energy with optional gradient and Hessian in one pass over the mesh.
struct EnergyEvaluation {
  double energy = 0.0;
  Eigen::VectorXd gradient;
  Eigen::SparseMatrix<double> hessian;
};

enum class EvalLevel { Energy, Gradient, Hessian };

EnergyEvaluation evaluate_energy(const Mesh& mesh, const DofVector& x, const EnergyParams& params,
                                 const ThermalField& field, EvalLevel level);

}  // namespace morphshell
