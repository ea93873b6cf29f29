#include "morphshell/energy.hpp"

#include "morphshell/kinematics.hpp"

#include <string>

namespace morphshell {

namespace {

using kinematics::Mat12;
using kinematics::Vec12;

void check_inputs(const Mesh& mesh, const DofVector& x, const ThermalField& field) {
  check_dofs(mesh, x);
  if (static_cast<int>(field.eps_th.size()) != mesh.num_edges()) {
    throw InputError("thermal field has " + std::to_string(field.eps_th.size()) +
                     " entries, mesh has " + std::to_string(mesh.num_edges()) + " edges");
  }
}

kinematics::EdgeStrain edge_term(const Mesh& mesh, const DofVector& x, int e,
                                 kinematics::Order order) {
  const Edge& edge = mesh.edge(e);
  try {
    return kinematics::edge_strain(x.node(edge.nodes[0]), x.node(edge.nodes[1]),
                                   edge.rest_length, order);
  } catch (const GeometryError&) {
    throw GeometryError("collapsed edge " + std::to_string(e) + " (" +
                        std::to_string(edge.nodes[0]) + ", " + std::to_string(edge.nodes[1]) + ")");
  }
}

// Position (0..3) of `node` in the hinge stencil.
int local_slot(const Hinge& h, int node) {
  for (int k = 0; k < 4; ++k) {
    if (h.nodes[static_cast<std::size_t>(k)] == node) {
      return k;
    }
  }
  return -1;
}

struct Assembly {
  double energy = 0.0;
  double stretch = 0.0;
  double bend = 0.0;
  Eigen::VectorXd gradient;
  std::vector<Eigen::Triplet<double>> triplets;
  EnergyReport* report = nullptr;
};

void assemble(const Mesh& mesh, const DofVector& x, const EnergyParams& params,
              const ThermalField& field, EvalLevel level, Assembly& out) {
  check_inputs(mesh, x, field);
  const auto order = level == EvalLevel::Energy     ? kinematics::Order::Value
                     : level == EvalLevel::Gradient ? kinematics::Order::Gradient
                                                    : kinematics::Order::Hessian;
  const bool want_grad = level != EvalLevel::Energy;
  const bool want_hess = level == EvalLevel::Hessian;
  const double coupling = params.coupling();

  const int ne = mesh.num_edges();
  const int nh = mesh.num_hinges();
  if (want_grad) {
    out.gradient = Eigen::VectorXd::Zero(mesh.num_dofs());
  }
  if (want_hess) {
    out.triplets.clear();
    out.triplets.reserve(static_cast<std::size_t>(36 * ne + 144 * nh));
  }

  std::vector<kinematics::EdgeStrain> edges(static_cast<std::size_t>(ne));
  for (int e = 0; e < ne; ++e) {
    edges[static_cast<std::size_t>(e)] = edge_term(mesh, x, e, order);
  }

  EnergyReport* rep = out.report;
  if (rep) {
    rep->strain.resize(static_cast<std::size_t>(ne));
    rep->stretch_energy.resize(static_cast<std::size_t>(ne));
    rep->angle.resize(static_cast<std::size_t>(nh));
    rep->delta_strain.resize(static_cast<std::size_t>(nh));
    rep->delta_strain_elastic.resize(static_cast<std::size_t>(nh));
    rep->delta_strain_thermal.resize(static_cast<std::size_t>(nh));
    rep->bend_energy.resize(static_cast<std::size_t>(nh));
  }

  // Stretching: 1/2 k_s (eps - eps_th)^2 per edge.
  for (int e = 0; e < ne; ++e) {
    const Edge& edge = mesh.edge(e);
    const auto& k = edges[static_cast<std::size_t>(e)];
    const double ks = params.material[edge.region].stretch;
    const double r = k.value - field.eps_th[static_cast<std::size_t>(e)];
    const double en = 0.5 * ks * r * r;
    out.stretch += en;
    if (rep) {
      rep->strain[static_cast<std::size_t>(e)] = k.value;
      rep->stretch_energy[static_cast<std::size_t>(e)] = en;
    }
    if (!want_grad) {
      continue;
    }
    for (int a = 0; a < 2; ++a) {
      out.gradient.segment<3>(3 * edge.nodes[static_cast<std::size_t>(a)]) +=
          ks * r * k.gradient.segment<3>(3 * a);
    }
    if (!want_hess) {
      continue;
    }
    const kinematics::Mat6 block = ks * (k.gradient * k.gradient.transpose() + r * k.hessian);
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        const int ra = 3 * edge.nodes[static_cast<std::size_t>(a)];
        const int cb = 3 * edge.nodes[static_cast<std::size_t>(b)];
        for (int i = 0; i < 3; ++i) {
          for (int j = 0; j < 3; ++j) {
            out.triplets.emplace_back(ra + i, cb + j, block(3 * a + i, 3 * b + j));
          }
        }
      }
    }
  }

  // Bending: 1/2 k_b (theta - c * delta_eps)^2 per hinge, c = beta l0.
  for (int j = 0; j < nh; ++j) {
    const Hinge& h = mesh.hinge(j);
    const double kb = params.material[mesh.edge(h.edge).region].bend;
    const auto ang = kinematics::hinge_angle(x.node(h.nodes[0]), x.node(h.nodes[1]),
                                             x.node(h.nodes[2]), x.node(h.nodes[3]), order,
                                             h.triangles[0], h.triangles[1]);
    double de_elastic = 0.0, de_thermal = 0.0;
    for (int p = 0; p < 4; ++p) {
      const int e = h.flank_edges[static_cast<std::size_t>(p)];
      const double s = h.signs[static_cast<std::size_t>(p)];
      de_elastic += s * edges[static_cast<std::size_t>(e)].value;
      de_thermal += s * field.eps_th[static_cast<std::size_t>(e)];
    }
    const double de = de_elastic - de_thermal;
    const double r = ang.value - coupling * de;
    const double en = 0.5 * kb * r * r;
    out.bend += en;
    if (rep) {
      rep->angle[static_cast<std::size_t>(j)] = ang.value;
      rep->delta_strain[static_cast<std::size_t>(j)] = de;
      rep->delta_strain_elastic[static_cast<std::size_t>(j)] = de_elastic;
      rep->delta_strain_thermal[static_cast<std::size_t>(j)] = de_thermal;
      rep->bend_energy[static_cast<std::size_t>(j)] = en;
    }
    if (!want_grad) {
      continue;
    }

    // Generalised gradient g = grad(theta) - c * sum_p s_p grad(eps_p) over
    // the 12 stencil DOFs; the flanking edges all live inside the stencil.
    Vec12 g = ang.gradient;
    Mat12 curv;
    if (want_hess) {
      curv = ang.hessian;
    }
    for (int p = 0; p < 4; ++p) {
      const int e = h.flank_edges[static_cast<std::size_t>(p)];
      const double s = h.signs[static_cast<std::size_t>(p)];
      const auto& k = edges[static_cast<std::size_t>(e)];
      const Edge& edge = mesh.edge(e);
      const int sa = local_slot(h, edge.nodes[0]);
      const int sb = local_slot(h, edge.nodes[1]);
      const int slot[2] = {sa, sb};
      for (int a = 0; a < 2; ++a) {
        g.segment<3>(3 * slot[a]) -= coupling * s * k.gradient.segment<3>(3 * a);
      }
      if (want_hess) {
        for (int a = 0; a < 2; ++a) {
          for (int b = 0; b < 2; ++b) {
            curv.block<3, 3>(3 * slot[a], 3 * slot[b]) -=
                coupling * s * k.hessian.block<3, 3>(3 * a, 3 * b);
          }
        }
      }
    }
    for (int a = 0; a < 4; ++a) {
      out.gradient.segment<3>(3 * h.nodes[static_cast<std::size_t>(a)]) +=
          kb * r * g.segment<3>(3 * a);
    }
    if (!want_hess) {
      continue;
    }
    const Mat12 block = kb * (g * g.transpose() + r * curv);
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        const int ra = 3 * h.nodes[static_cast<std::size_t>(a)];
        const int cb = 3 * h.nodes[static_cast<std::size_t>(b)];
        for (int i = 0; i < 3; ++i) {
          for (int jj = 0; jj < 3; ++jj) {
            out.triplets.emplace_back(ra + i, cb + jj, block(3 * a + i, 3 * b + jj));
          }
        }
      }
    }
  }
  out.energy = out.stretch + out.bend;
}

}  // namespace

double delta_strain(const Mesh& mesh, const DofVector& x, const ThermalField& field, int hinge) {
  check_inputs(mesh, x, field);
  if (hinge < 0 || hinge >= mesh.num_hinges()) {
    throw InputError("hinge index " + std::to_string(hinge) + " out of range");
  }
  const Hinge& h = mesh.hinge(hinge);
  double sum = 0.0;
  for (int p = 0; p < 4; ++p) {
    const int e = h.flank_edges[static_cast<std::size_t>(p)];
    sum += h.signs[static_cast<std::size_t>(p)] *
           (axial_strain(mesh, x, e) - field.eps_th[static_cast<std::size_t>(e)]);
  }
  return sum;
}

EnergyReport total_energy(const Mesh& mesh, const DofVector& x, const EnergyParams& params,
                          const ThermalField& field) {
  EnergyReport report;
  Assembly a;
  a.report = &report;
  assemble(mesh, x, params, field, EvalLevel::Energy, a);
  report.stretch_total = a.stretch;
  report.bend_total = a.bend;
  report.total = a.energy;
  return report;
}

Eigen::VectorXd energy_gradient(const Mesh& mesh, const DofVector& x, const EnergyParams& params,
                                const ThermalField& field) {
  return evaluate_energy(mesh, x, params, field, EvalLevel::Gradient).gradient;
}

Eigen::SparseMatrix<double> energy_hessian(const Mesh& mesh, const DofVector& x,
                                           const EnergyParams& params, const ThermalField& field) {
  return evaluate_energy(mesh, x, params, field, EvalLevel::Hessian).hessian;
}

EnergyEvaluation evaluate_energy(const Mesh& mesh, const DofVector& x, const EnergyParams& params,
                                 const ThermalField& field, EvalLevel level) {
  Assembly a;
  assemble(mesh, x, params, field, level, a);
  EnergyEvaluation out;
  out.energy = a.energy;
  if (level != EvalLevel::Energy) {
    out.gradient = std::move(a.gradient);
  }
  if (level == EvalLevel::Hessian) {
    out.hessian.resize(mesh.num_dofs(), mesh.num_dofs());
    out.hessian.setFromTriplets(a.triplets.begin(), a.triplets.end());
  }
  return out;
}

}  // namespace morphshell
