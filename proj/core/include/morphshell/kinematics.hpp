#pragma once

// Element-level strain measures with analytic first and second derivatives.
// These operate on raw coordinates; the Mesh-level queries in mesh.hpp and
// the energy assembly are built on top of them.

#include "morphshell/common.hpp"

#include <Eigen/Core>

namespace morphshell::kinematics {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat12 = Eigen::Matrix<double, 12, 12>;

struct EdgeStrain {
  double value = 0.0;
  Vec6 gradient = Vec6::Zero();
  Mat6 hessian = Mat6::Zero();
};

struct HingeAngle {
  double value = 0.0;
  Vec12 gradient = Vec12::Zero();
  Mat12 hessian = Mat12::Zero();
};

enum class Order { Value, Gradient, Hessian };

/// Axial strain |p1 - p0| / rest_length - 1 over DOFs (p0, p1).
/// Throws GeometryError when the endpoints coincide.
EdgeStrain edge_strain(const Vec3& p0, const Vec3& p1, double rest_length,
                       Order order = Order::Hessian);

/// Signed dihedral angle of the hinge (x0, x1 | x2, x3), where x0 -> x1 is
/// the shared edge, x2 the opposite node of the first triangle and x3 the
/// opposite node of the second. Uses
///   theta = atan2(-|e| det(e, a, b), (e.a)(e.b) - |e|^2 (a.b))
/// with e = x1 - x0, a = x2 - x0, b = x3 - x0, which is the angle from
/// n1 to n2 about e for consistently oriented triangles.
/// Throws GeometryError naming `first_triangle`/`second_triangle` when
/// either triangle is degenerate.
HingeAngle hinge_angle(const Vec3& x0, const Vec3& x1, const Vec3& x2, const Vec3& x3,
                       Order order = Order::Hessian, int first_triangle = -1,
                       int second_triangle = -1);

}  // namespace morphshell::kinematics
