#include "morphshell/kinematics.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <string>

namespace morphshell::kinematics {

namespace {

constexpr double kDegenerateRatio = 1e-12;

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat9 = Eigen::Matrix<double, 9, 9>;

// Maps derivatives in the edge-relative variables (e, a, b) to the four
// nodes: e = x1 - x0, a = x2 - x0, b = x3 - x0.
Vec12 to_nodes(const Vec9& g) {
  Vec12 out;
  const Vec3 ge = g.segment<3>(0), ga = g.segment<3>(3), gb = g.segment<3>(6);
  out.segment<3>(0) = -(ge + ga + gb);
  out.segment<3>(3) = ge;
  out.segment<3>(6) = ga;
  out.segment<3>(9) = gb;
  return out;
}

Mat12 to_nodes(const Mat9& h) {
  // Row/column block k of the node Hessian is variable block k-1 for
  // k = 1..3, and minus the sum of all variable blocks for node 0.
  Mat12 out;
  Mat3 blocks[4][4];
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      blocks[i + 1][j + 1] = h.block<3, 3>(3 * i, 3 * j);
    }
  }
  for (int j = 1; j < 4; ++j) {
    blocks[0][j] = -(blocks[1][j] + blocks[2][j] + blocks[3][j]);
  }
  for (int i = 1; i < 4; ++i) {
    blocks[i][0] = -(blocks[i][1] + blocks[i][2] + blocks[i][3]);
  }
  blocks[0][0] = -(blocks[0][1] + blocks[0][2] + blocks[0][3]);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      out.block<3, 3>(3 * i, 3 * j) = blocks[i][j];
    }
  }
  return out;
}

[[noreturn]] void throw_degenerate(int triangle) {
  if (triangle >= 0) {
    throw GeometryError("degenerate triangle " + std::to_string(triangle) +
                        " at hinge (zero area in current configuration)");
  }
  throw GeometryError("degenerate triangle at hinge (zero area in current configuration)");
}

}  // namespace

EdgeStrain edge_strain(const Vec3& p0, const Vec3& p1, double rest_length, Order order) {
  EdgeStrain out;
  const Vec3 d = p1 - p0;
  const double len = d.norm();
  if (!(len > 0.0)) {
    throw GeometryError("collapsed edge: coincident endpoints");
  }
  out.value = len / rest_length - 1.0;
  if (order == Order::Value) {
    return out;
  }
  const Vec3 t = d / len;
  out.gradient.segment<3>(0) = -t / rest_length;
  out.gradient.segment<3>(3) = t / rest_length;
  if (order == Order::Gradient) {
    return out;
  }
  const Mat3 block = (Mat3::Identity() - t * t.transpose()) / (len * rest_length);
  out.hessian.block<3, 3>(0, 0) = block;
  out.hessian.block<3, 3>(3, 3) = block;
  out.hessian.block<3, 3>(0, 3) = -block;
  out.hessian.block<3, 3>(3, 0) = -block;
  return out;
}

HingeAngle hinge_angle(const Vec3& x0, const Vec3& x1, const Vec3& x2, const Vec3& x3,
                       Order order, int first_triangle, int second_triangle) {
  const Vec3 e = x1 - x0;
  const Vec3 a = x2 - x0;
  const Vec3 b = x3 - x0;
  const double elen = e.norm();
  if (!(elen > 0.0)) {
    throw_degenerate(first_triangle);
  }
  const Vec3 n1 = e.cross(a);
  const Vec3 n2 = b.cross(e);
  if (!(n1.norm() > kDegenerateRatio * elen * a.norm())) {
    throw_degenerate(first_triangle);
  }
  if (!(n2.norm() > kDegenerateRatio * elen * b.norm())) {
    throw_degenerate(second_triangle);
  }

  const double ea = e.dot(a), eb = e.dot(b), ab = a.dot(b), ee = e.dot(e);
  const Vec3 axb = a.cross(b);
  const double det = e.dot(axb);

  // theta = atan2(y, x)
  const double x = ea * eb - ee * ab;
  const double y = -elen * det;

  HingeAngle out;
  out.value = std::atan2(y, x);
  if (order == Order::Value) {
    return out;
  }

  // Gradients of x and y in the (e, a, b) variables.
  Vec9 gx;
  gx.segment<3>(0) = a * eb + b * ea - 2.0 * ab * e;
  gx.segment<3>(3) = e * eb - b * ee;
  gx.segment<3>(6) = e * ea - a * ee;

  const Vec3 ehat = e / elen;
  Vec9 gdet;
  gdet.segment<3>(0) = axb;
  gdet.segment<3>(3) = b.cross(e);
  gdet.segment<3>(6) = e.cross(a);
  Vec9 glen = Vec9::Zero();
  glen.segment<3>(0) = ehat;
  const Vec9 gy = -(det * glen + elen * gdet);

  const double r2 = x * x + y * y;
  const double tx = -y / r2;
  const double ty = x / r2;
  out.gradient = to_nodes(Vec9(tx * gx + ty * gy));
  if (order == Order::Gradient) {
    return out;
  }

  const Mat3 I = Mat3::Identity();
  Mat9 hx = Mat9::Zero();
  hx.block<3, 3>(0, 0) = a * b.transpose() + b * a.transpose() - 2.0 * ab * I;
  hx.block<3, 3>(0, 3) = eb * I + b * e.transpose() - 2.0 * e * b.transpose();
  hx.block<3, 3>(0, 6) = ea * I + a * e.transpose() - 2.0 * e * a.transpose();
  hx.block<3, 3>(3, 6) = e * e.transpose() - ee * I;
  hx.block<3, 3>(3, 0) = hx.block<3, 3>(0, 3).transpose();
  hx.block<3, 3>(6, 0) = hx.block<3, 3>(0, 6).transpose();
  hx.block<3, 3>(6, 3) = hx.block<3, 3>(3, 6).transpose();

  Mat9 hdet = Mat9::Zero();
  hdet.block<3, 3>(0, 3) = -skew(b);
  hdet.block<3, 3>(0, 6) = skew(a);
  hdet.block<3, 3>(3, 6) = -skew(e);
  hdet.block<3, 3>(3, 0) = hdet.block<3, 3>(0, 3).transpose();
  hdet.block<3, 3>(6, 0) = hdet.block<3, 3>(0, 6).transpose();
  hdet.block<3, 3>(6, 3) = hdet.block<3, 3>(3, 6).transpose();

  Mat9 hlen = Mat9::Zero();
  hlen.block<3, 3>(0, 0) = (I - ehat * ehat.transpose()) / elen;

  const Mat9 hy = -(det * hlen + glen * gdet.transpose() + gdet * glen.transpose() + elen * hdet);

  const double r4 = r2 * r2;
  const double txx = 2.0 * x * y / r4;
  const double tyy = -txx;
  const double txy = (y * y - x * x) / r4;
  const Mat9 hxy = gx * gy.transpose();
  Mat9 h = tx * hx + ty * hy + txx * gx * gx.transpose() + tyy * gy * gy.transpose() +
           txy * (hxy + hxy.transpose());
  Mat12 hn = to_nodes(h);
  out.hessian = 0.5 * (hn + hn.transpose());
  return out;
}

}  // namespace morphshell::kinematics
