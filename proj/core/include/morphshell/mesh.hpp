#pragma once

#include "morphshell/common.hpp"

#include <Eigen/Core>

#include <array>
#include <span>
#include <vector>

namespace morphshell {

using Triangle = std::array<int, 3>;

struct Edge {
  std::array<int, 2> nodes;       // ascending node index
  std::array<int, 2> triangles;   // second entry is -1 on the boundary
  double rest_length = 0.0;
  Region region = Region::SingleLayer;

  bool is_boundary() const { return triangles[1] < 0; }
};

/// A bending pair: two triangles sharing an interior edge.
///
/// Stencil node order is (v0, v1, o1, o2): the shared edge from its lower to
/// its higher node index, then the node opposite the edge in the first
/// (lower-index) triangle and in the second. Flanking edges are ordered
/// (v0,o1), (v1,o1), (v0,o2), (v1,o2) with orientation factors
/// (+1, +1, -1, -1).
struct Hinge {
  int edge = -1;
  std::array<int, 4> nodes{};
  std::array<int, 2> triangles{};
  std::array<int, 4> flank_edges{};
  std::array<int, 4> signs{};
  double rest_angle = 0.0;
};

/// Immutable triangle-mesh topology plus rest geometry.
class Mesh {
 public:
  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int num_triangles() const { return static_cast<int>(triangles_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  int num_hinges() const { return static_cast<int>(hinges_.size()); }
  int num_dofs() const { return 3 * num_nodes(); }

  const std::vector<Vec3>& nodes() const { return nodes_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<Hinge>& hinges() const { return hinges_; }
  const std::vector<Region>& triangle_regions() const { return triangle_regions_; }

  const Vec3& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const Edge& edge(int i) const { return edges_[static_cast<std::size_t>(i)]; }
  const Hinge& hinge(int i) const { return hinges_[static_cast<std::size_t>(i)]; }

  /// Arithmetic mean of the rest edge lengths.
  double mean_edge_length() const { return mean_edge_length_; }

  /// Edge index joining nodes a and b, or -1.
  int find_edge(int a, int b) const;

  /// Edges incident to node i.
  std::span<const int> node_edges(int i) const;

  int count_edges(Region r) const;

 private:
  friend Mesh build_mesh(std::vector<Vec3>, std::vector<Triangle>, std::span<const int>);

  std::vector<Vec3> nodes_;
  std::vector<Triangle> triangles_;
  std::vector<Region> triangle_regions_;
  std::vector<Edge> edges_;
  std::vector<Hinge> hinges_;
  std::vector<int> node_edge_offsets_;
  std::vector<int> node_edge_list_;
  double mean_edge_length_ = 0.0;
};

/// Builds topology and rest geometry.
///
/// Throws InputError for out-of-range indices, non-manifold edges,
/// inconsistently oriented neighbours and zero-area triangles.
Mesh build_mesh(std::vector<Vec3> nodes, std::vector<Triangle> triangles,
                std::span<const int> bilayer_triangles);

/// Nodal coordinates packed as (x0, y0, z0, x1, ...).
class DofVector {
 public:
  DofVector() = default;
  explicit DofVector(Eigen::VectorXd coords);

  static DofVector rest(const Mesh& mesh);
  static DofVector from_nodes(std::span<const Vec3> nodes);

  Eigen::Index size() const { return coords_.size(); }
  int num_nodes() const { return static_cast<int>(coords_.size() / 3); }

  Vec3 node(int i) const { return coords_.segment<3>(3 * i); }
  void set_node(int i, const Vec3& p) { coords_.segment<3>(3 * i) = p; }

  const Eigen::VectorXd& values() const { return coords_; }
  Eigen::VectorXd& values() { return coords_; }

  std::vector<Vec3> to_nodes() const;
  bool all_finite() const;

 private:
  Eigen::VectorXd coords_;
};

/// Throws InputError if x does not belong to mesh or holds non-finite values.
void check_dofs(const Mesh& mesh, const DofVector& x);

// Kinematic queries. All are pure functions of (mesh, x).

/// l / l0 - 1 for one edge. Throws GeometryError on a collapsed edge.
double axial_strain(const Mesh& mesh, const DofVector& x, int edge);

/// Signed dihedral angle at a hinge, in (-pi, pi]; zero for coplanar
/// triangles. The sign is that of (n1 x n2) . e where e runs from the lower
/// to the higher node of the shared edge and n1, n2 are the oriented normals
/// of the first and second triangle.
double dihedral_angle(const Mesh& mesh, const DofVector& x, int hinge);

struct EdgeGradient {
  std::array<int, 2> nodes;
  Eigen::Matrix<double, 6, 1> values;
};

struct EdgeHessian {
  std::array<int, 2> nodes;
  Eigen::Matrix<double, 6, 6> values;
};

struct HingeGradient {
  std::array<int, 4> nodes;
  Eigen::Matrix<double, 12, 1> values;
};

struct HingeHessian {
  std::array<int, 4> nodes;
  Eigen::Matrix<double, 12, 12> values;
};

EdgeGradient strain_gradient(const Mesh& mesh, const DofVector& x, int edge);
EdgeHessian strain_hessian(const Mesh& mesh, const DofVector& x, int edge);
HingeGradient angle_gradient(const Mesh& mesh, const DofVector& x, int hinge);
HingeHessian angle_hessian(const Mesh& mesh, const DofVector& x, int hinge);

/// Structured strip of near-equilateral triangles: `cols` x `rows` nodes,
/// every other row shifted by half a spacing, lying in the z = 0 plane with
/// its lower-left node at the origin.
Mesh equilateral_strip(int cols, int rows, double spacing,
                       std::span<const int> bilayer_triangles = {});

/// Structured rectangular grid of `nx` x `ny` nodes split into right
/// triangles, spanning [0, lx] x [0, ly] at z = 0.
Mesh grid_mesh(int nx, int ny, double lx, double ly,
               std::span<const int> bilayer_triangles = {});

}  // namespace morphshell
