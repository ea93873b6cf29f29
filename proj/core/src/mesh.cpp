#include "morphshell/mesh.hpp"

#include "morphshell/kinematics.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <tuple>

namespace morphshell {

namespace {

std::string edge_name(int a, int b) {
  return "(" + std::to_string(a) + ", " + std::to_string(b) + ")";
}

int opposite_node(const Triangle& t, int a, int b) {
  for (int v : t) {
    if (v != a && v != b) {
      return v;
    }
  }
  return -1;
}

// +1 if the triangle traverses a -> b, -1 if b -> a.
int traversal(const Triangle& t, int a, int b) {
  for (int k = 0; k < 3; ++k) {
    const int p = t[static_cast<std::size_t>(k)];
    const int q = t[static_cast<std::size_t>((k + 1) % 3)];
    if (p == a && q == b) {
      return 1;
    }
    if (p == b && q == a) {
      return -1;
    }
  }
  return 0;
}

}  // namespace

int Mesh::find_edge(int a, int b) const {
  if (a < 0 || b < 0 || a >= num_nodes() || b >= num_nodes()) {
    return -1;
  }
  for (int e : node_edges(a)) {
    const auto& n = edges_[static_cast<std::size_t>(e)].nodes;
    if ((n[0] == a && n[1] == b) || (n[0] == b && n[1] == a)) {
      return e;
    }
  }
  return -1;
}

std::span<const int> Mesh::node_edges(int i) const {
  const auto begin = static_cast<std::size_t>(node_edge_offsets_[static_cast<std::size_t>(i)]);
  const auto end = static_cast<std::size_t>(node_edge_offsets_[static_cast<std::size_t>(i) + 1]);
  return std::span<const int>(node_edge_list_).subspan(begin, end - begin);
}

int Mesh::count_edges(Region r) const {
  return static_cast<int>(
      std::count_if(edges_.begin(), edges_.end(), [r](const Edge& e) { return e.region == r; }));
}

Mesh build_mesh(std::vector<Vec3> nodes, std::vector<Triangle> triangles,
                std::span<const int> bilayer_triangles) {
  const int nn = static_cast<int>(nodes.size());
  const int nt = static_cast<int>(triangles.size());
  if (nn == 0 || nt == 0) {
    throw InputError("mesh has no nodes or no triangles");
  }
  for (int i = 0; i < nn; ++i) {
    if (!nodes[static_cast<std::size_t>(i)].allFinite()) {
      throw InputError("node " + std::to_string(i) + " has a non-finite coordinate");
    }
  }

  for (int t = 0; t < nt; ++t) {
    const auto& tri = triangles[static_cast<std::size_t>(t)];
    for (int v : tri) {
      if (v < 0 || v >= nn) {
        throw InputError("triangle " + std::to_string(t) + " references node " +
                         std::to_string(v) + " outside [0, " + std::to_string(nn) + ")");
      }
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
      throw InputError("triangle " + std::to_string(t) + " repeats a node");
    }
    const Vec3& p0 = nodes[static_cast<std::size_t>(tri[0])];
    const Vec3 n = (nodes[static_cast<std::size_t>(tri[1])] - p0)
                       .cross(nodes[static_cast<std::size_t>(tri[2])] - p0);
    if (!(n.norm() > 0.0)) {
      throw InputError("degenerate triangle " + std::to_string(t) + " (zero area)");
    }
  }

  Mesh mesh;
  mesh.triangle_regions_.assign(static_cast<std::size_t>(nt), Region::SingleLayer);
  for (int t : bilayer_triangles) {
    if (t < 0 || t >= nt) {
      throw InputError("bilayer triangle index " + std::to_string(t) + " outside [0, " +
                       std::to_string(nt) + ")");
    }
    mesh.triangle_regions_[static_cast<std::size_t>(t)] = Region::Bilayer;
  }

  // (lo, hi, triangle) half-edge records, sorted so edges come out in
  // lexicographic node order and incident triangles ascending.
  std::vector<std::tuple<int, int, int>> half;
  half.reserve(static_cast<std::size_t>(3 * nt));
  for (int t = 0; t < nt; ++t) {
    const auto& tri = triangles[static_cast<std::size_t>(t)];
    for (int k = 0; k < 3; ++k) {
      const int a = tri[static_cast<std::size_t>(k)];
      const int b = tri[static_cast<std::size_t>((k + 1) % 3)];
      half.emplace_back(std::min(a, b), std::max(a, b), t);
    }
  }
  std::sort(half.begin(), half.end());

  for (std::size_t i = 0; i < half.size();) {
    const auto [a, b, t0] = half[i];
    std::size_t j = i + 1;
    while (j < half.size() && std::get<0>(half[j]) == a && std::get<1>(half[j]) == b) {
      ++j;
    }
    const std::size_t count = j - i;
    if (count > 2) {
      throw InputError("non-manifold edge " + edge_name(a, b) + " shared by " +
                       std::to_string(count) + " triangles");
    }
    Edge edge;
    edge.nodes = {a, b};
    edge.triangles = {t0, count == 2 ? std::get<2>(half[i + 1]) : -1};
    if (count == 2) {
      if (edge.triangles[0] == edge.triangles[1]) {
        throw InputError("triangle " + std::to_string(t0) + " uses edge " + edge_name(a, b) +
                         " twice");
      }
      const auto& ta = triangles[static_cast<std::size_t>(edge.triangles[0])];
      const auto& tb = triangles[static_cast<std::size_t>(edge.triangles[1])];
      if (traversal(ta, a, b) == traversal(tb, a, b)) {
        throw InputError("inconsistent orientation across edge " + edge_name(a, b) +
                         " between triangles " + std::to_string(edge.triangles[0]) + " and " +
                         std::to_string(edge.triangles[1]));
      }
    }
    edge.rest_length = (nodes[static_cast<std::size_t>(b)] - nodes[static_cast<std::size_t>(a)]).norm();
    const bool bilayer =
        mesh.triangle_regions_[static_cast<std::size_t>(edge.triangles[0])] == Region::Bilayer ||
        (count == 2 &&
         mesh.triangle_regions_[static_cast<std::size_t>(edge.triangles[1])] == Region::Bilayer);
    edge.region = bilayer ? Region::Bilayer : Region::SingleLayer;
    mesh.edges_.push_back(edge);
    i = j;
  }

  const int ne = static_cast<int>(mesh.edges_.size());
  std::vector<int> degree(static_cast<std::size_t>(nn) + 1, 0);
  for (const auto& e : mesh.edges_) {
    ++degree[static_cast<std::size_t>(e.nodes[0]) + 1];
    ++degree[static_cast<std::size_t>(e.nodes[1]) + 1];
  }
  std::partial_sum(degree.begin(), degree.end(), degree.begin());
  mesh.node_edge_offsets_ = degree;
  mesh.node_edge_list_.assign(static_cast<std::size_t>(degree.back()), -1);
  std::vector<int> cursor(degree.begin(), degree.end() - 1);
  for (int e = 0; e < ne; ++e) {
    for (int v : mesh.edges_[static_cast<std::size_t>(e)].nodes) {
      mesh.node_edge_list_[static_cast<std::size_t>(cursor[static_cast<std::size_t>(v)]++)] = e;
    }
  }

  mesh.nodes_ = std::move(nodes);
  mesh.triangles_ = std::move(triangles);

  double total = 0.0;
  for (const auto& e : mesh.edges_) {
    total += e.rest_length;
  }
  mesh.mean_edge_length_ = total / ne;

  for (int e = 0; e < ne; ++e) {
    const Edge& edge = mesh.edges_[static_cast<std::size_t>(e)];
    if (edge.is_boundary()) {
      continue;
    }
    Hinge h;
    h.edge = e;
    h.triangles = edge.triangles;
    const int v0 = edge.nodes[0], v1 = edge.nodes[1];
    const int o1 = opposite_node(mesh.triangles_[static_cast<std::size_t>(h.triangles[0])], v0, v1);
    const int o2 = opposite_node(mesh.triangles_[static_cast<std::size_t>(h.triangles[1])], v0, v1);
    h.nodes = {v0, v1, o1, o2};
    h.flank_edges = {mesh.find_edge(v0, o1), mesh.find_edge(v1, o1), mesh.find_edge(v0, o2),
                     mesh.find_edge(v1, o2)};
    h.signs = {1, 1, -1, -1};
    h.rest_angle = kinematics::hinge_angle(mesh.node(v0), mesh.node(v1), mesh.node(o1),
                                           mesh.node(o2), kinematics::Order::Value,
                                           h.triangles[0], h.triangles[1])
                       .value;
    mesh.hinges_.push_back(h);
  }
  return mesh;
}

// ------------------------------------------------------------------ DofVector

DofVector::DofVector(Eigen::VectorXd coords) : coords_(std::move(coords)) {
  if (coords_.size() % 3 != 0) {
    throw InputError("DOF vector length " + std::to_string(coords_.size()) +
                     " is not a multiple of 3");
  }
}

DofVector DofVector::rest(const Mesh& mesh) { return from_nodes(mesh.nodes()); }

DofVector DofVector::from_nodes(std::span<const Vec3> nodes) {
  Eigen::VectorXd c(3 * static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    c.segment<3>(3 * static_cast<Eigen::Index>(i)) = nodes[i];
  }
  return DofVector(std::move(c));
}

std::vector<Vec3> DofVector::to_nodes() const {
  std::vector<Vec3> out(static_cast<std::size_t>(num_nodes()));
  for (int i = 0; i < num_nodes(); ++i) {
    out[static_cast<std::size_t>(i)] = node(i);
  }
  return out;
}

bool DofVector::all_finite() const { return coords_.allFinite(); }

void check_dofs(const Mesh& mesh, const DofVector& x) {
  if (x.size() != mesh.num_dofs()) {
    throw InputError("DOF vector has length " + std::to_string(x.size()) + ", mesh needs " +
                     std::to_string(mesh.num_dofs()));
  }
  if (!x.all_finite()) {
    throw InputError("DOF vector contains non-finite entries");
  }
}

// ----------------------------------------------------------------- kinematics

namespace {

void check_edge_index(const Mesh& mesh, int edge) {
  if (edge < 0 || edge >= mesh.num_edges()) {
    throw InputError("edge index " + std::to_string(edge) + " out of range");
  }
}

void check_hinge_index(const Mesh& mesh, int hinge) {
  if (hinge < 0 || hinge >= mesh.num_hinges()) {
    throw InputError("hinge index " + std::to_string(hinge) + " out of range");
  }
}

kinematics::EdgeStrain edge_kin(const Mesh& mesh, const DofVector& x, int edge,
                                kinematics::Order order) {
  check_edge_index(mesh, edge);
  const Edge& e = mesh.edge(edge);
  try {
    return kinematics::edge_strain(x.node(e.nodes[0]), x.node(e.nodes[1]), e.rest_length, order);
  } catch (const GeometryError&) {
    throw GeometryError("collapsed edge " + std::to_string(edge) + " " +
                        edge_name(e.nodes[0], e.nodes[1]));
  }
}

kinematics::HingeAngle hinge_kin(const Mesh& mesh, const DofVector& x, int hinge,
                                 kinematics::Order order) {
  check_hinge_index(mesh, hinge);
  const Hinge& h = mesh.hinge(hinge);
  return kinematics::hinge_angle(x.node(h.nodes[0]), x.node(h.nodes[1]), x.node(h.nodes[2]),
                                 x.node(h.nodes[3]), order, h.triangles[0], h.triangles[1]);
}

}  // namespace

double axial_strain(const Mesh& mesh, const DofVector& x, int edge) {
  return edge_kin(mesh, x, edge, kinematics::Order::Value).value;
}

double dihedral_angle(const Mesh& mesh, const DofVector& x, int hinge) {
  return hinge_kin(mesh, x, hinge, kinematics::Order::Value).value;
}

EdgeGradient strain_gradient(const Mesh& mesh, const DofVector& x, int edge) {
  auto k = edge_kin(mesh, x, edge, kinematics::Order::Gradient);
  return {mesh.edge(edge).nodes, k.gradient};
}

EdgeHessian strain_hessian(const Mesh& mesh, const DofVector& x, int edge) {
  auto k = edge_kin(mesh, x, edge, kinematics::Order::Hessian);
  return {mesh.edge(edge).nodes, k.hessian};
}

HingeGradient angle_gradient(const Mesh& mesh, const DofVector& x, int hinge) {
  auto k = hinge_kin(mesh, x, hinge, kinematics::Order::Gradient);
  return {mesh.hinge(hinge).nodes, k.gradient};
}

HingeHessian angle_hessian(const Mesh& mesh, const DofVector& x, int hinge) {
  auto k = hinge_kin(mesh, x, hinge, kinematics::Order::Hessian);
  return {mesh.hinge(hinge).nodes, k.hessian};
}

// ------------------------------------------------------- structured meshes

Mesh equilateral_strip(int cols, int rows, double spacing, std::span<const int> bilayer_triangles) {
  if (cols < 2 || rows < 2 || !(spacing > 0.0)) {
    throw InputError("equilateral_strip needs cols, rows >= 2 and positive spacing");
  }
  const double dy = spacing * std::sqrt(3.0) / 2.0;
  std::vector<Vec3> nodes;
  nodes.reserve(static_cast<std::size_t>(cols * rows));
  for (int j = 0; j < rows; ++j) {
    const double shift = (j % 2 == 1) ? 0.5 * spacing : 0.0;
    for (int i = 0; i < cols; ++i) {
      nodes.emplace_back(i * spacing + shift, j * dy, 0.0);
    }
  }
  auto id = [cols](int i, int j) { return j * cols + i; };
  std::vector<Triangle> tris;
  for (int j = 0; j + 1 < rows; ++j) {
    for (int i = 0; i + 1 < cols; ++i) {
      if (j % 2 == 0) {
        tris.push_back({id(i, j), id(i + 1, j), id(i, j + 1)});
        tris.push_back({id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
      } else {
        tris.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        tris.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      }
    }
  }
  return build_mesh(std::move(nodes), std::move(tris), bilayer_triangles);
}

Mesh grid_mesh(int nx, int ny, double lx, double ly, std::span<const int> bilayer_triangles) {
  if (nx < 2 || ny < 2 || !(lx > 0.0) || !(ly > 0.0)) {
    throw InputError("grid_mesh needs nx, ny >= 2 and positive extents");
  }
  std::vector<Vec3> nodes;
  nodes.reserve(static_cast<std::size_t>(nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      nodes.emplace_back(lx * i / (nx - 1), ly * j / (ny - 1), 0.0);
    }
  }
  auto id = [nx](int i, int j) { return j * nx + i; };
  std::vector<Triangle> tris;
  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      tris.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      tris.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return build_mesh(std::move(nodes), std::move(tris), bilayer_triangles);
}

}  // namespace morphshell
