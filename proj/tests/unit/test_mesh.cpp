#include "morphshell/mesh.hpp"
#include "morphshell/mesh_io.hpp"
#include "morphshell/verification.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>

using namespace morphshell;
using namespace morphshell::testing;

namespace {

Mesh single_triangle() {
  return build_mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}}, {});
}

// Rotates node `o2` of the two-triangle mesh about the shared x-axis edge.
DofVector folded_pair(double angle) {
  const Mesh m = two_triangle_mesh();
  DofVector x = DofVector::rest(m);
  const Vec3 p = x.node(3);
  x.set_node(3, Vec3(p.x(), p.y() * std::cos(angle), p.y() * std::sin(angle)));
  return x;
}

double independent_angle(const Mesh& m, const DofVector& x, int h) {
  const Hinge& hg = m.hinge(h);
  auto normal = [&](int t) {
    const Triangle& v = m.triangles()[static_cast<std::size_t>(t)];
    const Vec3 a = x.node(v[0]), b = x.node(v[1]), c = x.node(v[2]);
    return Vec3((b - a).cross(c - a).normalized());
  };
  const Vec3 n1 = normal(hg.triangles[0]), n2 = normal(hg.triangles[1]);
  const Vec3 e = (x.node(hg.nodes[1]) - x.node(hg.nodes[0])).normalized();
  return std::atan2(n1.cross(n2).dot(e), n1.dot(n2));
}

}  // namespace

TEST(BuildMesh, SingleTriangleHasThreeEdgesNoHinges) {
  const Mesh m = single_triangle();
  EXPECT_EQ(m.num_edges(), 3);
  EXPECT_EQ(m.num_hinges(), 0);
  for (const Edge& e : m.edges()) EXPECT_TRUE(e.is_boundary());
}

TEST(BuildMesh, TwoTrianglesShareOneHinge) {
  const Mesh m = two_triangle_mesh();
  EXPECT_EQ(m.num_nodes(), 4);
  EXPECT_EQ(m.num_edges(), 5);
  EXPECT_EQ(m.num_hinges(), 1);
  const Hinge& h = m.hinge(0);
  EXPECT_EQ(h.nodes[0], 0);
  EXPECT_EQ(h.nodes[1], 1);
  EXPECT_EQ(h.nodes[2], 2);
  EXPECT_EQ(h.nodes[3], 3);
  EXPECT_EQ(m.edge(h.flank_edges[0]).nodes, (std::array<int, 2>{0, 2}));
  EXPECT_EQ(m.edge(h.flank_edges[1]).nodes, (std::array<int, 2>{1, 2}));
  EXPECT_EQ(m.edge(h.flank_edges[2]).nodes, (std::array<int, 2>{0, 3}));
  EXPECT_EQ(m.edge(h.flank_edges[3]).nodes, (std::array<int, 2>{1, 3}));
  EXPECT_EQ(h.signs, (std::array<int, 4>{1, 1, -1, -1}));
}

TEST(BuildMesh, BundledPatternStatistics) {
  struct Expected {
    char pattern;
    int nodes, triangles;
    double l0;
  };
  for (const Expected& e : {Expected{'a', 970, 1831, 3.2}, Expected{'b', 1215, 2291, 4.0},
                            Expected{'c', 388, 700, 5.8}}) {
    SCOPED_TRACE(e.pattern);
    const Mesh m = load_mesh(pattern_path(e.pattern));
    EXPECT_EQ(m.num_nodes(), e.nodes);
    EXPECT_EQ(m.num_triangles(), e.triangles);
    EXPECT_EQ(3 * m.num_triangles(), 2 * m.num_hinges() + (m.num_edges() - m.num_hinges()));
    EXPECT_NEAR(m.mean_edge_length(), e.l0, 0.05 * e.l0);
    EXPECT_GT(m.count_edges(Region::Bilayer), 0);
    EXPECT_GT(m.count_edges(Region::SingleLayer), 0);
  }
}

TEST(BuildMesh, HingeInvariantsOnPatterns) {
  for (char p : {'a', 'b', 'c'}) {
    SCOPED_TRACE(p);
    const Mesh m = load_mesh(pattern_path(p));
    int interior = 0;
    for (const Edge& e : m.edges()) {
      EXPECT_GT(e.rest_length, 0.0);
      if (!e.is_boundary()) ++interior;
    }
    EXPECT_EQ(m.num_hinges(), interior);
    for (const Hinge& h : m.hinges()) {
      const Edge& shared = m.edge(h.edge);
      EXPECT_FALSE(shared.is_boundary());
      EXPECT_EQ(h.signs[0] + h.signs[1] + h.signs[2] + h.signs[3], 0);
      EXPECT_EQ(h.signs[0], h.signs[1]);
      EXPECT_EQ(h.signs[2], h.signs[3]);
      EXPECT_LT(h.triangles[0], h.triangles[1]);
      EXPECT_EQ(h.rest_angle, 0.0);
    }
  }
}

TEST(BuildMesh, EdgeRegionFollowsAnyBilayerNeighbour) {
  const Mesh m = two_triangle_mesh(std::vector<int>{0});
  EXPECT_EQ(m.edge(m.find_edge(0, 1)).region, Region::Bilayer);
  EXPECT_EQ(m.edge(m.find_edge(0, 2)).region, Region::Bilayer);
  EXPECT_EQ(m.edge(m.find_edge(0, 3)).region, Region::SingleLayer);
  EXPECT_EQ(m.edge(m.find_edge(1, 3)).region, Region::SingleLayer);
}

TEST(BuildMesh, RejectsBadInput) {
  EXPECT_THROW(build_mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 3}}, {}), InputError);
  EXPECT_THROW(build_mesh({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}, {{0, 1, 2}}, {}), InputError);
  EXPECT_THROW(build_mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}}, std::vector<int>{1}),
               InputError);
  // Flipped neighbour.
  EXPECT_THROW(build_mesh({{0, 0, 0}, {1, 0, 0}, {0.5, 1, 0}, {0.5, -1, 0}}, {{0, 1, 2}, {0, 1, 3}}, {}),
               InputError);
  // Three triangles on one edge.
  EXPECT_THROW(build_mesh({{0, 0, 0}, {1, 0, 0}, {0.5, 1, 0}, {0.5, -1, 0}, {0.5, 0, 1}},
                          {{0, 1, 2}, {1, 0, 3}, {0, 1, 4}}, {}),
               InputError);
  EXPECT_THROW(build_mesh({}, {}, {}), InputError);
}

TEST(DofVector, LengthAndFiniteness) {
  const Mesh m = load_mesh(pattern_path('c'));
  const DofVector x = DofVector::rest(m);
  EXPECT_EQ(x.size(), 3 * m.num_nodes());
  EXPECT_TRUE(x.all_finite());
  DofVector bad = x;
  bad.values()[5] = std::nan("");
  EXPECT_THROW(check_dofs(m, bad), InputError);
  EXPECT_THROW(check_dofs(m, DofVector(Eigen::VectorXd::Zero(6))), InputError);
}

TEST(AxialStrain, RestAndStretched) {
  const Mesh m = two_triangle_mesh();
  DofVector x = DofVector::rest(m);
  EXPECT_EQ(axial_strain(m, x, m.find_edge(0, 1)), 0.0);
  x.set_node(1, Vec3(1.5, 0, 0));
  EXPECT_NEAR(axial_strain(m, x, m.find_edge(0, 1)), 0.5, 1e-15);
}

TEST(AxialStrain, MatchesRawCoordinatesOnRandomStates) {
  std::mt19937_64 rng(7);
  const Mesh m = equilateral_strip(5, 5, 1.0);
  for (int s = 0; s < 20; ++s) {
    const DofVector x = perturbed(m, 0.2, rng);
    for (int e = 0; e < m.num_edges(); ++e) {
      const Edge& ed = m.edge(e);
      const Vec3 a = x.node(ed.nodes[0]), b = x.node(ed.nodes[1]);
      const double dx = a.x() - b.x(), dy = a.y() - b.y(), dz = a.z() - b.z();
      const double expected = std::sqrt(dx * dx + dy * dy + dz * dz) / ed.rest_length - 1.0;
      EXPECT_NEAR(axial_strain(m, x, e), expected, 1e-14);
    }
  }
}

TEST(AxialStrain, CollapsedEdgeThrows) {
  const Mesh m = two_triangle_mesh();
  DofVector x = DofVector::rest(m);
  x.set_node(1, x.node(0));
  EXPECT_THROW(axial_strain(m, x, m.find_edge(0, 1)), GeometryError);
}

TEST(DihedralAngle, FlatAndRightAngle) {
  const Mesh m = two_triangle_mesh();
  EXPECT_EQ(dihedral_angle(m, DofVector::rest(m), 0), 0.0);
  EXPECT_NEAR(std::abs(dihedral_angle(m, folded_pair(std::numbers::pi / 2), 0)),
              std::numbers::pi / 2, 1e-14);
}

TEST(DihedralAngle, SignFollowsFoldDirection) {
  const Mesh m = two_triangle_mesh();
  const double up = dihedral_angle(m, folded_pair(0.3), 0);
  const double down = dihedral_angle(m, folded_pair(-0.3), 0);
  EXPECT_NEAR(up, -down, 1e-14);
  EXPECT_NEAR(std::abs(up), 0.3, 1e-14);
}

TEST(DihedralAngle, MatchesNormalVectorOracle) {
  std::mt19937_64 rng(11);
  const Mesh m = equilateral_strip(5, 5, 1.0);
  for (int s = 0; s < 20; ++s) {
    const DofVector x = perturbed(m, 0.2, rng);
    for (int h = 0; h < m.num_hinges(); ++h) {
      EXPECT_NEAR(dihedral_angle(m, x, h), independent_angle(m, x, h), 1e-12);
    }
  }
}

TEST(Kinematics, RigidMotionInvariance) {
  std::mt19937_64 rng(3);
  const Mesh m = equilateral_strip(5, 4, 1.0);
  for (int s = 0; s < 10; ++s) {
    const DofVector x = perturbed(m, 0.2, rng);
    const DofVector y = transformed(x, random_rotation(rng), Vec3(3.0, -2.0, 5.0));
    for (int e = 0; e < m.num_edges(); ++e) {
      EXPECT_NEAR(axial_strain(m, x, e), axial_strain(m, y, e), 1e-12);
    }
    for (int h = 0; h < m.num_hinges(); ++h) {
      EXPECT_NEAR(dihedral_angle(m, x, h), dihedral_angle(m, y, h), 1e-12);
    }
  }
}

TEST(Kinematics, RestStrainGradientIsUnitAxisOverRestLength) {
  const Mesh m = equilateral_strip(4, 3, 1.7);
  const DofVector x = DofVector::rest(m);
  for (int e = 0; e < m.num_edges(); ++e) {
    const Edge& ed = m.edge(e);
    const EdgeGradient g = strain_gradient(m, x, e);
    const Vec3 axis = (m.node(ed.nodes[1]) - m.node(ed.nodes[0])).normalized();
    EXPECT_LT((Vec3(g.values.segment<3>(3)) - axis / ed.rest_length).norm(), 1e-14);
    EXPECT_LT((Vec3(g.values.segment<3>(0)) + axis / ed.rest_length).norm(), 1e-14);
  }
}

TEST(Kinematics, ElementDerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  const Mesh m = equilateral_strip(5, 5, 1.0);
  const double h = 1e-6 * m.mean_edge_length();
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int s = 0; s < 100; ++s) {
    const DofVector x = perturbed(m, 0.1, rng);
    const int hinge = s % m.num_hinges();
    const HingeGradient g = angle_gradient(m, x, hinge);
    const HingeHessian H = angle_hessian(m, x, hinge);
    EXPECT_EQ((H.values - H.values.transpose()).norm(), 0.0);
    Eigen::Matrix<double, 12, 1> v;
    for (int i = 0; i < 12; ++i) v[i] = u(rng);
    auto shifted = [&](double t) {
      DofVector y = x;
      for (int k = 0; k < 4; ++k) y.set_node(g.nodes[k], x.node(g.nodes[k]) + t * v.segment<3>(3 * k));
      return y;
    };
    const double fd = (dihedral_angle(m, shifted(h), hinge) - dihedral_angle(m, shifted(-h), hinge)) / (2 * h);
    EXPECT_LT(std::abs(fd - g.values.dot(v)), 1e-6 * std::abs(fd) + 1e-10);
    const Eigen::Matrix<double, 12, 1> gfd =
        (angle_gradient(m, shifted(h), hinge).values - angle_gradient(m, shifted(-h), hinge).values) / (2 * h);
    EXPECT_LT((gfd - H.values * v).norm(), 1e-5 * gfd.norm() + 1e-9);

    const int edge = s % m.num_edges();
    const EdgeGradient eg = strain_gradient(m, x, edge);
    const EdgeHessian eH = strain_hessian(m, x, edge);
    Eigen::Matrix<double, 6, 1> w = v.head<6>();
    auto eshift = [&](double t) {
      DofVector y = x;
      for (int k = 0; k < 2; ++k) y.set_node(eg.nodes[k], x.node(eg.nodes[k]) + t * w.segment<3>(3 * k));
      return y;
    };
    const double efd = (axial_strain(m, eshift(h), edge) - axial_strain(m, eshift(-h), edge)) / (2 * h);
    EXPECT_LT(std::abs(efd - eg.values.dot(w)), 1e-6 * std::abs(efd) + 1e-10);
    const Eigen::Matrix<double, 6, 1> egfd =
        (strain_gradient(m, eshift(h), edge).values - strain_gradient(m, eshift(-h), edge).values) / (2 * h);
    EXPECT_LT((egfd - eH.values * w).norm(), 1e-5 * egfd.norm() + 1e-9);
  }
}

TEST(MeshIo, NativeRoundTrip) {
  const auto dir = scratch_dir("mesh_io");
  const Mesh m = load_mesh(pattern_path('c'));
  write_mesh_file(dir / "c.mesh", m, DofVector::rest(m));
  const Mesh back = load_mesh(dir / "c.mesh");
  ASSERT_EQ(back.num_nodes(), m.num_nodes());
  EXPECT_EQ(back.triangles(), m.triangles());
  EXPECT_EQ(back.triangle_regions(), m.triangle_regions());
  for (int i = 0; i < m.num_nodes(); ++i) EXPECT_EQ(back.node(i), m.node(i));
}

TEST(MeshIo, ObjWithRegionSidecar) {
  const auto dir = scratch_dir("mesh_obj");
  const Mesh m = two_triangle_mesh(std::vector<int>{1});
  write_obj(dir / "pair.obj", m, DofVector::rest(m));
  std::ofstream(dir / "pair.regions") << "# bilayer\n1\n";
  const Mesh plain = load_mesh(dir / "pair.obj");
  EXPECT_EQ(plain.triangle_regions()[1], Region::SingleLayer);
  const Mesh flagged = load_mesh(dir / "pair.obj", dir / "pair.regions");
  EXPECT_EQ(flagged.triangle_regions()[1], Region::Bilayer);
  EXPECT_EQ(flagged.triangle_regions()[0], Region::SingleLayer);
}

TEST(MeshIo, MalformedFilesAreInputErrors) {
  const auto dir = scratch_dir("mesh_bad");
  std::ofstream(dir / "bad.mesh") << "nodes 3\n0 0 0 0\n1 1 0 0\n2 0 1\ntriangles 1\n0 0 1 2 0\n";
  EXPECT_THROW(load_mesh(dir / "bad.mesh"), InputError);
  EXPECT_THROW(load_mesh(dir / "missing.mesh"), InputError);
}
