#pragma once

#include "morphshell/common.hpp"
#include "morphshell/mesh.hpp"

#include <Eigen/Core>

#include <array>
#include <vector>

namespace morphshell {

/// Triangle soup used by the shape metrics; independent of Mesh topology so
/// that external scans can be compared directly.
struct TriangleSurface {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;

  static TriangleSurface from_mesh(const Mesh& mesh, const DofVector& x);

  /// Throws InputError when empty or when a triangle index is out of range.
  void validate() const;
};

struct BoundingBox {
  Vec3 lower = Vec3::Zero();
  Vec3 upper = Vec3::Zero();

  /// Cube centred on the surface's bounding box, edge = longest side
  /// * (1 + 2 * margin).
  static BoundingBox cube_around(const TriangleSurface& s, double margin = 0.05);
  static BoundingBox cube_around(const TriangleSurface& a, const TriangleSurface& b,
                                 double margin = 0.05);
};

/// N^3 grid of intensities in [0, max_intensity], x fastest.
class VoxelVolume {
 public:
  VoxelVolume(int n, const BoundingBox& box, double max_intensity = 1.0);

  int resolution() const { return n_; }
  const BoundingBox& box() const { return box_; }
  double max_intensity() const { return max_intensity_; }

  double& at(int i, int j, int k) { return data_[index(i, j, k)]; }
  double at(int i, int j, int k) const { return data_[index(i, j, k)]; }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  Vec3 voxel_size() const { return (box_.upper - box_.lower) / n_; }
  Vec3 voxel_center(int i, int j, int k) const;

 private:
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>((k * n_ + j) * n_ + i);
  }

  int n_;
  BoundingBox box_;
  double max_intensity_;
  std::vector<double> data_;
};

/// Closest point on triangle (a, b, c) to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Intensity of a voxel = fraction of its 4^3 sub-samples lying within half
/// a voxel diagonal of the surface, scaled to max_intensity.
VoxelVolume voxelize(const TriangleSurface& shape, const BoundingBox& box, int n,
                     double max_intensity = 1.0);

struct SsimResult {
  VoxelVolume map;  // per-voxel SSIM
  double mean = 0.0;
  double k1 = 0.01;
  double k2 = 0.03;
  double c1 = 0.0;
  double c2 = 0.0;
};

/// Structural similarity over 3x3x3 uniform windows truncated at the grid
/// boundary, c_i = (k_i L)^2, population (1/n) moments.
SsimResult ssim(const VoxelVolume& a, const VoxelVolume& b, double k1 = 0.01, double k2 = 0.03);

/// x -> scale * rotation * x + translation
struct SimilarityTransform {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
  TriangleSurface apply(const TriangleSurface& s) const;
};

/// Closed-form similarity fit mapping `from` onto corresponding `to` points
/// (centroids, RMS-radius scale, SVD rotation without reflection).
SimilarityTransform fit_similarity(const std::vector<Vec3>& from, const std::vector<Vec3>& to);

struct AlignmentResult {
  SimilarityTransform transform;  // maps sim onto ref
  double rms = 0.0;               // RMS vertex-to-surface distance after alignment
  int iterations = 0;
};

/// Iterative-closest-point similarity alignment of `sim` onto `ref`, started
/// from every proper principal-axis pairing and keeping the best result.
/// Stops when the RMS point-to-surface distance improves by less than
/// 1e-6 relative or after 100 iterations. Throws InputError when either
/// vertex set is coplanar (or collinear).
AlignmentResult align(const TriangleSurface& sim, const TriangleSurface& ref);

/// Height-over-diameter ratio h/d; see aspect_axes for the frame.
double aspect_ratio(const TriangleSurface& shape);

struct AspectFrame {
  Vec3 height_axis;
  double height = 0.0;
  double diameter = 0.0;
};

/// Height axis: the direction of the surface's vector area (sum of oriented
/// triangle areas), which for an open shell points through its rim; for
/// closed or self-cancelling surfaces it falls back to the principal axis of
/// least extent. h is the extent along that axis, d the largest principal
/// extent of the projection onto the perpendicular plane.
AspectFrame aspect_axes(const TriangleSurface& shape);

}  // namespace morphshell
