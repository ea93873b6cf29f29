#include "morphshell/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace morphshell {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Aabb {
  Vec3 lo = Vec3::Constant(kInf);
  Vec3 hi = Vec3::Constant(-kInf);

  void grow(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void grow(const Aabb& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  double squared_distance(const Vec3& p) const {
    const Vec3 d = (lo - p).cwiseMax(Vec3::Zero()).cwiseMax(p - hi);
    return d.squaredNorm();
  }
};

// Bounding-volume hierarchy over triangles for closest-point queries.
class TriangleTree {
 public:
  explicit TriangleTree(const TriangleSurface& s) : s_(s) {
    const int nt = static_cast<int>(s.triangles.size());
    order_.resize(static_cast<std::size_t>(nt));
    std::iota(order_.begin(), order_.end(), 0);
    boxes_.resize(static_cast<std::size_t>(nt));
    centers_.resize(static_cast<std::size_t>(nt));
    for (int t = 0; t < nt; ++t) {
      Aabb b;
      for (int k : s.triangles[static_cast<std::size_t>(t)]) {
        b.grow(s.vertices[static_cast<std::size_t>(k)]);
      }
      boxes_[static_cast<std::size_t>(t)] = b;
      centers_[static_cast<std::size_t>(t)] = 0.5 * (b.lo + b.hi);
    }
    nodes_.reserve(static_cast<std::size_t>(2 * nt));
    build(0, nt);
  }

  // Squared distance and closest point to p.
  double closest(const Vec3& p, Vec3* point = nullptr) const {
    double best = kInf;
    Vec3 best_point = Vec3::Zero();
    search(0, p, best, best_point);
    if (point) {
      *point = best_point;
    }
    return best;
  }

  // Calls f(t) for every triangle whose box comes within `radius` of `box`.
  template <typename F>
  void overlapping(const Aabb& box, double radius, F&& f) const {
    visit(0, box, radius, f);
  }

 private:
  struct Node {
    Aabb box;
    int begin, end;  // leaf range in order_
    int left = -1, right = -1;
  };

  int build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    Aabb box;
    for (int i = begin; i < end; ++i) {
      box.grow(boxes_[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])]);
    }
    nodes_[static_cast<std::size_t>(id)].box = box;
    nodes_[static_cast<std::size_t>(id)].begin = begin;
    nodes_[static_cast<std::size_t>(id)].end = end;
    if (end - begin <= 4) {
      return id;
    }
    Eigen::Index axis;
    (box.hi - box.lo).maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) {
                       const double ca = centers_[static_cast<std::size_t>(a)][axis];
                       const double cb = centers_[static_cast<std::size_t>(b)][axis];
                       return ca < cb || (ca == cb && a < b);
                     });
    const int l = build(begin, mid);
    const int r = build(mid, end);
    nodes_[static_cast<std::size_t>(id)].left = l;
    nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  void search(int id, const Vec3& p, double& best, Vec3& best_point) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.box.squared_distance(p) >= best) {
      return;
    }
    if (n.left < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        const auto& t = s_.triangles[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])];
        const Vec3 q = closest_point_on_triangle(p, s_.vertices[static_cast<std::size_t>(t[0])],
                                                 s_.vertices[static_cast<std::size_t>(t[1])],
                                                 s_.vertices[static_cast<std::size_t>(t[2])]);
        const double d = (q - p).squaredNorm();
        if (d < best) {
          best = d;
          best_point = q;
        }
      }
      return;
    }
    const Node& a = nodes_[static_cast<std::size_t>(n.left)];
    const Node& b = nodes_[static_cast<std::size_t>(n.right)];
    if (a.box.squared_distance(p) <= b.box.squared_distance(p)) {
      search(n.left, p, best, best_point);
      search(n.right, p, best, best_point);
    } else {
      search(n.right, p, best, best_point);
      search(n.left, p, best, best_point);
    }
  }

  template <typename F>
  void visit(int id, const Aabb& box, double radius, F& f) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    const Vec3 gap = (n.box.lo - box.hi).cwiseMax(box.lo - n.box.hi).cwiseMax(Vec3::Zero());
    if (gap.squaredNorm() > radius * radius) {
      return;
    }
    if (n.left < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        f(order_[static_cast<std::size_t>(i)]);
      }
      return;
    }
    visit(n.left, box, radius, f);
    visit(n.right, box, radius, f);
  }

  const TriangleSurface& s_;
  std::vector<int> order_;
  std::vector<Aabb> boxes_;
  std::vector<Vec3> centers_;
  std::vector<Node> nodes_;
};

Vec3 centroid(const std::vector<Vec3>& pts) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) {
    c += p;
  }
  return c / static_cast<double>(pts.size());
}

// Eigen-decomposition of the vertex covariance; eigenvalues ascending.
Eigen::SelfAdjointEigenSolver<Mat3> principal_frame(const std::vector<Vec3>& pts, const Vec3& c) {
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) {
    cov += (p - c) * (p - c).transpose();
  }
  cov /= static_cast<double>(pts.size());
  return Eigen::SelfAdjointEigenSolver<Mat3>(cov);
}

void require_volume(const std::vector<Vec3>& pts, const char* which) {
  if (pts.size() < 4) {
    throw InputError(std::string(which) + " shape needs at least 4 points for alignment");
  }
  const auto eig = principal_frame(pts, centroid(pts));
  const Vec3 ev = eig.eigenvalues();
  if (!(ev[0] > 1e-12 * ev[2])) {
    throw InputError(std::string(which) + " shape is degenerate (coplanar or collinear points)");
  }
}

}  // namespace

TriangleSurface TriangleSurface::from_mesh(const Mesh& mesh, const DofVector& x) {
  check_dofs(mesh, x);
  return {x.to_nodes(), mesh.triangles()};
}

void TriangleSurface::validate() const {
  if (vertices.empty() || triangles.empty()) {
    throw InputError("shape is empty");
  }
  const int n = static_cast<int>(vertices.size());
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    for (int k : triangles[t]) {
      if (k < 0 || k >= n) {
        throw InputError("shape triangle " + std::to_string(t) + " references vertex " +
                         std::to_string(k) + " out of range");
      }
    }
  }
  for (const auto& v : vertices) {
    if (!v.allFinite()) {
      throw InputError("shape has non-finite vertices");
    }
  }
}

BoundingBox BoundingBox::cube_around(const TriangleSurface& s, double margin) {
  return cube_around(s, s, margin);
}

BoundingBox BoundingBox::cube_around(const TriangleSurface& a, const TriangleSurface& b,
                                     double margin) {
  a.validate();
  b.validate();
  Aabb box;
  for (const auto& p : a.vertices) {
    box.grow(p);
  }
  for (const auto& p : b.vertices) {
    box.grow(p);
  }
  const Vec3 c = 0.5 * (box.lo + box.hi);
  double half = 0.5 * (box.hi - box.lo).maxCoeff() * (1.0 + 2.0 * margin);
  if (!(half > 0.0)) {
    half = 1.0;
  }
  return {c - Vec3::Constant(half), c + Vec3::Constant(half)};
}

VoxelVolume::VoxelVolume(int n, const BoundingBox& box, double max_intensity)
    : n_(n), box_(box), max_intensity_(max_intensity) {
  if (n < 2) {
    throw InputError("voxel resolution must be >= 2");
  }
  if (!((box.upper - box.lower).minCoeff() > 0.0)) {
    throw InputError("voxel box must have positive extent");
  }
  if (!(max_intensity > 0.0)) {
    throw InputError("voxel max intensity must be positive");
  }
  data_.assign(static_cast<std::size_t>(n) * n * n, 0.0);
}

Vec3 VoxelVolume::voxel_center(int i, int j, int k) const {
  return box_.lower + voxel_size().cwiseProduct(Vec3(i + 0.5, j + 0.5, k + 0.5));
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5).
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + d1 / (d1 - d3) * ab;
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + d2 / (d2 - d6) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b);
  }
  const double denom = va + vb + vc;
  if (!(denom > 0.0)) {
    // Degenerate triangle: fall back to the nearest edge point.
    Vec3 best = a;
    for (const auto& [u, v] : {std::pair{a, b}, std::pair{b, c}, std::pair{c, a}}) {
      const Vec3 e = v - u;
      const double len2 = e.squaredNorm();
      const double t = len2 > 0.0 ? std::clamp((p - u).dot(e) / len2, 0.0, 1.0) : 0.0;
      const Vec3 q = u + t * e;
      if ((q - p).squaredNorm() < (best - p).squaredNorm()) best = q;
    }
    return best;
  }
  const double v = vb / denom, w = vc / denom;
  return a + ab * v + ac * w;
}

VoxelVolume voxelize(const TriangleSurface& shape, const BoundingBox& box, int n,
                     double max_intensity) {
  shape.validate();
  VoxelVolume vol(n, box, max_intensity);
  const TriangleTree tree(shape);
  const Vec3 h = vol.voxel_size();
  const double radius = 0.5 * h.norm();
  const double r2 = radius * radius;
  constexpr int kSub = 4;
  std::vector<int> candidates;
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        Aabb cell;
        cell.lo = box.lower + h.cwiseProduct(Vec3(i, j, k));
        cell.hi = cell.lo + h;
        candidates.clear();
        tree.overlapping(cell, radius, [&](int t) { candidates.push_back(t); });
        if (candidates.empty()) {
          continue;
        }
        int hits = 0;
        for (int c = 0; c < kSub; ++c) {
          for (int b = 0; b < kSub; ++b) {
            for (int a = 0; a < kSub; ++a) {
              const Vec3 p =
                  cell.lo + h.cwiseProduct(Vec3(a + 0.5, b + 0.5, c + 0.5) / kSub);
              for (int t : candidates) {
                const auto& tri = shape.triangles[static_cast<std::size_t>(t)];
                const Vec3 q = closest_point_on_triangle(
                    p, shape.vertices[static_cast<std::size_t>(tri[0])],
                    shape.vertices[static_cast<std::size_t>(tri[1])],
                    shape.vertices[static_cast<std::size_t>(tri[2])]);
                if ((q - p).squaredNorm() <= r2) {
                  ++hits;
                  break;
                }
              }
            }
          }
        }
        vol.at(i, j, k) =
            std::clamp(max_intensity * hits / double(kSub * kSub * kSub), 0.0, max_intensity);
      }
    }
  }
  return vol;
}

SsimResult ssim(const VoxelVolume& a, const VoxelVolume& b, double k1, double k2) {
  const int n = a.resolution();
  if (b.resolution() != n || a.box().lower != b.box().lower || a.box().upper != b.box().upper) {
    throw InputError("ssim: volumes must share resolution and bounding box");
  }
  if (a.max_intensity() != b.max_intensity()) {
    throw InputError("ssim: volumes must share the intensity range");
  }
  SsimResult out{VoxelVolume(n, a.box(), 1.0), 0.0, k1, k2, 0.0, 0.0};
  const double L = a.max_intensity();
  out.c1 = (k1 * L) * (k1 * L);
  out.c2 = (k2 * L) * (k2 * L);
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const int i0 = std::max(i - 1, 0), i1 = std::min(i + 1, n - 1);
        const int j0 = std::max(j - 1, 0), j1 = std::min(j + 1, n - 1);
        const int k0 = std::max(k - 1, 0), k1w = std::min(k + 1, n - 1);
        double sa = 0.0, sb = 0.0;
        int count = 0;
        for (int kk = k0; kk <= k1w; ++kk)
          for (int jj = j0; jj <= j1; ++jj)
            for (int ii = i0; ii <= i1; ++ii) {
              sa += a.at(ii, jj, kk);
              sb += b.at(ii, jj, kk);
              ++count;
            }
        const double ma = sa / count, mb = sb / count;
        double vaa = 0.0, vbb = 0.0, vab = 0.0;
        for (int kk = k0; kk <= k1w; ++kk)
          for (int jj = j0; jj <= j1; ++jj)
            for (int ii = i0; ii <= i1; ++ii) {
              const double da = a.at(ii, jj, kk) - ma;
              const double db = b.at(ii, jj, kk) - mb;
              vaa += da * da;
              vbb += db * db;
              vab += da * db;
            }
        vaa /= count;
        vbb /= count;
        vab /= count;
        const double s = ((2.0 * ma * mb + out.c1) * (2.0 * vab + out.c2)) /
                         ((ma * ma + mb * mb + out.c1) * (vaa + vbb + out.c2));
        out.map.at(i, j, k) = s;
        total += s;
      }
    }
  }
  out.mean = total / (static_cast<double>(n) * n * n);
  return out;
}

TriangleSurface SimilarityTransform::apply(const TriangleSurface& s) const {
  TriangleSurface out = s;
  for (auto& v : out.vertices) {
    v = apply(v);
  }
  return out;
}

SimilarityTransform fit_similarity(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
  if (from.size() != to.size() || from.size() < 3) {
    throw InputError("fit_similarity needs at least 3 corresponding points");
  }
  const Vec3 cf = centroid(from), ct = centroid(to);
  Mat3 cov = Mat3::Zero();
  double rf = 0.0, rt = 0.0;
  for (std::size_t i = 0; i < from.size(); ++i) {
    cov += (to[i] - ct) * (from[i] - cf).transpose();
    rf += (from[i] - cf).squaredNorm();
    rt += (to[i] - ct).squaredNorm();
  }
  if (!(rf > 0.0)) {
    throw InputError("fit_similarity: source points coincide");
  }
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
    d(2, 2) = -1.0;
  }
  SimilarityTransform t;
  t.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  t.scale = std::sqrt(rt / rf);
  t.translation = ct - t.scale * (t.rotation * cf);
  return t;
}

AlignmentResult align(const TriangleSurface& sim, const TriangleSurface& ref) {
  sim.validate();
  ref.validate();
  require_volume(sim.vertices, "simulated");
  require_volume(ref.vertices, "reference");

  const TriangleTree tree(ref);
  const Vec3 cs = centroid(sim.vertices), cr = centroid(ref.vertices);
  const auto es = principal_frame(sim.vertices, cs);
  const auto er = principal_frame(ref.vertices, cr);
  const double s0 = std::sqrt(er.eigenvalues().sum() / es.eigenvalues().sum());

  AlignmentResult best;
  best.rms = kInf;
  const std::vector<Vec3>& pts = sim.vertices;
  std::vector<Vec3> moved(pts.size()), targets(pts.size());
  for (int flips = 0; flips < 4; ++flips) {
    Mat3 s = Mat3::Identity();
    s(0, 0) = (flips & 1) ? -1.0 : 1.0;
    s(1, 1) = (flips & 2) ? -1.0 : 1.0;
    Mat3 r = er.eigenvectors() * s * es.eigenvectors().transpose();
    if (r.determinant() < 0.0) {
      s(2, 2) = -1.0;
      r = er.eigenvectors() * s * es.eigenvectors().transpose();
    }
    SimilarityTransform t{s0, r, cr - s0 * (r * cs)};

    auto residual = [&](const SimilarityTransform& tr) {
      double sum = 0.0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        moved[i] = tr.apply(pts[i]);
        sum += tree.closest(moved[i], &targets[i]);
      }
      return std::sqrt(sum / static_cast<double>(pts.size()));
    };

    double rms = residual(t);
    int it = 0;
    while (it < 100 && rms > 0.0) {
      ++it;
      const SimilarityTransform next = fit_similarity(pts, targets);
      const double next_rms = residual(next);
      if (!(next_rms < rms)) {
        residual(t);  // restore correspondences for t
        break;
      }
      const double gain = (rms - next_rms) / rms;
      t = next;
      rms = next_rms;
      if (gain < 1e-6) {
        break;
      }
    }
    if (rms < best.rms) {
      best.transform = t;
      best.rms = rms;
      best.iterations = it;
    }
  }
  return best;
}

AspectFrame aspect_axes(const TriangleSurface& shape) {
  shape.validate();
  const auto& v = shape.vertices;
  Vec3 vector_area = Vec3::Zero();
  double total_area = 0.0;
  for (const auto& t : shape.triangles) {
    const Vec3 c = (v[static_cast<std::size_t>(t[1])] - v[static_cast<std::size_t>(t[0])])
                       .cross(v[static_cast<std::size_t>(t[2])] - v[static_cast<std::size_t>(t[0])]);
    vector_area += 0.5 * c;
    total_area += 0.5 * c.norm();
  }
  const Vec3 c = centroid(v);
  const auto eig = principal_frame(v, c);
  AspectFrame f;
  if (vector_area.norm() > 1e-6 * total_area) {
    f.height_axis = vector_area.normalized();
  } else {
    f.height_axis = eig.eigenvectors().col(0);
  }
  // Orthonormal basis of the footprint plane.
  const Vec3 seed = std::abs(f.height_axis.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 u = f.height_axis.cross(seed).normalized();
  const Vec3 w = f.height_axis.cross(u);

  double hmin = kInf, hmax = -kInf;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  std::vector<Eigen::Vector2d> planar;
  planar.reserve(v.size());
  for (const auto& p : v) {
    const double z = (p - c).dot(f.height_axis);
    hmin = std::min(hmin, z);
    hmax = std::max(hmax, z);
    planar.emplace_back((p - c).dot(u), (p - c).dot(w));
    cov += planar.back() * planar.back().transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> e2(cov / static_cast<double>(v.size()));
  double dmax = 0.0;
  for (int axis = 0; axis < 2; ++axis) {
    double lo = kInf, hi = -kInf;
    for (const auto& q : planar) {
      const double s = q.dot(e2.eigenvectors().col(axis));
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    dmax = std::max(dmax, hi - lo);
  }
  f.height = hmax - hmin;
  f.diameter = dmax;
  return f;
}

double aspect_ratio(const TriangleSurface& shape) {
  const AspectFrame f = aspect_axes(shape);
  if (!(f.diameter > 0.0)) {
    throw InputError("aspect ratio undefined: zero footprint");
  }
  return f.height / f.diameter;
}

}  // namespace morphshell
