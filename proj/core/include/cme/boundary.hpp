#pragma once

#include <limits>
#include <stdexcept>
#include <vector>

#include "cme/geometry.hpp"

namespace cme {

struct Plane {
  Vec point, normal;  // unit normal
  double signed_dist(const Vec& p) const { return normal.dot(p - point); }
  double dist(const Vec& p) const { return std::abs(signed_dist(p)); }
};

struct MomentSums {
  double w = 0;
  Vec m1{};
  std::array<double, 6> m2{};  // xx, xy, xz, yy, yz, zz

  void add(const Vec& p, double wt) {
    w += wt;
    m1 = m1 + p * wt;
    m2[0] += wt * p.x * p.x;
    m2[1] += wt * p.x * p.y;
    m2[2] += wt * p.x * p.z;
    m2[3] += wt * p.y * p.y;
    m2[4] += wt * p.y * p.z;
    m2[5] += wt * p.z * p.z;
  }
};

// Total-least-squares plane (line in 2-D): through the weighted centroid,
// normal = eigenvector of the smallest covariance eigenvalue.
Plane plane_fit(const MomentSums& m, int dim);

// Exact length of the segment p1..p2 inside the closed disk B(c,r).
double segment_disk_length(const Vec& p1, const Vec& p2, const Vec& c, double r);

// Exact area of (convex polygon) cap disk(c, r); vertices in order.
double disk_polygon_area(const Vec& c, double r, const std::vector<Vec>& poly);

inline double box_disk_area(const Box& b, const Vec& c, double r) {
  return disk_polygon_area(
      c, r, {{b.lo.x, b.lo.y, 0}, {b.hi.x, b.lo.y, 0}, {b.hi.x, b.hi.y, 0}, {b.lo.x, b.hi.y, 0}});
}

// An n-dimensional boundary set E in R^(n+1), carrying sigma = H^n|_E:
// analytic geometry plus a weighted sample cloud. Unbounded kinds store
// samples only inside [-extent, extent]^dim but answer distance queries for
// the full infinite set.
class BoundarySet {
 public:
  enum class Kind { FlatLine, FlatPlane3, LipschitzGraph, Circle, Sphere, Cantor, Polyline };

  static BoundarySet flat_line(double extent, double spacing);
  // same infinite-line distance field, samples restricted to [x0, x1]
  static BoundarySet flat_line_window(double x0, double x1, double spacing);
  static BoundarySet flat_plane3(double extent, double spacing);
  // knots = (x_i, y_i) with x strictly increasing; constant extension outside.
  static BoundarySet lipschitz_graph(std::vector<Vec> knots, double extent, double spacing);
  static BoundarySet circle(Vec center, double radius, double spacing);
  static BoundarySet sphere(Vec center, double radius, int n_samples);
  static BoundarySet cantor_four_corners(int generation, int subsamples);
  static BoundarySet polyline(std::vector<Vec> vertices, double spacing);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }            // ambient dimension n+1
  int surface_dim() const { return dim_ - 1; }
  bool bounded() const;
  double diameter() const;  // +inf for unbounded kinds
  double sample_spacing() const { return spacing_; }
  double extent() const { return extent_; }
  double window_offset() const { return offset_; }
  double lipschitz_bound() const { return lip_; }

  const std::vector<Vec>& samples() const { return pts_; }
  const std::vector<double>& weights() const { return wts_; }
  double total_mass() const { return total_mass_; }

  double distance(const Vec& p) const;
  bool member(const Vec& p, double tol) const { return distance(p) <= tol; }

  // dist(b, E) between the closed box and the set, exact per shape.
  double box_distance(const Box& b) const;

  // sigma(B(c,r) cap E), exact per shape (2-D) or sample-based (3-D kinds).
  double ball_mass(const Vec& c, double r) const;
  double ball_mass_sampled(const Vec& c, double r) const;

  MomentSums ball_moments(const Vec& c, double r) const;

  // sup over E cap B(c,r) of distance to H; exact for the planar shapes,
  // sample-based for the 3-D ones. Returns 0 when the intersection is empty.
  double sup_dist_to_plane(const Plane& h, const Vec& c, double r) const;

  // sup over H cap B(c,r) of distance to E, by 1-Lipschitz refinement
  // sampling; the result is within tol of the true supremum.
  double sup_plane_to_set(const Plane& h, const Vec& c, double r, double tol) const;

  // Resample the same geometry at half the spacing (refinement studies).
  BoundarySet refined() const;

  // Smallest geometric length scale of the shape itself: cell size for the
  // Cantor sets, radius for circles and spheres, shortest segment for graphs
  // and polylines. Flat sets have none and report a huge value.
  double finest_feature() const;

  // Circle scenarios: closed-form bounded harmonic extension of the
  // coordinate trace (x - cx)/R, valid inside and outside the circle.
  double circle_trace_harmonic(const Vec& p) const;

  Vec circle_center() const { return center_; }
  double circle_radius() const { return radius_; }
  int cantor_generation() const { return generation_; }

 private:
  Kind kind_ = Kind::FlatLine;
  int dim_ = 2;
  double extent_ = 0, spacing_ = 0, lip_ = 0;
  double offset_ = 0;  // x shift of the FlatLine sampling window
  Vec center_{};
  double radius_ = 0;
  int generation_ = 0, subsamples_ = 1;
  std::vector<Vec> knots_;  // graph knots or polyline vertices
  std::vector<Vec> pts_;
  std::vector<double> wts_;
  double total_mass_ = 0;

  void build_samples();
  double graph_height(double x) const;
};

struct AdrParams {
  int centers = 48;
  int radii = 10;
  double r_min = 0, r_max = 0;  // 0: derived from the shape
  uint64_t seed = 7;
};

struct AdrScale {
  double r = 0;
  double min_ratio = 0, max_ratio = 0;
};

struct AdrReport {
  double c_lower = 0, C_upper = 0;   // inf and sup of sigma(B(x,r))/r^n
  double ratio = 0;                  // C_upper / c_lower
  double drift = 0;                  // relative movement under sample refinement
  int trials = 0;
  bool pass = false;                 // finite, nonzero, drift within 10%
  std::vector<AdrScale> scales;      // one row per trial radius
};

AdrReport verify_adr(const BoundarySet& e, const AdrParams& params);

}  // namespace cme
