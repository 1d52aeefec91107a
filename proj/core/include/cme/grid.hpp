#pragma once

#include <iosfwd>

#include "cme/boundary.hpp"

namespace cme {

// One dyadic surface cube Q: the restriction of an ambient half-open dyadic
// box to E, carrying its share of the sample measure. center is an actual
// sample point (the one nearest the box center), so surface balls around it
// make sense. r_inner is the largest measured radius with ball(center) cap E
// inside Q (+inf when Q holds all of E); r_outer the smallest with Q inside
// the ball.
struct SurfaceCube {
  CubeId id;
  double mass = 0;
  Vec center{};
  double r_inner = 0, r_outer = 0;
  double bbox_diam = 0;      // diameter of the sample bounding box
  int32_t begin = 0, end = 0;  // sample index range in the generation order
  double len() const { return id.len(); }
};

// D(E): for each generation k in [k_min, k_max], every nonempty restriction
// of the ambient dyadic lattice. Construction is single-writer; the built
// grid is immutable and safe to query concurrently.
class SurfaceGrid {
 public:
  SurfaceGrid(BoundarySet e, int k_min, int k_max);

  const BoundarySet& boundary() const { return e_; }
  int k_min() const { return k_min_; }
  int k_max() const { return k_max_; }

  const std::vector<SurfaceCube>& generation(int k) const;
  const SurfaceCube* find(const CubeId& id) const;
  const SurfaceCube& cube(const CubeId& id) const;  // throws if absent
  bool has(const CubeId& id) const { return find(id) != nullptr; }
  std::vector<CubeId> children_of(const CubeId& id) const;

  size_t cube_count() const;

  // Sample indices of a cube, in its generation's grouped order.
  const int32_t* samples_begin(const SurfaceCube& q) const;
  const int32_t* samples_end(const SurfaceCube& q) const;

  // dist(box, Q): min over Q's samples of the box distance.
  double dist_to_cube(const Box& b, const SurfaceCube& q) const;
  double dist_to_cube(const Vec& p, const SurfaceCube& q) const;

  // One row per cube: k index center length mass.
  void dump(std::ostream& os) const;

 private:
  struct Level {
    std::vector<SurfaceCube> cubes;      // sorted by id
    std::vector<int32_t> order;          // samples grouped by cube
  };

  BoundarySet e_;
  int k_min_, k_max_;
  std::vector<Level> levels_;  // index k - k_min

  const Level& level(int k) const;
};

// sigma(Delta(x,r)) by weighted sample sum; x must lie on E up to tolerance.
double surface_ball_mass(const BoundarySet& e, const Vec& x, double r);

}  // namespace cme
