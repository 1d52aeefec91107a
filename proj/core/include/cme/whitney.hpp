#pragma once

#include "cme/grid.hpp"

namespace cme {

struct WhitneyCube {
  CubeId id;
  double dist_e = 0;              // dist(I, E), exact box distance
  int32_t nb_begin = 0, nb_end = 0;  // range into the shared neighbor array
};

// Dyadic Whitney decomposition of working_box minus E: accepted cubes satisfy
// 4 diam(I) <= dist(4I, E); rejected cells at the depth limit are dropped and
// reported as the guard band hugging E.
class WhitneyDecomposition {
 public:
  WhitneyDecomposition(const BoundarySet& e, const Box& working_box, int k_deepest,
                       double tau0 = 0.125);

  const BoundarySet& boundary() const { return e_; }
  const Box& working_box() const { return box_; }
  int k_deepest() const { return k_deepest_; }
  double tau0() const { return tau0_; }

  const std::vector<WhitneyCube>& cubes() const { return cubes_; }
  Box box(const WhitneyCube& c) const { return c.id.box(e_.dim()); }
  Box box(int32_t i) const { return box(cubes_[i]); }

  // I*(tau) = (1+tau) I; tau must lie in (0, tau0].
  Box fattened(int32_t i, double tau) const;

  int32_t index_of(const CubeId& id) const;  // -1 if absent
  int32_t find(const Vec& p) const;          // accepted cube containing p, -1 if none

  const int32_t* neighbors_begin(const WhitneyCube& c) const {
    return nbs_.data() + c.nb_begin;
  }
  const int32_t* neighbors_end(const WhitneyCube& c) const { return nbs_.data() + c.nb_end; }

  double covered_volume() const { return covered_volume_; }
  double uncovered_volume() const { return uncovered_volume_; }
  double guard_width() const { return guard_width_; }

  struct Check {
    size_t lower_violations = 0;   // 4 diam(I) <= dist(4I,E)
    size_t upper_violations = 0;   // dist(I,E) <= 40 diam(I)
    size_t ratio_violations = 0;   // touching sides within [1/4, 4]
    size_t fatten_violations = 0;  // I*(tau0) overlaps (3/4)J with volume
    double max_touch_ratio = 0;
    bool ok() const {
      return !lower_violations && !upper_violations && !ratio_violations &&
             !fatten_violations;
    }
  };
  Check check_properties() const;

  void dump(std::ostream& os) const;

 private:
  BoundarySet e_;
  Box box_;
  int k_deepest_;
  double tau0_;
  std::vector<WhitneyCube> cubes_;  // sorted by id
  std::vector<int32_t> nbs_;
  double covered_volume_ = 0, uncovered_volume_ = 0, guard_width_ = 0;
  int k_top_ = 0;
};

// Dilation with the decomposition's range rule, usable standalone.
Box fatten_box(const Box& b, double tau, double tau0);

// W_Q^0: Whitney cubes I with eta^{1/4} l(Q) <= l(I) <= K^{1/2} l(Q) and
// dist(I, Q) <= K^{1/2} l(Q). Closed inequalities; dist is measured from the
// closed box to Q's sample points.
std::vector<int32_t> w0_of_cube(const SurfaceGrid& g, const CubeId& q,
                                const WhitneyDecomposition& w, double eta, double K);

struct Corkscrew {
  Vec point{};
  double eps0 = 0;   // delta(point) / l(Q)
  int32_t cube = -1;  // Whitney cube supplying the point
};

// Interior corkscrew for the ball B(x_Q, l(Q)): the deepest point of
// half-ball reachable through Whitney cube centers.
Corkscrew corkscrew_point(const SurfaceGrid& g, const CubeId& q,
                          const WhitneyDecomposition& w);

}  // namespace cme
