#pragma once

#include "cme/grid.hpp"

namespace cme {

// Plane fit of E inside B(x_Q, K len) with the two-sided flatness deficit:
//   sup_{x in E cap B} dist(x,H) + sup_{y in H cap B} dist(y,E),
// compared against eta*len.
struct PlaneFit {
  Plane h{};
  double sup_set_to_plane = 0;
  double sup_plane_to_set = 0;
  double deficiency = 0;
  bool undersampled = false;
  bool good = false;
};

PlaneFit bwgl_classify_ball(const BoundarySet& e, const Vec& x, double len, double eta, double K);
PlaneFit bwgl_classify(const SurfaceCube& q, const BoundarySet& e, double eta, double K);

// Lipschitz graph fitted to a stopping regime: heights over a base plane on a
// uniform knot lattice, nearest-sample values, constant beyond the data.
struct RegimeGraph {
  Plane base{};
  Vec t1{}, t2{};      // in-plane frame; t2 unused in 2-D
  int dim = 2;
  double u0 = 0, v0 = 0, s = 1;
  int nu = 1, nv = 1;
  std::vector<double> h;  // nu*nv heights, v-major rows
  double lip = 0;

  double height(double u, double v) const;  // interpolated, clamped outside
  Vec point(double u, double v) const;
  // signed offset of x along the normal, relative to the graph
  double side(const Vec& x) const;
  double dist(const Vec& x) const;
  void project(const Vec& x, double& u, double& v, double& w) const;
};

struct StoppingRegime {
  int32_t id = -1;
  CubeId root{};
  std::vector<CubeId> members;  // sorted, closed under parents up to root
  RegimeGraph gamma;
};

struct CoronaDecomposition {
  double eta = 0, K = 0;
  int k_min = 0, k_max = 0;
  std::vector<StoppingRegime> regimes;
  // per generation, aligned with SurfaceGrid order: regime id, or -1 for bad
  std::vector<std::vector<int32_t>> assign;
  std::vector<std::vector<PlaneFit>> fits;

  int32_t regime_of(const SurfaceGrid& g, const CubeId& id) const;
  bool is_good(const SurfaceGrid& g, const CubeId& id) const;
  const PlaneFit& fit_of(const SurfaceGrid& g, const CubeId& id) const;
  std::vector<CubeId> bad_cubes(const SurfaceGrid& g) const;

  struct Coherency {
    int stray_members = 0;    // member not descendant of its root
    int open_chains = 0;      // member whose parent chain leaves the regime
    int split_families = 0;   // sibling family partially inside
    int overlaps = 0;         // cube claimed twice or good-without-regime
    bool ok() const { return !stray_members && !open_chains && !split_families && !overlaps; }
  };
  Coherency check_coherency(const SurfaceGrid& g) const;
};

CoronaDecomposition build_corona(const SurfaceGrid& g, double eta, double K);

// sup over Q of sum of marked masses below Q, relative to sigma(Q)
double packing_constant(const std::vector<CubeId>& marked, const SurfaceGrid& g);

struct BilateralCheck {
  double set_to_graph = 0;  // sup over E cap B_Q* of dist to Gamma_S
  double graph_to_set = 0;  // sup over Gamma_S cap B_Q* of dist to E
  bool ok = false;
};

BilateralCheck verify_bilateral(const StoppingRegime& s, const SurfaceCube& q,
                                const BoundarySet& e, double eta, double K);

}  // namespace cme
