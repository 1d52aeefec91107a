#pragma once

#include <iosfwd>
#include <utility>

#include "cme/corona.hpp"
#include "cme/whitney.hpp"

namespace cme {

// One axis-aligned piece of a box-union boundary. rect is degenerate along
// axis (rect.lo[axis] == rect.hi[axis]); orient is the outward normal sign.
struct Face {
  Box rect;
  int axis = 0;
  int orient = 0;
};

// int(union of fattened Whitney cubes). boxes are the fattened cubes, aligned
// with the decomposition indices in cubes.
struct RegionUnion {
  enum class Role { whitney, carleson, sawtooth, domain };
  Role role = Role::whitney;
  int dim = 2;
  double tau = 0;
  std::vector<int32_t> cubes;   // sorted unique decomposition indices
  std::vector<Box> boxes;       // fattened, aligned with cubes
  bool in_control_ball = true;  // carleson boxes: every box inside B(x_Q, K l(Q))

  bool empty() const { return boxes.empty(); }
  Box bounding_box() const;
  double diam() const;
  // strictly inside some box; the shared faces the interior also picks up are
  // volume-null and none of the probes below care
  bool contains(const Vec& p) const;
  double dist_to_closure(const Vec& p) const;  // 0 on or inside the closure
  double volume() const;                       // exact union volume
  // components of the open union: original cubes connect when they share a
  // face, edge or corner (any closed contact fattens into volume overlap)
  int component_count() const;
  void dump(std::ostream& os) const;
};

// Exact topological boundary of the open union, as rectangles cut from box
// faces. A face piece survives where no other box covers that side.
std::vector<Face> region_boundary_faces(const RegionUnion& r);
double faces_measure(const std::vector<Face>& faces, int dim);
// H^n of the boundary inside the closed ball B(c,r), exact per face
double faces_measure_in_ball(const std::vector<Face>& faces, int dim, const Vec& c, double r);
double dist_to_faces(const std::vector<Face>& faces, const Vec& p);

// W_Q with its fattened-cube components. For a cube inside a stopping regime
// the Whitney collection is augmented along Harnack paths and splits into the
// two sides of the regime graph; components.front() is the + side. For a bad
// cube the components keep their natural (unlabeled) flood-fill structure,
// ordered by their lexicographically smallest member.
struct WhitneyRegion {
  CubeId owner{};
  bool good = false;
  int32_t regime = -1;
  std::vector<int32_t> cubes;  // sorted decomposition indices
  std::vector<int8_t> side;    // aligned with cubes: +1 / -1, 0 when unlabeled

  struct Component {
    int side = 0;
    std::vector<int32_t> cubes;
    Vec center{};           // X_Q for this component
    Vec modified_center{};  // Y_Q: the parent cube's center on the same side
  };
  std::vector<Component> components;

  double min_len = 0, max_len = 0;  // cube side range over W_Q
  const Component* side_component(int s) const;
};

struct NTAReport {
  int boundary_samples = 0;
  int pair_samples = 0;
  double interior_c = 0;  // worst corkscrew constants over the samples
  double exterior_c = 0;
  double lambda = 0;      // aspect bound the Harnack pairs were drawn with
  int worst_chain = 0;    // longest chain needed
  int failures = 0;
  bool pass = false;
};

struct ADRReport {
  int samples = 0;
  double min_ratio = 1e300, max_ratio = 0;  // H^n(B(x,r) cap bdry) / r^n
  double boundary_measure = 0;
};

struct ContainmentCheck {
  int kept_samples = 0, kept_failures = 0;    // Q0 minus union(F) must meet the boundary
  int near_samples = 0, near_failures = 0;    // boundary may only meet cl(Q0) minus int(F)
  double tol = 0;
  bool pass() const { return kept_failures == 0 && near_failures == 0; }
};

// Whitney regions, Carleson boxes and sawtooth domains over one grid, Whitney
// decomposition and corona. Regions for every grid cube are built up front,
// in parallel across cubes.
class RegionBuilder {
 public:
  RegionBuilder(const SurfaceGrid& g, const WhitneyDecomposition& w,
                const CoronaDecomposition& c, double tau);

  const SurfaceGrid& grid() const { return g_; }
  const WhitneyDecomposition& whitney() const { return w_; }
  const CoronaDecomposition& corona() const { return c_; }
  double tau() const { return tau_; }

  const WhitneyRegion& whitney_region(const CubeId& q) const;

  // U_Q as a region; side +1/-1 restricts to that component, 0 takes all of
  // W_Q. tau_mult = 2 gives the fattened variant.
  RegionUnion whitney_union(const CubeId& q, int side = 0, double tau_mult = 1) const;

  std::vector<CubeId> descendants(const CubeId& q) const;  // D_Q within the grid

  // T_Q = int(union of U_Q' over Q' below Q); in_control_ball records the
  // B(x_Q, K l(Q)) containment check
  RegionUnion carleson_box(const CubeId& q) const;

  // D_{F,Q}: descendants of Q minus descendants of the (disjoint) family F
  std::vector<CubeId> discrete_sawtooth(const std::vector<CubeId>& f, const CubeId& q) const;
  RegionUnion geometric_sawtooth(const std::vector<CubeId>& f, const CubeId& q) const;

  // Omega^+ and Omega^- for a semi-coherent subregime: the side unions over
  // its members. Throws if the subregime is malformed or a side disconnects.
  std::pair<RegionUnion, RegionUnion> regime_domain(const StoppingRegime& sub) const;

  // max over a probe lattice of the number of regions U_Q covering a point
  int max_region_overlap(int probes_per_side) const;

 private:
  const SurfaceGrid& g_;
  const WhitneyDecomposition& w_;
  const CoronaDecomposition& c_;
  double tau_;
  std::vector<std::vector<WhitneyRegion>> regions_;  // [k - k_min][level index]

  void build_region(WhitneyRegion& r) const;
  void augment_with_paths(WhitneyRegion& r, const StoppingRegime& s, const Vec& x_plus,
                          const Vec& x_minus) const;
  RegionUnion materialize(std::vector<int32_t> cube_idx, RegionUnion::Role role,
                          double tau) const;
};

NTAReport verify_nta(const RegionUnion& omega, int trials, double lambda = 8, uint64_t seed = 1);
ADRReport verify_sawtooth_adr(const RegionUnion& omega, int trials, uint64_t seed = 1);
ContainmentCheck boundary_containment_check(const RegionBuilder& rb,
                                            const std::vector<CubeId>& f, const CubeId& q0);

}  // namespace cme
