#pragma once

#include <iosfwd>
#include <vector>

#include "cme/boundary.hpp"
#include "cme/grid.hpp"
#include "cme/region.hpp"

namespace cme {

// Dirichlet trace menu. The same object feeds both the set-adjacent nodes and
// the outer box faces, so exact-solution traces (HalfPlaneStep, CircleTrace)
// make the truncation to a finite box error-free up to discretization.
struct BoundaryData {
  enum class Kind {
    Constant,      // value everywhere
    BallIndicator, // value inside B(center, radius), 0 outside
    SmoothBump,    // value * (1 - (|p-center|/radius)^2)^2, C^1 cutoff
    Coordinate,    // value * p[axis]
    HalfPlaneStep, // harmonic extension of the step at x = center.x across a
                   // horizontal line: 1/2 + atan((x - center.x)/|y|)/pi
    CircleTrace,   // closed-form extension of (x - cx)/R for circle sets
  };

  Kind kind = Kind::Constant;
  double value = 1;
  Vec center{};
  double radius = 1;
  int axis = 1;

  double eval(const Vec& p, const BoundarySet& e) const;
};

struct SolveOptions {
  double tol = 1e-10;  // relative residual target
  int max_iter = 0;    // 0: derived from the grid size
  bool cascadic = true;
};

// Nodal solution of the 5-point (7-point in 3-D) Laplace problem on a uniform
// grid over box. Nodes within h of the boundary set and nodes on the outer box
// faces are pinned to the data trace; the rest solve the stencil equations.
struct HarmonicField {
  BoundarySet boundary;  // copied in: the field answers its own delta queries
  Box box;
  int dim = 2;
  double h = 0;
  int nx = 0, ny = 0, nz = 1;  // node counts per axis (nz = 1 in 2-D)

  std::vector<double> u;        // node-major: index (k*ny + j)*nx + i
  std::vector<uint8_t> pinned;  // 1 where Dirichlet data was imposed

  double sup_norm = 0;            // max |u| over all nodes
  double data_lo = 0, data_hi = 0;  // range of the pinned values
  double residual = 0;            // final relative residual
  int iterations = 0;             // CG iterations on the finest level
  std::vector<double> residual_history;

  int64_t node_count() const { return (int64_t)nx * ny * nz; }
  int64_t index(int i, int j, int k = 0) const {
    return ((int64_t)k * ny + j) * nx + i;
  }
  Vec node(int i, int j, int k = 0) const {
    return {box.lo.x + i * h, box.lo.y + j * h,
            dim == 3 ? box.lo.z + k * h : 0.0};
  }

  double delta(const Vec& p) const { return boundary.distance(p); }
  bool in_node_hull(const Vec& p) const { return box.contains_closed(p); }

  // Multilinear interpolation; p must lie in the closed box.
  double value_at(const Vec& p) const;
  // Central differences of value_at, no validity checks; the stencil needs
  // p +- h e_a inside the closed box.
  Vec gradient_at(const Vec& p) const;

  // Dense tabular text: one row of values per grid line, blocks per z layer,
  // followed by the pinned mask in the same layout.
  void dump(std::ostream& os) const;
};

// Requires: box sides positive integer multiples of h, at least 8 cells per
// axis, h at most a quarter of the set's finest feature, |data| <= 1 on every
// pinned node. Throws std::runtime_error with the residual tail if CG stalls;
// checks the discrete maximum principle on the result.
HarmonicField solve_harmonic(const BoundarySet& e, const Box& box,
                             const BoundaryData& data, double h,
                             const SolveOptions& opt = {});

// Checked central differences: X and its stencil inside the grid, delta(X) at
// least 2h.
Vec gradient(const HarmonicField& f, const Vec& X);

struct CarlesonSample {
  Vec center{};
  double radius = 0;
  double value = 0;           // r^{-n} sum |grad u|^2 delta over the ball
  double error_estimate = 0;  // |value - same quadrature at half the cell size|
  double excluded_volume = 0; // cells dropped by the delta >= 2h rule
};

// Midpoint quadrature of |grad u|^2 delta(Y) over B(x,r) intersected with the
// grid box, normalized by r^n (n = surface dimension). Cells with centers
// closer than 2h to the set are excluded and reported. Requires x on the set,
// r >= 8h, and every counted cell's stencil inside the grid.
CarlesonSample carleson_functional(const HarmonicField& f, const Vec& x, double r);

// sigma(Q)^{-1} * sum |grad u|^2 delta over the cells whose centers lie in the
// region union (same 2h exclusion). Requires every counted cell's stencil
// inside the grid.
double dyadic_carleson_functional(const HarmonicField& f, const SurfaceCube& q,
                                  const RegionUnion& tq);

struct ConeMax {
  double value = 0;
  int64_t nodes = 0;  // grid nodes inside the cone
  bool empty = true;
};

// max |u| over grid nodes Y in omega with |Y - x| <= (1+kappa) dist(Y, bdry
// omega). Empty cones report value 0 with the flag set.
ConeMax nontangential_max(const HarmonicField& f, const RegionUnion& omega,
                          const Vec& x, double kappa);

// (integral_I |grad u|^2) * l(I)^2 / integral_{2I} u^2, midpoint quadrature
// over grid cells. Requires 2I inside the grid and clear of the set by 2h.
double caccioppoli_ratio(const HarmonicField& f, const Box& inner);

}  // namespace cme
