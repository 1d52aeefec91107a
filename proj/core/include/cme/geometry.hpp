#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace cme {

// Ambient points live in R^2 or R^3; z stays 0 in the planar case so the same
// code paths serve both.
struct Vec {
  double x = 0, y = 0, z = 0;

  Vec operator+(const Vec& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec operator-(const Vec& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm2() const { return dot(*this); }
  double norm() const { return std::sqrt(norm2()); }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  bool operator==(const Vec& o) const { return x == o.x && y == o.y && z == o.z; }
};

inline Vec normalized(const Vec& v) {
  double n = v.norm();
  return n > 0 ? v * (1.0 / n) : v;
}

// Axis-aligned box, half-open in spirit: membership tests use [lo, hi).
// dim is the ambient dimension (2 or 3); in 2-D the z extent is ignored.
struct Box {
  Vec lo, hi;
  int dim = 2;

  double side(int axis) const { return hi[axis] - lo[axis]; }
  double max_side() const {
    double s = 0;
    for (int a = 0; a < dim; ++a) s = std::max(s, side(a));
    return s;
  }
  double diam() const {
    double s = 0;
    for (int a = 0; a < dim; ++a) s += side(a) * side(a);
    return std::sqrt(s);
  }
  double volume() const {
    double v = 1;
    for (int a = 0; a < dim; ++a) v *= side(a);
    return v;
  }
  Vec center() const { return (lo + hi) * 0.5; }

  bool contains(const Vec& p) const {
    for (int a = 0; a < dim; ++a)
      if (p[a] < lo[a] || p[a] >= hi[a]) return false;
    return true;
  }
  bool contains_closed(const Vec& p) const {
    for (int a = 0; a < dim; ++a)
      if (p[a] < lo[a] || p[a] > hi[a]) return false;
    return true;
  }

  // Euclidean distance from the closed box to a point (0 inside).
  double dist(const Vec& p) const {
    double d2 = 0;
    for (int a = 0; a < dim; ++a) {
      double t = std::max({lo[a] - p[a], 0.0, p[a] - hi[a]});
      d2 += t * t;
    }
    return std::sqrt(d2);
  }

  // Distance between two closed boxes (0 if they touch or overlap).
  double dist(const Box& o) const {
    double d2 = 0;
    for (int a = 0; a < dim; ++a) {
      double t = std::max({lo[a] - o.hi[a], 0.0, o.lo[a] - hi[a]});
      d2 += t * t;
    }
    return std::sqrt(d2);
  }

  bool intersects_closed(const Box& o) const {
    for (int a = 0; a < dim; ++a)
      if (hi[a] < o.lo[a] || o.hi[a] < lo[a]) return false;
    return true;
  }
  // Open-interior overlap: positive-volume intersection.
  bool overlaps_open(const Box& o) const {
    for (int a = 0; a < dim; ++a)
      if (hi[a] <= o.lo[a] || o.hi[a] <= lo[a]) return false;
    return true;
  }

  // Concentric dilation: lam*I keeps the center, scales each side by lam.
  Box scaled(double lam) const {
    Vec c = center();
    Box b = *this;
    for (int a = 0; a < dim; ++a) {
      double h = side(a) * 0.5 * lam;
      b.lo[a] = c[a] - h;
      b.hi[a] = c[a] + h;
    }
    return b;
  }

  Box intersection(const Box& o) const {
    Box b = *this;
    for (int a = 0; a < dim; ++a) {
      b.lo[a] = std::max(lo[a], o.lo[a]);
      b.hi[a] = std::min(hi[a], o.hi[a]);
      if (b.hi[a] < b.lo[a]) b.hi[a] = b.lo[a];
    }
    return b;
  }
};

inline double ipow2(int k) { return std::ldexp(1.0, k); }

inline int64_t floor_div2(int64_t i) { return i >> 1; }

// Identifies the dyadic cube [ix*2^-k,(ix+1)*2^-k) x [iy*2^-k,...) (x [iz...]).
// Negative lattice indices are fine. Ordering is (k, ix, iy, iz) lexicographic,
// which every deterministic tie-break in the library leans on.
struct CubeId {
  int32_t k = 0;
  int64_t ix = 0, iy = 0, iz = 0;

  bool operator==(const CubeId& o) const {
    return k == o.k && ix == o.ix && iy == o.iy && iz == o.iz;
  }
  bool operator<(const CubeId& o) const {
    if (k != o.k) return k < o.k;
    if (ix != o.ix) return ix < o.ix;
    if (iy != o.iy) return iy < o.iy;
    return iz < o.iz;
  }

  double len() const { return ipow2(-k); }

  CubeId parent() const {
    return {k - 1, floor_div2(ix), floor_div2(iy), floor_div2(iz)};
  }
  bool is_ancestor_of(const CubeId& o) const {
    if (k > o.k) return false;
    int s = o.k - k;
    return (o.ix >> s) == ix && (o.iy >> s) == iy && (o.iz >> s) == iz;
  }

  Box box(int dim) const {
    double h = len();
    Box b;
    b.dim = dim;
    b.lo = {ix * h, iy * h, dim == 3 ? iz * h : 0.0};
    b.hi = {(ix + 1) * h, (iy + 1) * h, dim == 3 ? (iz + 1) * h : 0.0};
    if (dim == 2) b.hi.z = 0.0;
    return b;
  }

  std::vector<CubeId> children(int dim) const {
    std::vector<CubeId> out;
    int nz = dim == 3 ? 2 : 1;
    for (int dz = 0; dz < nz; ++dz)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx)
          out.push_back({k + 1, 2 * ix + dx, 2 * iy + dy, 2 * iz + dz});
    return out;
  }
};

struct CubeIdHash {
  size_t operator()(const CubeId& c) const {
    uint64_t h = 0x9e3779b97f4a7c15ull ^ (uint64_t)(uint32_t)c.k;
    auto mix = [&h](uint64_t v) {
      h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    };
    mix((uint64_t)c.ix);
    mix((uint64_t)c.iy);
    mix((uint64_t)c.iz);
    return (size_t)h;
  }
};

inline CubeId cube_containing(const Vec& p, int k) {
  double s = ipow2(k);
  return {k, (int64_t)std::floor(p.x * s), (int64_t)std::floor(p.y * s),
          (int64_t)std::floor(p.z * s)};
}

// splitmix64: tiny, seedable, reproducible across platforms.
struct Rng {
  uint64_t state;
  explicit Rng(uint64_t seed = 0x853c49e6748fea9bull) : state(seed) {}

  uint64_t next() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform() { return (next() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  int64_t uniform_int(int64_t n) { return (int64_t)(next() % (uint64_t)n); }
};

int thread_count();

// Deterministic parallel map over [0,n) in fixed chunks. Chunk boundaries do
// not depend on the thread count, so per-chunk partial results can be combined
// in chunk order for bit-stable reductions.
void parallel_chunks(int64_t n, int64_t chunk,
                     const std::function<void(int64_t, int64_t, int)>& fn);

double parallel_sum(int64_t n, const std::function<double(int64_t)>& term);

// Eigen-decomposition of a symmetric 2x2 [[a,b],[b,c]]: returns {lmin, lmax}
// and writes the unit eigenvector of lmin (deterministic sign: first nonzero
// component positive).
std::array<double, 2> sym2_eigen(double a, double b, double c, Vec* vmin);

// Same for symmetric 3x3 (given upper triangle), eigenvector of the smallest
// eigenvalue via two sweeps of the cyclic Jacobi method (deterministic).
std::array<double, 3> sym3_eigen(const std::array<double, 6>& uppertri, Vec* vmin);

std::string format_double(double v);

}  // namespace cme
