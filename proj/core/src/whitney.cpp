#include "cme/whitney.hpp"

#include <ostream>

namespace cme {

namespace {

// smallest k with every box corner an integer multiple of 2^-k; cells of the
// returned level tile the box, so scanning starts where they still fit inside
int alignment_level(const Box& b, int dim, int k_cap) {
  double min_side = b.side(0);
  for (int a = 1; a < dim; ++a) min_side = std::min(min_side, b.side(a));
  if (!(min_side > 0)) throw std::invalid_argument("working box is degenerate");
  int k0 = (int)std::ceil(-std::log2(min_side) - 1e-9);
  for (int k = k0; k <= k_cap; ++k) {
    double s = ipow2(k);
    bool ok = true;
    for (int a = 0; a < dim && ok; ++a)
      for (double c : {b.lo[a], b.hi[a]}) {
        double v = c * s;
        if (std::abs(v - std::round(v)) > 1e-9 * std::max(1.0, std::abs(v))) ok = false;
      }
    if (ok) return k;
  }
  throw std::invalid_argument("working box is not dyadically aligned");
}

}  // namespace

WhitneyDecomposition::WhitneyDecomposition(const BoundarySet& e, const Box& working_box,
                                           int k_deepest, double tau0)
    : e_(e), box_(working_box), k_deepest_(k_deepest), tau0_(tau0) {
  int dim = e_.dim();
  if (e_.box_distance(box_) > 0)
    throw std::invalid_argument("working box does not meet the boundary set");
  k_top_ = alignment_level(box_, dim, k_deepest);
  if (k_top_ > k_deepest) throw std::invalid_argument("depth budget above root level");

  double s = ipow2(k_top_);
  std::vector<CubeId> stack;
  int64_t zlo = 0, zhi = 1;
  if (dim == 3) {
    zlo = (int64_t)std::llround(box_.lo.z * s);
    zhi = (int64_t)std::llround(box_.hi.z * s);
  }
  for (int64_t iz = zlo; iz < (dim == 3 ? zhi : zlo + 1); ++iz)
    for (int64_t iy = (int64_t)std::llround(box_.lo.y * s);
         iy < (int64_t)std::llround(box_.hi.y * s); ++iy)
      for (int64_t ix = (int64_t)std::llround(box_.lo.x * s);
           ix < (int64_t)std::llround(box_.hi.x * s); ++ix)
        stack.push_back({k_top_, ix, iy, dim == 3 ? iz : 0});
  if (stack.empty()) throw std::invalid_argument("working box has no root cubes");

  while (!stack.empty()) {
    CubeId id = stack.back();
    stack.pop_back();
    Box b = id.box(dim);
    double d4 = e_.box_distance(b.scaled(4.0));
    if (4 * b.diam() <= d4) {
      WhitneyCube c;
      c.id = id;
      c.dist_e = e_.box_distance(b);
      cubes_.push_back(c);
      covered_volume_ += b.volume();
      continue;
    }
    if (id.k == k_deepest_) {
      uncovered_volume_ += b.volume();
      guard_width_ = std::max(guard_width_, e_.box_distance(b) + b.diam());
      continue;
    }
    for (auto& ch : id.children(dim)) stack.push_back(ch);
  }
  std::sort(cubes_.begin(), cubes_.end(),
            [](const WhitneyCube& a, const WhitneyCube& b) { return a.id < b.id; });

  // touching neighbors: scan candidate lattice ranges two levels around
  for (size_t i = 0; i < cubes_.size(); ++i) {
    WhitneyCube& c = cubes_[i];
    c.nb_begin = (int32_t)nbs_.size();
    Box b = box(c);
    for (int k = std::max(k_top_, c.id.k - 2); k <= std::min(k_deepest_, c.id.k + 2); ++k) {
      double inv = ipow2(k);
      int64_t xlo = (int64_t)std::floor(b.lo.x * inv) - 1,
              xhi = (int64_t)std::floor(b.hi.x * inv) + 1;
      int64_t ylo = (int64_t)std::floor(b.lo.y * inv) - 1,
              yhi = (int64_t)std::floor(b.hi.y * inv) + 1;
      int64_t zlo2 = 0, zhi2 = 0;
      if (dim == 3) {
        zlo2 = (int64_t)std::floor(b.lo.z * inv) - 1;
        zhi2 = (int64_t)std::floor(b.hi.z * inv) + 1;
      }
      for (int64_t iz = zlo2; iz <= zhi2; ++iz)
        for (int64_t iy = ylo; iy <= yhi; ++iy)
          for (int64_t ix = xlo; ix <= xhi; ++ix) {
            CubeId cand{k, ix, iy, iz};
            if (cand == c.id) continue;
            int32_t j = index_of(cand);
            if (j < 0) continue;
            if (b.intersects_closed(box(cubes_[j]))) nbs_.push_back(j);
          }
    }
    std::sort(nbs_.begin() + c.nb_begin, nbs_.end());
    nbs_.erase(std::unique(nbs_.begin() + c.nb_begin, nbs_.end()), nbs_.end());
    c.nb_end = (int32_t)nbs_.size();
  }
}

Box WhitneyDecomposition::fattened(int32_t i, double tau) const {
  return fatten_box(box(cubes_[i]), tau, tau0_);
}

Box fatten_box(const Box& b, double tau, double tau0) {
  if (!(tau > 0) || tau > tau0) throw std::invalid_argument("tau outside (0, tau0]");
  return b.scaled(1 + tau);
}

int32_t WhitneyDecomposition::index_of(const CubeId& id) const {
  auto it = std::lower_bound(cubes_.begin(), cubes_.end(), id,
                             [](const WhitneyCube& c, const CubeId& v) { return c.id < v; });
  if (it != cubes_.end() && it->id == id) return (int32_t)(it - cubes_.begin());
  return -1;
}

int32_t WhitneyDecomposition::find(const Vec& p) const {
  if (!box_.contains(p)) return -1;
  for (int k = k_top_; k <= k_deepest_; ++k) {
    int32_t i = index_of(cube_containing(p, k));
    if (i >= 0) return i;
  }
  return -1;
}

WhitneyDecomposition::Check WhitneyDecomposition::check_properties() const {
  Check ck;
  for (size_t i = 0; i < cubes_.size(); ++i) {
    const WhitneyCube& c = cubes_[i];
    Box b = box(c);
    double diam = b.diam();
    if (!(4 * diam <= e_.box_distance(b.scaled(4.0)))) ++ck.lower_violations;
    if (!(c.dist_e <= 40 * diam)) ++ck.upper_violations;
    for (const int32_t* n = neighbors_begin(c); n != neighbors_end(c); ++n) {
      const WhitneyCube& o = cubes_[*n];
      double ratio = ipow2(o.id.k - c.id.k);  // l(I)/l(J)
      ck.max_touch_ratio = std::max(ck.max_touch_ratio, std::max(ratio, 1 / ratio));
      if (ratio < 0.25 - 1e-12 || ratio > 4 + 1e-12) ++ck.ratio_violations;
      if (b.scaled(1 + tau0_).overlaps_open(box(o).scaled(0.75))) ++ck.fatten_violations;
    }
  }
  return ck;
}

void WhitneyDecomposition::dump(std::ostream& os) const {
  os << "k\tix\tiy\tiz\tlen\tdist_e\n";
  for (auto& c : cubes_)
    os << c.id.k << '\t' << c.id.ix << '\t' << c.id.iy << '\t' << c.id.iz << '\t'
       << format_double(c.id.len()) << '\t' << format_double(c.dist_e) << '\n';
}

std::vector<int32_t> w0_of_cube(const SurfaceGrid& g, const CubeId& q,
                                const WhitneyDecomposition& w, double eta, double K) {
  const SurfaceCube& qc = g.cube(q);
  double lq = q.len();
  double lmin = std::pow(eta, 0.25) * lq, lmax = std::sqrt(K) * lq;
  double dmax = std::sqrt(K) * lq;
  int k_lo = (int)std::ceil(-std::log2(lmax) - 1e-9);
  int k_hi = (int)std::floor(-std::log2(lmin) + 1e-9);
  std::vector<int32_t> out;
  const auto& cubes = w.cubes();
  auto level_begin = [&](int k) {
    CubeId key{k, INT64_MIN, INT64_MIN, INT64_MIN};
    return std::lower_bound(cubes.begin(), cubes.end(), key,
                            [](const WhitneyCube& c, const CubeId& v) { return c.id < v; });
  };
  for (int k = k_lo; k <= k_hi; ++k) {
    for (auto it = level_begin(k), end = level_begin(k + 1); it != end; ++it) {
      int32_t i = (int32_t)(it - cubes.begin());
      Box b = w.box(*it);
      // cheap reject: box-to-ball bound before the exact sample distance
      if (b.dist(qc.center) > dmax + qc.r_outer + 1e-12) continue;
      if (g.dist_to_cube(b, qc) <= dmax * (1 + 1e-12)) out.push_back(i);
    }
  }
  return out;
}

Corkscrew corkscrew_point(const SurfaceGrid& g, const CubeId& q,
                          const WhitneyDecomposition& w) {
  const SurfaceCube& qc = g.cube(q);
  double r = q.len();
  Corkscrew best;
  const auto& cubes = w.cubes();
  for (int32_t i = 0; i < (int32_t)cubes.size(); ++i) {
    Box b = w.box(cubes[i]);
    if (b.dist(qc.center) > 0.5 * r) continue;  // cube misses (1/2)B_Q
    Vec x = b.center();
    if ((x - qc.center).norm() > 0.5 * r) continue;
    double d = w.boundary().distance(x);
    if (d > best.eps0 * r) {
      best.point = x;
      best.eps0 = d / r;
      best.cube = i;
    }
  }
  if (best.cube < 0) throw std::runtime_error("no corkscrew candidate: decomposition too coarse");
  return best;
}

}  // namespace cme
