#include "cme/grid.hpp"

#include <ostream>

namespace cme {

SurfaceGrid::SurfaceGrid(BoundarySet e, int k_min, int k_max)
    : e_(std::move(e)), k_min_(k_min), k_max_(k_max) {
  if (k_min > k_max) throw std::invalid_argument("k_min > k_max");
  const auto& pts = e_.samples();
  const auto& wts = e_.weights();
  if (pts.empty()) throw std::runtime_error("boundary set has no samples");
  if (e_.bounded() && ipow2(-k_min) > 4 * e_.diameter() && k_min < 0)
    throw std::invalid_argument("k_min far coarser than diam(E)");

  int dim = e_.dim();
  int64_t n = (int64_t)pts.size();
  levels_.resize(k_max_ - k_min_ + 1);

  for (int k = k_max_; k >= k_min_; --k) {
    Level& lv = levels_[k - k_min_];
    lv.order.resize(n);
    for (int64_t i = 0; i < n; ++i) lv.order[i] = (int32_t)i;
    std::vector<CubeId> key(n);
    for (int64_t i = 0; i < n; ++i) key[i] = cube_containing(pts[i], k);
    std::sort(lv.order.begin(), lv.order.end(), [&](int32_t a, int32_t b) {
      if (!(key[a] == key[b])) return key[a] < key[b];
      return a < b;
    });

    for (int64_t i = 0; i < n;) {
      int64_t j = i;
      CubeId id = key[lv.order[i]];
      while (j < n && key[lv.order[j]] == id) ++j;
      SurfaceCube q;
      q.id = id;
      q.begin = (int32_t)i;
      q.end = (int32_t)j;
      Box b = id.box(dim);
      Vec bc = b.center();
      double best = std::numeric_limits<double>::infinity();
      Vec blo = pts[lv.order[i]], bhi = blo;
      for (int64_t t = i; t < j; ++t) {
        const Vec& p = pts[lv.order[t]];
        double d2 = (p - bc).norm2();
        if (d2 < best) {
          best = d2;
          q.center = p;
        }
        for (int a = 0; a < dim; ++a) {
          blo[a] = std::min(blo[a], p[a]);
          bhi[a] = std::max(bhi[a], p[a]);
        }
      }
      q.bbox_diam = (bhi - blo).norm();
      for (int64_t t = i; t < j; ++t)
        q.r_outer = std::max(q.r_outer, (pts[lv.order[t]] - q.center).norm());
      if (k == k_max_) {
        for (int64_t t = i; t < j; ++t) q.mass += wts[lv.order[t]];
      }
      lv.cubes.push_back(q);
      i = j;
    }

    if (k < k_max_) {
      // bitwise mass additivity: parent mass is the ordered child sum
      for (auto& q : lv.cubes) {
        for (auto& cid : q.id.children(dim)) {
          const SurfaceCube* c = find(cid);
          if (c) q.mass += c->mass;
        }
      }
    }
  }

  // measured inner surface-ball radius, by expanding-ring scan at each level
  for (int k = k_min_; k <= k_max_; ++k) {
    Level& lv = levels_[k - k_min_];
    if (lv.cubes.size() == 1) {
      lv.cubes[0].r_inner = std::numeric_limits<double>::infinity();
      continue;
    }
    double l = ipow2(-k);
    int64_t lo_x = INT64_MAX, hi_x = INT64_MIN, lo_y = lo_x, hi_y = hi_x,
            lo_z = lo_x, hi_z = hi_x;
    for (auto& q : lv.cubes) {
      lo_x = std::min(lo_x, q.id.ix);
      hi_x = std::max(hi_x, q.id.ix);
      lo_y = std::min(lo_y, q.id.iy);
      hi_y = std::max(hi_y, q.id.iy);
      lo_z = std::min(lo_z, q.id.iz);
      hi_z = std::max(hi_z, q.id.iz);
    }
    int64_t max_ring = std::max({hi_x - lo_x, hi_y - lo_y, hi_z - lo_z}) + 1;
    for (auto& q : lv.cubes) {
      double best = std::numeric_limits<double>::infinity();
      for (int64_t ring = 1; ring <= max_ring; ++ring) {
        if ((double)(ring - 1) * l >= best) break;
        int64_t zr = dim == 3 ? ring : 0;
        for (int64_t dz = -zr; dz <= zr; ++dz)
          for (int64_t dy = -ring; dy <= ring; ++dy)
            for (int64_t dx = -ring; dx <= ring; ++dx) {
              if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring)
                continue;
              const SurfaceCube* nb =
                  find({q.id.k, q.id.ix + dx, q.id.iy + dy, q.id.iz + dz});
              if (!nb) continue;
              for (const int32_t* s = samples_begin(*nb); s != samples_end(*nb); ++s)
                best = std::min(best, (pts[*s] - q.center).norm());
            }
      }
      q.r_inner = best;
    }
  }
}

const SurfaceGrid::Level& SurfaceGrid::level(int k) const {
  if (k < k_min_ || k > k_max_) throw std::out_of_range("generation out of range");
  return levels_[k - k_min_];
}

const std::vector<SurfaceCube>& SurfaceGrid::generation(int k) const {
  return level(k).cubes;
}

const SurfaceCube* SurfaceGrid::find(const CubeId& id) const {
  if (id.k < k_min_ || id.k > k_max_) return nullptr;
  const auto& cubes = levels_[id.k - k_min_].cubes;
  auto it = std::lower_bound(cubes.begin(), cubes.end(), id,
                             [](const SurfaceCube& q, const CubeId& v) { return q.id < v; });
  if (it != cubes.end() && it->id == id) return &*it;
  return nullptr;
}

const SurfaceCube& SurfaceGrid::cube(const CubeId& id) const {
  const SurfaceCube* q = find(id);
  if (!q) throw std::out_of_range("no such surface cube");
  return *q;
}

std::vector<CubeId> SurfaceGrid::children_of(const CubeId& id) const {
  std::vector<CubeId> out;
  if (id.k >= k_max_) return out;
  for (auto& c : id.children(e_.dim()))
    if (has(c)) out.push_back(c);
  return out;
}

size_t SurfaceGrid::cube_count() const {
  size_t n = 0;
  for (auto& lv : levels_) n += lv.cubes.size();
  return n;
}

const int32_t* SurfaceGrid::samples_begin(const SurfaceCube& q) const {
  return levels_[q.id.k - k_min_].order.data() + q.begin;
}

const int32_t* SurfaceGrid::samples_end(const SurfaceCube& q) const {
  return levels_[q.id.k - k_min_].order.data() + q.end;
}

double SurfaceGrid::dist_to_cube(const Box& b, const SurfaceCube& q) const {
  const auto& pts = e_.samples();
  double best = std::numeric_limits<double>::infinity();
  for (const int32_t* s = samples_begin(q); s != samples_end(q); ++s)
    best = std::min(best, b.dist(pts[*s]));
  return best;
}

double SurfaceGrid::dist_to_cube(const Vec& p, const SurfaceCube& q) const {
  const auto& pts = e_.samples();
  double best = std::numeric_limits<double>::infinity();
  for (const int32_t* s = samples_begin(q); s != samples_end(q); ++s)
    best = std::min(best, (pts[*s] - p).norm());
  return best;
}

void SurfaceGrid::dump(std::ostream& os) const {
  os << "k\tix\tiy\tiz\tcx\tcy\tcz\tlen\tmass\n";
  for (int k = k_min_; k <= k_max_; ++k)
    for (auto& q : generation(k)) {
      os << q.id.k << '\t' << q.id.ix << '\t' << q.id.iy << '\t' << q.id.iz << '\t'
         << format_double(q.center.x) << '\t' << format_double(q.center.y) << '\t'
         << format_double(q.center.z) << '\t' << format_double(q.len()) << '\t'
         << format_double(q.mass) << '\n';
    }
}

double surface_ball_mass(const BoundarySet& e, const Vec& x, double r) {
  if (e.distance(x) > 2 * e.sample_spacing())
    throw std::domain_error("surface ball center not on the boundary set");
  return e.ball_mass_sampled(x, r);
}

}  // namespace cme
