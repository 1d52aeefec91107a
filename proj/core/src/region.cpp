#include "cme/region.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace cme {

namespace {

bool strict_inside(const Box& b, const Vec& p) {
  for (int a = 0; a < b.dim; ++a)
    if (p[a] <= b.lo[a] || p[a] >= b.hi[a]) return false;
  return true;
}

struct Dsu {
  std::vector<int32_t> p;
  explicit Dsu(size_t n) : p(n) {
    for (size_t i = 0; i < n; ++i) p[i] = (int32_t)i;
  }
  int32_t find(int32_t i) {
    while (p[i] != i) i = p[i] = p[p[i]];
    return i;
  }
  void join(int32_t a, int32_t b) { p[find(a)] = find(b); }
};

std::string cube_name(const CubeId& q) {
  std::ostringstream os;
  os << "(" << q.k << "," << q.ix << "," << q.iy << "," << q.iz << ")";
  return os.str();
}

// 1-D union length of [lo,hi] intervals
double interval_union(std::vector<std::pair<double, double>>& iv) {
  std::sort(iv.begin(), iv.end());
  double len = 0, cur_lo = 0, cur_hi = 0;
  bool open = false;
  for (auto& [lo, hi] : iv) {
    if (hi <= lo) continue;
    if (!open || lo > cur_hi) {
      if (open) len += cur_hi - cur_lo;
      cur_lo = lo;
      cur_hi = hi;
      open = true;
    } else {
      cur_hi = std::max(cur_hi, hi);
    }
  }
  if (open) len += cur_hi - cur_lo;
  return len;
}

// union area of rectangles over the (ax0, ax1) coordinate pair
double rect_union_area(const std::vector<const Box*>& bs, int ax0, int ax1) {
  std::vector<double> xs;
  xs.reserve(bs.size() * 2);
  for (auto* b : bs) {
    xs.push_back(b->lo[ax0]);
    xs.push_back(b->hi[ax0]);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  double area = 0;
  std::vector<std::pair<double, double>> iv;
  for (size_t i = 0; i + 1 < xs.size(); ++i) {
    double w = xs[i + 1] - xs[i], mid = 0.5 * (xs[i] + xs[i + 1]);
    if (w <= 0) continue;
    iv.clear();
    for (auto* b : bs)
      if (b->lo[ax0] < mid && mid < b->hi[ax0]) iv.push_back({b->lo[ax1], b->hi[ax1]});
    if (!iv.empty()) area += w * interval_union(iv);
  }
  return area;
}

}  // namespace

Box RegionUnion::bounding_box() const {
  if (boxes.empty()) throw std::logic_error("empty region has no bounding box");
  Box out = boxes[0];
  for (const Box& b : boxes)
    for (int a = 0; a < dim; ++a) {
      out.lo[a] = std::min(out.lo[a], b.lo[a]);
      out.hi[a] = std::max(out.hi[a], b.hi[a]);
    }
  return out;
}

double RegionUnion::diam() const { return bounding_box().diam(); }

bool RegionUnion::contains(const Vec& p) const {
  for (const Box& b : boxes)
    if (strict_inside(b, p)) return true;
  return false;
}

double RegionUnion::dist_to_closure(const Vec& p) const {
  double d = 1e300;
  for (const Box& b : boxes) d = std::min(d, b.dist(p));
  return boxes.empty() ? 0.0 : d;
}

double RegionUnion::volume() const {
  if (boxes.empty()) return 0;
  std::vector<double> xs;
  xs.reserve(boxes.size() * 2);
  for (const Box& b : boxes) {
    xs.push_back(b.lo.x);
    xs.push_back(b.hi.x);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  double vol = 0;
  std::vector<const Box*> slab;
  for (size_t i = 0; i + 1 < xs.size(); ++i) {
    double w = xs[i + 1] - xs[i], mid = 0.5 * (xs[i] + xs[i + 1]);
    if (w <= 0) continue;
    slab.clear();
    for (const Box& b : boxes)
      if (b.lo.x < mid && mid < b.hi.x) slab.push_back(&b);
    if (slab.empty()) continue;
    if (dim == 2) {
      std::vector<std::pair<double, double>> iv;
      for (auto* b : slab) iv.push_back({b->lo.y, b->hi.y});
      vol += w * interval_union(iv);
    } else {
      vol += w * rect_union_area(slab, 1, 2);
    }
  }
  return vol;
}

int RegionUnion::component_count() const {
  size_t n = boxes.size();
  if (n == 0) return 0;
  Dsu dsu(n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      if (boxes[i].intersects_closed(boxes[j])) dsu.join((int32_t)i, (int32_t)j);
  std::set<int32_t> roots;
  for (size_t i = 0; i < n; ++i) roots.insert(dsu.find((int32_t)i));
  return (int)roots.size();
}

void RegionUnion::dump(std::ostream& os) const {
  static const char* names[] = {"whitney", "carleson", "sawtooth", "domain"};
  os << "region " << names[(int)role] << " tau " << format_double(tau) << " cubes "
     << cubes.size() << "\n";
  for (size_t i = 0; i < cubes.size(); ++i) {
    const Box& b = boxes[i];
    os << cubes[i];
    for (int a = 0; a < dim; ++a)
      os << " " << format_double(b.lo[a]) << " " << format_double(b.hi[a]);
    os << "\n";
  }
}

std::vector<Face> region_boundary_faces(const RegionUnion& r) {
  const auto& bs = r.boxes;
  size_t n = bs.size();
  int dim = r.dim;
  // only a touching box can cover part of a face
  std::vector<std::vector<int32_t>> contact(n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      if (bs[i].intersects_closed(bs[j])) {
        contact[i].push_back((int32_t)j);
        contact[j].push_back((int32_t)i);
      }

  std::vector<Face> out;
  std::vector<const Box*> clips;
  for (size_t i = 0; i < n; ++i) {
    for (int a = 0; a < dim; ++a) {
      for (int hi_side = 0; hi_side < 2; ++hi_side) {
        double c = hi_side ? bs[i].hi[a] : bs[i].lo[a];
        clips.clear();
        for (int32_t j : contact[i]) {
          const Box& b = bs[(size_t)j];
          bool spans = b.lo[a] < c && c < b.hi[a];
          // a box ending exactly at the plane seals the far side
          bool opposite = hi_side ? b.lo[a] == c : b.hi[a] == c;
          if (spans || opposite) clips.push_back(&b);
        }
        auto emit = [&](int o1, double l1, double h1, int o2, double l2, double h2) {
          Face f;
          f.axis = a;
          f.orient = hi_side ? +1 : -1;
          f.rect = bs[i];
          f.rect.lo[a] = f.rect.hi[a] = c;
          f.rect.lo[o1] = l1;
          f.rect.hi[o1] = h1;
          if (o2 >= 0) {
            f.rect.lo[o2] = l2;
            f.rect.hi[o2] = h2;
          }
          out.push_back(f);
        };
        if (dim == 2) {
          int o = 1 - a;
          std::vector<std::pair<double, double>> iv;
          for (auto* b : clips) {
            double lo = std::max(b->lo[o], bs[i].lo[o]), hi = std::min(b->hi[o], bs[i].hi[o]);
            if (hi > lo) iv.push_back({lo, hi});
          }
          std::sort(iv.begin(), iv.end());
          double cur = bs[i].lo[o];
          for (auto& [lo, hi] : iv) {
            if (hi <= cur) continue;
            if (lo > cur) emit(o, cur, lo, -1, 0, 0);
            cur = hi;
            if (cur >= bs[i].hi[o]) break;
          }
          if (cur < bs[i].hi[o]) emit(o, cur, bs[i].hi[o], -1, 0, 0);
        } else {
          int o1 = a == 0 ? 1 : 0, o2 = a == 2 ? 1 : 2;
          std::vector<double> us = {bs[i].lo[o1], bs[i].hi[o1]};
          std::vector<double> vs = {bs[i].lo[o2], bs[i].hi[o2]};
          for (auto* b : clips) {
            us.push_back(std::clamp(b->lo[o1], bs[i].lo[o1], bs[i].hi[o1]));
            us.push_back(std::clamp(b->hi[o1], bs[i].lo[o1], bs[i].hi[o1]));
            vs.push_back(std::clamp(b->lo[o2], bs[i].lo[o2], bs[i].hi[o2]));
            vs.push_back(std::clamp(b->hi[o2], bs[i].lo[o2], bs[i].hi[o2]));
          }
          std::sort(us.begin(), us.end());
          us.erase(std::unique(us.begin(), us.end()), us.end());
          std::sort(vs.begin(), vs.end());
          vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
          for (size_t ui = 0; ui + 1 < us.size(); ++ui)
            for (size_t vi = 0; vi + 1 < vs.size(); ++vi) {
              if (us[ui + 1] - us[ui] <= 0 || vs[vi + 1] - vs[vi] <= 0) continue;
              double mu = 0.5 * (us[ui] + us[ui + 1]), mv = 0.5 * (vs[vi] + vs[vi + 1]);
              bool covered = false;
              for (auto* b : clips)
                if (b->lo[o1] < mu && mu < b->hi[o1] && b->lo[o2] < mv && mv < b->hi[o2]) {
                  covered = true;
                  break;
                }
              if (!covered) emit(o1, us[ui], us[ui + 1], o2, vs[vi], vs[vi + 1]);
            }
        }
      }
    }
  }
  return out;
}

double faces_measure(const std::vector<Face>& faces, int dim) {
  double m = 0;
  for (const Face& f : faces) {
    double piece = 1;
    for (int a = 0; a < dim; ++a)
      if (a != f.axis) piece *= f.rect.side(a);
    m += piece;
  }
  return m;
}

double faces_measure_in_ball(const std::vector<Face>& faces, int dim, const Vec& c, double r) {
  double m = 0;
  for (const Face& f : faces) {
    double dplane = std::abs(c[f.axis] - f.rect.lo[f.axis]);
    if (dplane >= r) continue;
    if (dim == 2) {
      int o = 1 - f.axis;
      Vec p1{}, p2{};
      p1[f.axis] = p2[f.axis] = f.rect.lo[f.axis];
      p1[o] = f.rect.lo[o];
      p2[o] = f.rect.hi[o];
      m += segment_disk_length(p1, p2, c, r);
    } else {
      double rho = std::sqrt(r * r - dplane * dplane);
      int o1 = f.axis == 0 ? 1 : 0, o2 = f.axis == 2 ? 1 : 2;
      std::vector<Vec> poly = {{f.rect.lo[o1], f.rect.lo[o2], 0},
                               {f.rect.hi[o1], f.rect.lo[o2], 0},
                               {f.rect.hi[o1], f.rect.hi[o2], 0},
                               {f.rect.lo[o1], f.rect.hi[o2], 0}};
      m += disk_polygon_area({c[o1], c[o2], 0}, rho, poly);
    }
  }
  return m;
}

double dist_to_faces(const std::vector<Face>& faces, const Vec& p) {
  double d = 1e300;
  for (const Face& f : faces) d = std::min(d, f.rect.dist(p));
  return d;
}

const WhitneyRegion::Component* WhitneyRegion::side_component(int s) const {
  for (const auto& c : components)
    if (c.side == s) return &c;
  return nullptr;
}

namespace {

// ---- certified distance from a box to a regime graph ----------------------

// every graph point lies within this radius of a knot-lattice node at
// stride*s spacing
double lattice_cover(const RegimeGraph& g, int64_t stride) {
  double ss = g.s * (double)stride;
  if (g.dim == 2) return 0.5 * ss * std::sqrt(1.0 + g.lip * g.lip) * (1 + 1e-9);
  return ss * std::sqrt(0.5 + g.lip * g.lip) * (1 + 1e-9);
}

double lattice_scan(const RegimeGraph& g, const Box& b, double uc, double vc, double R,
                    int64_t stride) {
  double ss = g.s * (double)stride;
  int64_t iu0 = (int64_t)std::floor((uc - R - g.u0) / ss);
  int64_t iu1 = (int64_t)std::ceil((uc + R - g.u0) / ss);
  double best = 1e300;
  if (g.dim == 2) {
    for (int64_t i = iu0; i <= iu1; ++i)
      best = std::min(best, b.dist(g.point(g.u0 + (double)i * ss, 0)));
  } else {
    int64_t iv0 = (int64_t)std::floor((vc - R - g.v0) / ss);
    int64_t iv1 = (int64_t)std::ceil((vc + R - g.v0) / ss);
    for (int64_t i = iu0; i <= iu1; ++i)
      for (int64_t j = iv0; j <= iv1; ++j)
        best = std::min(best, b.dist(g.point(g.u0 + (double)i * ss, g.v0 + (double)j * ss)));
  }
  return best;
}

// certified lower bound for dist(b, graph): a node beyond the final window is
// farther from b than the in-window minimum plus the lattice cover
double graph_dist_lb(const RegimeGraph& g, const Box& b, int64_t stride) {
  double uc, vc, wc;
  g.project(b.center(), uc, vc, wc);
  double ubr = 0;
  for (int a = 0; a < g.dim; ++a) {
    ubr += std::abs(g.t1[a]) * b.side(a) * 0.5;
    if (g.dim == 3) ubr += std::abs(g.t2[a]) * b.side(a) * 0.5;
  }
  double cover = lattice_cover(g, stride);
  double R = ubr + b.diam() + 4 * g.s * (double)stride + cover;
  double m = lattice_scan(g, b, uc, vc, R, stride);
  for (int it = 0; it < 48; ++it) {
    double need = ubr + m + cover + g.s * (double)stride;
    if (R >= need) break;
    R = need;
    m = lattice_scan(g, b, uc, vc, R, stride);
  }
  return std::max(0.0, m - cover);
}

// one-sided test: a certified positive distance plus the center sign settles
// the side of the whole connected box. Returns 0 when the bound stays below
// the floor even at stride 1.
int certified_side(const RegimeGraph& g, const Box& b, double floor_dist, double* lb_out) {
  int64_t stride = std::max<int64_t>(1, (int64_t)(b.max_side() / (4 * g.s)));
  double lb = 0;
  for (;; stride /= 2) {
    lb = graph_dist_lb(g, b, stride);
    if (lb > 0 && lb >= floor_dist) break;
    if (stride <= 1) break;
  }
  if (lb_out) *lb_out = lb;
  if (lb <= 0 || lb < floor_dist) return 0;
  double sd = g.side(b.center());
  if (sd == 0) throw std::logic_error("box center lies exactly on a regime graph");
  return sd > 0 ? +1 : -1;
}

double vert_clear(const RegimeGraph& g, const Vec& p, int sigma) { return sigma * g.side(p); }

}  // namespace

// ---- RegionBuilder ---------------------------------------------------------

RegionBuilder::RegionBuilder(const SurfaceGrid& g, const WhitneyDecomposition& w,
                             const CoronaDecomposition& c, double tau)
    : g_(g), w_(w), c_(c), tau_(tau) {
  if ((int)c.assign.size() != g.k_max() - g.k_min() + 1 ||
      g.generation(g.k_min()).size() != c.assign.front().size())
    throw std::invalid_argument("grid does not match the corona decomposition");
  Box probe{Vec{0, 0, 0}, Vec{1, 1, 1}, g.boundary().dim()};
  fatten_box(probe, tau, w.tau0());  // validates tau in (0, tau0]

  int nk = g.k_max() - g.k_min() + 1;
  regions_.resize((size_t)nk);
  std::vector<std::pair<int, int32_t>> flat;
  for (int k = g.k_min(); k <= g.k_max(); ++k) {
    regions_[(size_t)(k - g.k_min())].resize(g.generation(k).size());
    for (size_t i = 0; i < g.generation(k).size(); ++i) flat.push_back({k, (int32_t)i});
  }
  std::string first_error;
  std::mutex err_mu;
  parallel_chunks((int64_t)flat.size(), 16, [&](int64_t lo, int64_t hi, int) {
    for (int64_t f = lo; f < hi; ++f) {
      auto [k, i] = flat[(size_t)f];
      WhitneyRegion& r = regions_[(size_t)(k - g_.k_min())][(size_t)i];
      r.owner = g_.generation(k)[(size_t)i].id;
      try {
        build_region(r);
      } catch (const std::exception& ex) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (first_error.empty()) first_error = ex.what();
      }
    }
  });
  if (!first_error.empty()) throw std::runtime_error(first_error);

  // modified centers read the parent's region, hence a second, ordered pass
  for (int k = g.k_min(); k <= g.k_max(); ++k)
    for (auto& r : regions_[(size_t)(k - g.k_min())]) {
      for (auto& comp : r.components) comp.modified_center = comp.center;
      if (!r.good || r.owner.k == g.k_min()) continue;
      CubeId par = r.owner.parent();
      if (!g_.has(par) || c_.regime_of(g_, par) != r.regime) continue;
      const WhitneyRegion& pr = whitney_region(par);
      for (auto& comp : r.components) {
        const auto* pc = pr.side_component(comp.side);
        if (!pc) throw std::logic_error("parent region misses a side at cube " + cube_name(par));
        Vec y = pc->center;
        bool in_own = false;
        for (int32_t ci : comp.cubes)
          if (strict_inside(w_.fattened(ci, tau_), y)) {
            in_own = true;
            break;
          }
        if (!in_own)
          throw std::logic_error("modified center escapes the region union at cube " +
                                 cube_name(r.owner));
        comp.modified_center = y;
      }
    }
}

const WhitneyRegion& RegionBuilder::whitney_region(const CubeId& q) const {
  if (q.k < g_.k_min() || q.k > g_.k_max()) throw std::out_of_range("cube level not in grid");
  const SurfaceCube* c = g_.find(q);
  if (!c) throw std::out_of_range("cube not in grid");
  return regions_[(size_t)(q.k - g_.k_min())][(size_t)(c - g_.generation(q.k).data())];
}

void RegionBuilder::build_region(WhitneyRegion& r) const {
  const CubeId q = r.owner;
  double lq = q.len();
  int32_t reg = c_.regime_of(g_, q);
  r.good = reg >= 0;
  r.regime = reg;

  std::vector<int32_t> own = w0_of_cube(g_, q, w_, c_.eta, c_.K);
  if (own.empty())
    throw std::invalid_argument("Whitney decomposition does not resolve cube " + cube_name(q));

  Vec x_plus{}, x_minus{};
  if (!r.good) {
    r.cubes = own;
    r.side.assign(r.cubes.size(), 0);
  } else {
    const RegimeGraph& gma = c_.regimes[(size_t)reg].gamma;
    double claim_floor = std::sqrt(c_.eta) * lq;

    std::vector<int32_t> base = own;
    bool parent_same_regime = false;
    if (q.k > g_.k_min() && g_.has(q.parent())) {
      parent_same_regime = c_.regime_of(g_, q.parent()) == reg;
      auto pw = w0_of_cube(g_, q.parent(), w_, c_.eta, c_.K);
      base.insert(base.end(), pw.begin(), pw.end());
      std::sort(base.begin(), base.end());
      base.erase(std::unique(base.begin(), base.end()), base.end());
    }

    std::set<int32_t> own_set(own.begin(), own.end());
    std::vector<int32_t> kept;
    std::vector<int8_t> kept_side;
    int32_t best[2] = {-1, -1};
    for (int32_t i : base) {
      bool must = own_set.count(i) != 0 || parent_same_regime;
      double lb = 0;
      int sd = certified_side(gma, w_.box(i), claim_floor * (1 - 1e-9), &lb);
      if (sd == 0) {
        if (must)
          throw std::logic_error("one-sided clearance claim fails at cube " + cube_name(q) +
                                 " (certified " + format_double(lb) + ", need " +
                                 format_double(claim_floor) + ")");
        continue;  // parent-side cube beyond the regime graph's reach: drop it
      }
      kept.push_back(i);
      kept_side.push_back((int8_t)sd);
      if (own_set.count(i)) {
        int slot = sd > 0 ? 0 : 1;
        if (best[slot] < 0 ||
            w_.cubes()[(size_t)i].id.len() > w_.cubes()[(size_t)best[slot]].id.len())
          best[slot] = i;
      }
    }
    if (best[0] < 0 || best[1] < 0)
      throw std::logic_error("Whitney collection of cube " + cube_name(q) +
                             " does not reach both sides of its regime graph");
    x_plus = w_.box(best[0]).center();
    x_minus = w_.box(best[1]).center();

    r.cubes = std::move(kept);
    r.side = std::move(kept_side);
    augment_with_paths(r, c_.regimes[(size_t)reg], x_plus, x_minus);
  }

  // component assembly over the original (unfattened) cubes
  size_t n = r.cubes.size();
  std::vector<Box> orig(n);
  for (size_t i = 0; i < n; ++i) orig[i] = w_.box(r.cubes[i]);
  Dsu dsu(n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      if (orig[i].intersects_closed(orig[j])) dsu.join((int32_t)i, (int32_t)j);
  std::vector<int32_t> root_of(n);
  for (size_t i = 0; i < n; ++i) root_of[i] = dsu.find((int32_t)i);

  r.components.clear();
  std::vector<int32_t> seen;  // component roots, ordered by smallest member
  for (size_t i = 0; i < n; ++i) {
    if (std::find(seen.begin(), seen.end(), root_of[i]) != seen.end()) continue;
    seen.push_back(root_of[i]);
    WhitneyRegion::Component comp;
    comp.side = r.side[i];
    for (size_t j = i; j < n; ++j)
      if (root_of[j] == root_of[i]) {
        comp.cubes.push_back(r.cubes[j]);
        if (r.side[j] != comp.side)
          throw std::logic_error("component mixes graph sides at cube " + cube_name(q));
      }
    int32_t big = comp.cubes[0];
    for (int32_t ci : comp.cubes)
      if (w_.cubes()[(size_t)ci].id.len() > w_.cubes()[(size_t)big].id.len()) big = ci;
    comp.center = w_.box(big).center();
    r.components.push_back(std::move(comp));
  }

  if (r.good) {
    if (r.components.size() != 2)
      throw std::logic_error("Whitney region of cube " + cube_name(q) + " has " +
                             std::to_string(r.components.size()) + " components, expected 2");
    if (r.components[0].side == -1) std::swap(r.components[0], r.components[1]);
    if (r.components[0].side != +1 || r.components[1].side != -1)
      throw std::logic_error("Whitney region sides are not one of each at cube " + cube_name(q));
    r.components[0].center = x_plus;
    r.components[1].center = x_minus;
  }

  r.min_len = 1e300;
  r.max_len = 0;
  for (int32_t ci : r.cubes) {
    double l = w_.cubes()[(size_t)ci].id.len();
    r.min_len = std::min(r.min_len, l);
    r.max_len = std::max(r.max_len, l);
  }
}

void RegionBuilder::augment_with_paths(WhitneyRegion& r, const StoppingRegime& s,
                                       const Vec& x_plus, const Vec& x_minus) const {
  const RegimeGraph& g = s.gamma;
  const CubeId q = r.owner;
  double lq = q.len();
  double root = std::sqrt(1 + g.lip * g.lip);
  double floor_e = 0.5 * std::sqrt(c_.eta) * lq;  // Euclid clearance floor
  double floor_v = floor_e * root;                // same floor as a vertical offset

  int astar = 0;
  for (int a = 1; a < g.dim; ++a)
    if (std::abs(g.base.normal[a]) > std::abs(g.base.normal[astar])) astar = a;
  double tup = std::abs(g.t1[astar]) + (g.dim == 3 ? std::abs(g.t2[astar]) : 0.0);
  double lift_rate = std::abs(g.base.normal[astar]) - g.lip * tup;
  if (lift_rate < 0.05)
    throw std::runtime_error("regime graph too steep for axis paths at cube " + cube_name(q));

  auto lift = [&](Vec p, int sigma, double target_v) {
    double dir = (sigma > 0) == (g.base.normal[astar] > 0) ? 1.0 : -1.0;
    for (int guard = 0; guard < 64; ++guard) {
      double cur = vert_clear(g, p, sigma);
      if (cur >= target_v) return p;
      p[astar] += dir * (target_v - cur) / lift_rate * 1.02;
    }
    throw std::runtime_error("harnack path lift stalls at cube " + cube_name(q));
  };

  // clearance along a segment, certified by bisection: vert_clear is
  // Lipschitz with constant at most 1 + 2 lip in the ambient metric
  double lip_c = 1 + 2 * g.lip;
  std::function<void(const Vec&, const Vec&, double, double, int, int)> certify =
      [&](const Vec& a, const Vec& b, double ca, double cb, int sigma, int depth) {
        double len = (b - a).norm();
        if (std::min(ca, cb) - 0.5 * len * lip_c >= floor_v * (1 - 1e-9)) return;
        if (len <= 0.25 * std::min(g.s, floor_v) || depth > 48) {
          if (std::min(ca, cb) >= floor_v * (1 - 1e-9)) return;
          throw std::runtime_error("harnack path clearance fails at cube " + cube_name(q));
        }
        Vec m = (a + b) * 0.5;
        double cm = vert_clear(g, m, sigma);
        certify(a, m, ca, cm, sigma, depth + 1);
        certify(m, b, cm, cb, sigma, depth + 1);
      };

  std::set<int32_t> have(r.cubes.begin(), r.cubes.end());
  std::set<int32_t> added[2];

  double tiny = ipow2(-w_.k_deepest()) * 1e-3;
  auto walk = [&](const Vec& a, const Vec& b, int sigma) {
    certify(a, b, vert_clear(g, a, sigma), vert_clear(g, b, sigma), sigma, 0);
    int ax = -1;
    for (int aa = 0; aa < g.dim; ++aa)
      if (a[aa] != b[aa]) {
        if (ax >= 0) throw std::logic_error("harnack path segment is not axis aligned");
        ax = aa;
      }
    Vec p = a;
    for (int guard = 0; guard < 1000000; ++guard) {
      Vec probe = p;
      if (ax >= 0 && b[ax] < a[ax] && guard > 0) probe[ax] -= tiny;
      int32_t i = w_.find(probe);
      if (i < 0)
        throw std::runtime_error("harnack path leaves the decomposition at cube " + cube_name(q));
      if (!have.count(i)) added[sigma > 0 ? 0 : 1].insert(i);
      if (ax < 0) return;
      Box bx = w_.box(i);
      double exit = b[ax] > a[ax] ? bx.hi[ax] : bx.lo[ax];
      if (b[ax] > a[ax] ? exit >= b[ax] : exit <= b[ax]) return;
      p[ax] = exit;
    }
    throw std::runtime_error("harnack path walk stalls at cube " + cube_name(q));
  };

  // vertical decay rate when moving along axis a
  double rate[3] = {0, 0, 0};
  for (int a = 0; a < g.dim; ++a)
    rate[a] = std::abs(g.base.normal[a]) +
              g.lip * (std::abs(g.t1[a]) + (g.dim == 3 ? std::abs(g.t2[a]) : 0.0));

  auto run_path = [&](const Vec& from, const Vec& to, int sigma) {
    Vec cur = lift(from, sigma, std::max(vert_clear(g, from, sigma), 3 * floor_v));
    walk(from, cur, sigma);
    for (int a = 0; a < g.dim; ++a) {
      if (a == astar) continue;
      for (int guard = 0; guard < 4096 && cur[a] != to[a]; ++guard) {
        double rem = to[a] - cur[a];
        double cv = vert_clear(g, cur, sigma);
        double step = (cv - 1.5 * floor_v) / std::max(rate[a], 1e-12);
        if (step < 0.25 * g.s) {
          Vec up = lift(cur, sigma, cv + 2 * floor_v);
          walk(cur, up, sigma);
          cur = up;
          continue;
        }
        double move = std::clamp(rem, -step, step);
        Vec nxt = cur;
        nxt[a] += move;
        walk(cur, nxt, sigma);
        cur = nxt;
      }
      if (cur[a] != to[a])
        throw std::runtime_error("harnack path stalls sideways at cube " + cube_name(q));
    }
    walk(cur, to, sigma);  // descent along the dominant axis
  };

  size_t base_count = r.cubes.size();
  for (size_t idx = 0; idx < base_count; ++idx) {
    int sigma = r.side[idx];
    const Vec& target = sigma > 0 ? x_plus : x_minus;
    Vec from = w_.box(r.cubes[idx]).center();
    if (from == target) continue;
    run_path(from, target, sigma);
  }

  // certify and admit the cubes the paths passed through
  for (int slot = 0; slot < 2; ++slot) {
    int sigma = slot == 0 ? +1 : -1;
    for (int32_t i : added[slot]) {
      double lb = 0;
      int sd = certified_side(g, w_.box(i), 0, &lb);
      if (sd != sigma || lb <= 0)
        throw std::logic_error("harnack path cube crosses the regime graph at cube " +
                               cube_name(q));
      r.cubes.push_back(i);
      r.side.push_back((int8_t)sigma);
    }
  }
  std::vector<size_t> perm(r.cubes.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::sort(perm.begin(), perm.end(), [&](size_t a, size_t b) { return r.cubes[a] < r.cubes[b]; });
  std::vector<int32_t> cs(perm.size());
  std::vector<int8_t> sd(perm.size());
  for (size_t i = 0; i < perm.size(); ++i) {
    cs[i] = r.cubes[perm[i]];
    sd[i] = r.side[perm[i]];
  }
  r.cubes = std::move(cs);
  r.side = std::move(sd);
}

RegionUnion RegionBuilder::materialize(std::vector<int32_t> cube_idx, RegionUnion::Role role,
                                       double tau) const {
  std::sort(cube_idx.begin(), cube_idx.end());
  cube_idx.erase(std::unique(cube_idx.begin(), cube_idx.end()), cube_idx.end());
  RegionUnion r;
  r.role = role;
  r.dim = g_.boundary().dim();
  r.tau = tau;
  r.cubes = std::move(cube_idx);
  r.boxes.reserve(r.cubes.size());
  // the doubled dilation of the fattened variant is admitted here: the
  // decomposition-level exclusion guarantee covers tau <= tau0 only, so
  // region overlap is measured rather than assumed
  for (int32_t i : r.cubes) r.boxes.push_back(fatten_box(w_.box(i), tau, 2 * w_.tau0()));
  return r;
}

RegionUnion RegionBuilder::whitney_union(const CubeId& q, int side, double tau_mult) const {
  const WhitneyRegion& r = whitney_region(q);
  std::vector<int32_t> idx;
  if (side == 0) {
    idx = r.cubes;
  } else {
    const auto* comp = r.side_component(side);
    if (!comp) throw std::invalid_argument("region has no side " + std::to_string(side));
    idx = comp->cubes;
  }
  return materialize(std::move(idx), RegionUnion::Role::whitney, tau_ * tau_mult);
}

std::vector<CubeId> RegionBuilder::descendants(const CubeId& q) const {
  std::vector<CubeId> out;
  for (int k = std::max(q.k, g_.k_min()); k <= g_.k_max(); ++k)
    for (const auto& c : g_.generation(k))
      if (q.is_ancestor_of(c.id)) out.push_back(c.id);
  return out;
}

RegionUnion RegionBuilder::carleson_box(const CubeId& q) const {
  std::vector<int32_t> idx;
  for (const CubeId& d : descendants(q)) {
    const auto& r = whitney_region(d);
    idx.insert(idx.end(), r.cubes.begin(), r.cubes.end());
  }
  RegionUnion out = materialize(std::move(idx), RegionUnion::Role::carleson, tau_);
  const SurfaceCube& qc = g_.cube(q);
  double rad = c_.K * q.len() * (1 + 1e-12);
  for (const Box& b : out.boxes) {
    double worst = 0;
    for (int corner = 0; corner < (1 << out.dim); ++corner) {
      Vec p{};
      for (int a = 0; a < out.dim; ++a) p[a] = (corner >> a) & 1 ? b.hi[a] : b.lo[a];
      worst = std::max(worst, (p - qc.center).norm());
    }
    if (worst > rad) {
      out.in_control_ball = false;
      break;
    }
  }
  return out;
}

std::vector<CubeId> RegionBuilder::discrete_sawtooth(const std::vector<CubeId>& f,
                                                     const CubeId& q) const {
  for (size_t i = 0; i < f.size(); ++i)
    for (size_t j = i + 1; j < f.size(); ++j)
      if (f[i].is_ancestor_of(f[j]) || f[j].is_ancestor_of(f[i]))
        throw std::invalid_argument("sawtooth family is not pairwise disjoint");
  std::vector<CubeId> out;
  for (const CubeId& d : descendants(q)) {
    bool removed = false;
    for (const CubeId& fj : f)
      if (fj.is_ancestor_of(d)) {
        removed = true;
        break;
      }
    if (!removed) out.push_back(d);
  }
  return out;
}

RegionUnion RegionBuilder::geometric_sawtooth(const std::vector<CubeId>& f,
                                              const CubeId& q) const {
  std::vector<int32_t> idx;
  for (const CubeId& d : discrete_sawtooth(f, q)) {
    const auto& r = whitney_region(d);
    idx.insert(idx.end(), r.cubes.begin(), r.cubes.end());
  }
  return materialize(std::move(idx), RegionUnion::Role::sawtooth, tau_);
}

std::pair<RegionUnion, RegionUnion> RegionBuilder::regime_domain(const StoppingRegime& sub) const {
  if (sub.members.empty()) throw std::invalid_argument("subregime has no members");
  std::vector<CubeId> m = sub.members;
  std::sort(m.begin(), m.end());
  if (!std::binary_search(m.begin(), m.end(), sub.root))
    throw std::invalid_argument("subregime root is not a member");
  int32_t reg = c_.regime_of(g_, sub.root);
  if (reg < 0) throw std::invalid_argument("subregime root is not in a stopping regime");
  for (const CubeId& id : m) {
    if (!sub.root.is_ancestor_of(id))
      throw std::invalid_argument("subregime member outside the root: " + cube_name(id));
    if (c_.regime_of(g_, id) != reg)
      throw std::invalid_argument("subregime member leaves the stopping regime: " + cube_name(id));
    if (!(id == sub.root) && !std::binary_search(m.begin(), m.end(), id.parent()))
      throw std::invalid_argument("subregime is not semi-coherent at " + cube_name(id));
  }
  RegionUnion out[2];
  for (int slot = 0; slot < 2; ++slot) {
    int sigma = slot == 0 ? +1 : -1;
    std::vector<int32_t> idx;
    for (const CubeId& id : m) {
      const auto* comp = whitney_region(id).side_component(sigma);
      if (!comp) throw std::logic_error("member misses a side component: " + cube_name(id));
      idx.insert(idx.end(), comp->cubes.begin(), comp->cubes.end());
    }
    out[slot] = materialize(std::move(idx), RegionUnion::Role::domain, tau_);
    if (out[slot].component_count() != 1)
      throw std::runtime_error("regime domain side disconnects under root " + cube_name(sub.root));
  }
  return {std::move(out[0]), std::move(out[1])};
}

int RegionBuilder::max_region_overlap(int probes_per_side) const {
  const Box& wb = w_.working_box();
  int dim = g_.boundary().dim();
  int64_t P = probes_per_side;
  int64_t total = 1;
  for (int a = 0; a < dim; ++a) total *= P;
  std::vector<int32_t> stamp((size_t)total, -1);
  std::vector<int16_t> cnt((size_t)total, 0);
  double step[3] = {1, 1, 1};
  for (int a = 0; a < dim; ++a) step[a] = wb.side(a) / (double)P;

  int32_t qstamp = 0;
  int16_t worst = 0;
  for (int k = g_.k_min(); k <= g_.k_max(); ++k)
    for (const auto& qc : g_.generation(k)) {
      const WhitneyRegion& r = whitney_region(qc.id);
      for (int32_t ci : r.cubes) {
        Box b = fatten_box(w_.box(ci), tau_, w_.tau0());
        int64_t i0[3] = {0, 0, 0}, i1[3] = {0, 0, 0};
        bool any = true;
        for (int a = 0; a < dim; ++a) {
          // probe coordinates are lo + (i + 1/2) step, kept strictly inside
          i0[a] = (int64_t)std::floor((b.lo[a] - wb.lo[a]) / step[a] - 0.5) + 1;
          i1[a] = (int64_t)std::ceil((b.hi[a] - wb.lo[a]) / step[a] - 0.5) - 1;
          i0[a] = std::max<int64_t>(i0[a], 0);
          i1[a] = std::min<int64_t>(i1[a], P - 1);
          if (i0[a] > i1[a]) any = false;
        }
        if (!any) continue;
        for (int64_t x = i0[0]; x <= i1[0]; ++x)
          for (int64_t y = i0[1]; y <= i1[1]; ++y)
            for (int64_t z = i0[2]; z <= (dim == 3 ? i1[2] : i0[2]); ++z) {
              size_t at = (size_t)(dim == 3 ? (x * P + y) * P + z : x * P + y);
              if (stamp[at] != qstamp) {
                stamp[at] = qstamp;
                if (++cnt[at] > worst) worst = cnt[at];
              }
            }
      }
      ++qstamp;
    }
  return worst;
}

// ---- NTA / ADR verification ------------------------------------------------

NTAReport verify_nta(const RegionUnion& omega, int trials, double lambda, uint64_t seed) {
  NTAReport rep;
  rep.lambda = lambda;
  if (omega.empty()) return rep;
  std::vector<Face> faces = region_boundary_faces(omega);
  if (faces.empty()) return rep;
  double diam = omega.diam();
  int dim = omega.dim;
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);

  double min_side = 1e300;
  for (const Box& b : omega.boxes) min_side = std::min(min_side, b.max_side());

  rep.interior_c = 1e300;
  rep.exterior_c = 1e300;
  for (int t = 0; t < trials; ++t) {
    const Face& f = faces[(size_t)rng.uniform_int((int64_t)faces.size())];
    Vec x{};
    for (int a = 0; a < dim; ++a)
      x[a] = a == f.axis ? f.rect.lo[a] : rng.uniform(f.rect.lo[a], f.rect.hi[a]);
    double r_lo = 2 * min_side, r_hi = 0.5 * diam;
    double r = r_hi <= r_lo ? r_hi : r_lo * std::pow(r_hi / r_lo, rng.uniform());

    // corkscrew candidates: a lattice of probes in B(x, r), nearby cube
    // centers, and pushes off the face itself
    std::vector<Vec> cand;
    Vec inward = x;
    inward[f.axis] -= f.orient * 0.5 * r;
    cand.push_back(inward);
    int span = dim == 2 ? 3 : 2;
    double cell = dim == 2 ? 0.22 * r : 0.3 * r;
    for (int ox = -span; ox <= span; ++ox)
      for (int oy = -span; oy <= span; ++oy)
        for (int oz = (dim == 3 ? -span : 0); oz <= (dim == 3 ? span : 0); ++oz) {
          Vec X = x;
          X[0] += ox * cell;
          X[1] += oy * cell;
          if (dim == 3) X[2] += oz * cell;
          if ((X - x).norm() < 0.95 * r) cand.push_back(X);
        }
    std::vector<std::pair<double, const Box*>> near;
    for (const Box& b : omega.boxes)
      if ((b.center() - x).norm() < 0.9 * r) near.push_back({-b.max_side(), &b});
    std::sort(near.begin(), near.end(),
              [](const auto& u, const auto& v) { return u.first < v.first; });
    for (size_t i = 0; i < near.size() && i < 12; ++i) cand.push_back(near[i].second->center());

    double best_in = 0, best_out = 0;
    for (const Vec& X : cand) {
      double reach = r - (X - x).norm();
      if (reach <= 0) continue;
      if (omega.contains(X)) {
        best_in = std::max(best_in, std::min(dist_to_faces(faces, X), reach) / r);
      } else {
        double d = omega.dist_to_closure(X);
        if (d > 0) best_out = std::max(best_out, std::min(d, reach) / r);
      }
    }

    ++rep.boundary_samples;
    if (best_in <= 0 || best_out <= 0) ++rep.failures;
    rep.interior_c = std::min(rep.interior_c, best_in);
    rep.exterior_c = std::min(rep.exterior_c, best_out);
  }

  // Harnack chains across the cube adjacency graph
  size_t n = omega.boxes.size();
  std::vector<std::vector<int32_t>> adj(n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      if (omega.boxes[i].overlaps_open(omega.boxes[j])) {
        adj[i].push_back((int32_t)j);
        adj[j].push_back((int32_t)i);
      }
  std::vector<int32_t> bfs_dist(n);
  for (int t = 0; t < trials; ++t) {
    int32_t i = (int32_t)rng.uniform_int((int64_t)n), j = (int32_t)rng.uniform_int((int64_t)n);
    Vec x1 = omega.boxes[(size_t)i].center(), x2 = omega.boxes[(size_t)j].center();
    double d1 = dist_to_faces(faces, x1), d2 = dist_to_faces(faces, x2);
    if ((x1 - x2).norm() > lambda * std::min(d1, d2)) continue;
    std::fill(bfs_dist.begin(), bfs_dist.end(), -1);
    std::deque<int32_t> queue{i};
    bfs_dist[(size_t)i] = 0;
    while (!queue.empty()) {
      int32_t u = queue.front();
      queue.pop_front();
      if (u == j) break;
      for (int32_t v : adj[(size_t)u])
        if (bfs_dist[(size_t)v] < 0) {
          bfs_dist[(size_t)v] = bfs_dist[(size_t)u] + 1;
          queue.push_back(v);
        }
    }
    ++rep.pair_samples;
    if (bfs_dist[(size_t)j] < 0)
      ++rep.failures;
    else
      rep.worst_chain = std::max(rep.worst_chain, (int)bfs_dist[(size_t)j] + 1);
  }

  rep.pass =
      rep.failures == 0 && rep.boundary_samples > 0 && rep.interior_c > 0 && rep.exterior_c > 0;
  return rep;
}

ADRReport verify_sawtooth_adr(const RegionUnion& omega, int trials, uint64_t seed) {
  ADRReport rep;
  if (omega.empty()) return rep;
  std::vector<Face> faces = region_boundary_faces(omega);
  if (faces.empty()) return rep;
  int dim = omega.dim;
  int n = dim - 1;
  rep.boundary_measure = faces_measure(faces, dim);
  double diam = omega.diam();
  Rng rng(seed ^ 0x7f4a7c159e3779b9ull);
  for (int t = 0; t < trials; ++t) {
    const Face& f = faces[(size_t)rng.uniform_int((int64_t)faces.size())];
    Vec x{};
    for (int a = 0; a < dim; ++a)
      x[a] = a == f.axis ? f.rect.lo[a] : rng.uniform(f.rect.lo[a], f.rect.hi[a]);
    double r_lo = f.rect.max_side() * (1 + 1e-9), r_hi = 0.9 * diam;
    if (r_lo >= r_hi) r_lo = 0.5 * r_hi;
    double r = r_lo * std::pow(r_hi / r_lo, rng.uniform());
    double mass = faces_measure_in_ball(faces, dim, x, r);
    double ratio = mass / std::pow(r, n);
    rep.min_ratio = std::min(rep.min_ratio, ratio);
    rep.max_ratio = std::max(rep.max_ratio, ratio);
    ++rep.samples;
  }
  return rep;
}

ContainmentCheck boundary_containment_check(const RegionBuilder& rb,
                                            const std::vector<CubeId>& f, const CubeId& q0) {
  ContainmentCheck out;
  RegionUnion omega = rb.geometric_sawtooth(f, q0);
  std::vector<Face> faces = region_boundary_faces(omega);
  const BoundarySet& e = rb.grid().boundary();
  int dim = e.dim();

  // The union only reaches the boundary set down to the Whitney scale of the
  // smallest grid cubes: a kept sample is guaranteed a region cube within
  // sqrt(K)*l_min of its finest grid cube, and the smallest admitted cubes
  // hover about 8*eta^{1/4}*l_min above the set. Tolerances scale with those
  // constants rather than with the sample spacing alone.
  double lmin = ipow2(-rb.grid().k_max());
  double eta14 = std::pow(rb.corona().eta, 0.25);
  double s0 = ipow2((int)std::ceil(std::log2(eta14 * lmin) - 1e-9));
  double rootk = std::sqrt(rb.corona().K);
  double spacing = e.sample_spacing();
  double tol_keep = spacing + (rootk + 4.0) * lmin;
  double tol_near = spacing + 10.0 * s0;
  double margin = spacing + 2.0 * rootk * lmin;
  out.tol = tol_keep;
  Box qbox = q0.box(dim);
  std::vector<Box> fboxes;
  for (const CubeId& fj : f) fboxes.push_back(fj.box(dim));

  for (const Vec& p : e.samples()) {
    double d = faces.empty() ? 1e300 : dist_to_faces(faces, p);
    bool in_q0 = qbox.contains(p);
    bool in_f = false;
    double f_depth = 0;  // interior depth within the deepest removed cube
    for (const Box& fb : fboxes)
      if (fb.contains(p)) {
        in_f = true;
        double depth = 1e300;
        for (int a = 0; a < dim; ++a)
          depth = std::min({depth, p[a] - fb.lo[a], fb.hi[a] - p[a]});
        f_depth = std::max(f_depth, depth);
      }
    if (in_q0 && !in_f) {
      ++out.kept_samples;
      if (d > tol_keep) ++out.kept_failures;
    }
    if (d <= tol_near) {
      ++out.near_samples;
      bool near_q0 = qbox.dist(p) <= margin;
      bool deep_in_f = in_f && f_depth > margin;
      if (!near_q0 || deep_in_f) ++out.near_failures;
    }
  }
  return out;
}

}  // namespace cme
