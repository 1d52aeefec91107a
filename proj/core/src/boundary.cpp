#include "cme/boundary.hpp"

#include <cassert>

namespace cme {

Plane plane_fit(const MomentSums& m, int dim) {
  Plane pl;
  if (m.w <= 0) {
    pl.point = {0, 0, 0};
    pl.normal = dim == 2 ? Vec{0, 1, 0} : Vec{0, 0, 1};
    return pl;
  }
  Vec c = m.m1 * (1.0 / m.w);
  double xx = m.m2[0] / m.w - c.x * c.x;
  double xy = m.m2[1] / m.w - c.x * c.y;
  double yy = m.m2[3] / m.w - c.y * c.y;
  pl.point = c;
  if (dim == 2) {
    sym2_eigen(xx, xy, yy, &pl.normal);
  } else {
    double xz = m.m2[2] / m.w - c.x * c.z;
    double yz = m.m2[4] / m.w - c.y * c.z;
    double zz = m.m2[5] / m.w - c.z * c.z;
    sym3_eigen({xx, xy, xz, yy, yz, zz}, &pl.normal);
  }
  return pl;
}

namespace {

// Roots of |p1 + t (p2-p1) - c|^2 = r^2, clipped to [0,1]; false if the
// segment misses the open disk.
bool segment_disk_clip(const Vec& p1, const Vec& p2, const Vec& c, double r,
                       double* t0, double* t1) {
  Vec d = p2 - p1, f = p1 - c;
  double a = d.norm2();
  if (a == 0) return false;
  double b = f.dot(d), e = f.norm2() - r * r;
  double disc = b * b - a * e;
  if (disc <= 0) return false;
  double s = std::sqrt(disc);
  double lo = (-b - s) / a, hi = (-b + s) / a;
  lo = std::max(lo, 0.0);
  hi = std::min(hi, 1.0);
  if (hi <= lo) return false;
  *t0 = lo;
  *t1 = hi;
  return true;
}

}  // namespace

double segment_disk_length(const Vec& p1, const Vec& p2, const Vec& c, double r) {
  double t0, t1;
  if (!segment_disk_clip(p1, p2, c, r, &t0, &t1)) return 0;
  return (t1 - t0) * (p2 - p1).norm();
}

double disk_polygon_area(const Vec& c, double r, const std::vector<Vec>& poly) {
  // Green's theorem along the polygon boundary, rerouted along the circle
  // where the edge leaves the disk. Exact for simple polygons.
  auto tri = [](const Vec& u, const Vec& v) { return 0.5 * (u.x * v.y - u.y * v.x); };
  auto arc = [&](const Vec& u, const Vec& v) {
    double a0 = std::atan2(u.y, u.x), a1 = std::atan2(v.y, v.x);
    double da = a1 - a0;
    if (da > M_PI) da -= 2 * M_PI;
    if (da < -M_PI) da += 2 * M_PI;
    return 0.5 * r * r * da;
  };
  double total = 0;
  size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    Vec a = poly[i] - c, b = poly[(i + 1) % n] - c;
    bool ain = a.norm2() <= r * r, bin = b.norm2() <= r * r;
    if (ain && bin) {
      total += tri(a, b);
      continue;
    }
    double t0, t1;
    if (!segment_disk_clip(poly[i], poly[(i + 1) % n], c, r, &t0, &t1)) {
      total += arc(a, b);
      continue;
    }
    Vec q0 = a + (b - a) * t0, q1 = a + (b - a) * t1;
    total += arc(a, q0) + tri(q0, q1) + arc(q1, b);
  }
  return std::abs(total);
}

bool BoundarySet::bounded() const {
  switch (kind_) {
    case Kind::Circle:
    case Kind::Sphere:
    case Kind::Cantor:
    case Kind::Polyline:
      return true;
    default:
      return false;
  }
}

double BoundarySet::diameter() const {
  switch (kind_) {
    case Kind::Circle:
    case Kind::Sphere:
      return 2 * radius_;
    case Kind::Cantor:
      return std::sqrt(2.0);
    case Kind::Polyline: {
      double d = 0;
      for (size_t i = 0; i < knots_.size(); ++i)
        for (size_t j = i + 1; j < knots_.size(); ++j)
          d = std::max(d, (knots_[i] - knots_[j]).norm());
      return d;
    }
    default:
      return std::numeric_limits<double>::infinity();
  }
}

BoundarySet BoundarySet::flat_line(double extent, double spacing) {
  BoundarySet e;
  e.kind_ = Kind::FlatLine;
  e.dim_ = 2;
  e.extent_ = extent;
  e.spacing_ = spacing;
  e.build_samples();
  return e;
}

BoundarySet BoundarySet::flat_line_window(double x0, double x1, double spacing) {
  BoundarySet e;
  e.kind_ = Kind::FlatLine;
  e.dim_ = 2;
  e.extent_ = (x1 - x0) / 2;
  e.offset_ = (x0 + x1) / 2;
  e.spacing_ = spacing;
  e.build_samples();
  return e;
}

BoundarySet BoundarySet::flat_plane3(double extent, double spacing) {
  BoundarySet e;
  e.kind_ = Kind::FlatPlane3;
  e.dim_ = 3;
  e.extent_ = extent;
  e.spacing_ = spacing;
  e.build_samples();
  return e;
}

BoundarySet BoundarySet::lipschitz_graph(std::vector<Vec> knots, double extent,
                                         double spacing) {
  BoundarySet e;
  e.kind_ = Kind::LipschitzGraph;
  e.dim_ = 2;
  e.extent_ = extent;
  e.spacing_ = spacing;
  if (knots.size() < 2) throw std::invalid_argument("graph needs >= 2 knots");
  // constant extension out to the sampling window
  if (knots.front().x > -extent)
    knots.insert(knots.begin(), Vec{-extent, knots.front().y, 0});
  if (knots.back().x < extent) knots.push_back(Vec{extent, knots.back().y, 0});
  double lip = 0;
  for (size_t i = 0; i + 1 < knots.size(); ++i) {
    double dx = knots[i + 1].x - knots[i].x;
    if (dx <= 0) throw std::invalid_argument("graph knots must increase in x");
    lip = std::max(lip, std::abs(knots[i + 1].y - knots[i].y) / dx);
  }
  e.lip_ = lip;
  e.knots_ = std::move(knots);
  e.build_samples();
  return e;
}

BoundarySet BoundarySet::circle(Vec center, double radius, double spacing) {
  BoundarySet e;
  e.kind_ = Kind::Circle;
  e.dim_ = 2;
  e.center_ = center;
  e.radius_ = radius;
  e.spacing_ = spacing;
  e.extent_ = std::abs(center.x) + std::abs(center.y) + radius;
  e.build_samples();
  return e;
}

BoundarySet BoundarySet::sphere(Vec center, double radius, int n_samples) {
  BoundarySet e;
  e.kind_ = Kind::Sphere;
  e.dim_ = 3;
  e.center_ = center;
  e.radius_ = radius;
  e.subsamples_ = std::max(64, n_samples);
  e.spacing_ = radius * std::sqrt(4 * M_PI / e.subsamples_);
  e.build_samples();
  return e;
}

BoundarySet BoundarySet::cantor_four_corners(int generation, int subsamples) {
  BoundarySet e;
  e.kind_ = Kind::Cantor;
  e.dim_ = 2;
  e.generation_ = generation;
  e.subsamples_ = std::max(1, subsamples);
  e.extent_ = 1.0;
  e.spacing_ = std::pow(0.25, generation) / e.subsamples_;
  e.build_samples();
  return e;
}

BoundarySet BoundarySet::polyline(std::vector<Vec> vertices, double spacing) {
  BoundarySet e;
  e.kind_ = Kind::Polyline;
  e.dim_ = 2;
  e.spacing_ = spacing;
  if (vertices.size() < 2) throw std::invalid_argument("polyline needs >= 2 vertices");
  e.knots_ = std::move(vertices);
  double ext = 0;
  for (auto& v : e.knots_) ext = std::max({ext, std::abs(v.x), std::abs(v.y)});
  e.extent_ = ext;
  e.build_samples();
  return e;
}

void BoundarySet::build_samples() {
  pts_.clear();
  wts_.clear();
  auto sample_segment = [&](const Vec& a, const Vec& b) {
    double len = (b - a).norm();
    if (len == 0) return;
    int n = std::max(1, (int)std::ceil(len / spacing_));
    double w = len / n;
    for (int i = 0; i < n; ++i) {
      double t = (i + 0.5) / n;
      pts_.push_back(a + (b - a) * t);
      wts_.push_back(w);
    }
  };
  switch (kind_) {
    case Kind::FlatLine:
      sample_segment({offset_ - extent_, 0, 0}, {offset_ + extent_, 0, 0});
      break;
    case Kind::LipschitzGraph:
    case Kind::Polyline:
      for (size_t i = 0; i + 1 < knots_.size(); ++i)
        sample_segment(knots_[i], knots_[i + 1]);
      break;
    case Kind::Circle: {
      int n = std::max(8, (int)std::ceil(2 * M_PI * radius_ / spacing_));
      double w = 2 * M_PI * radius_ / n;
      for (int i = 0; i < n; ++i) {
        double th = (i + 0.5) * 2 * M_PI / n;
        pts_.push_back({center_.x + radius_ * std::cos(th),
                        center_.y + radius_ * std::sin(th), 0});
        wts_.push_back(w);
      }
      break;
    }
    case Kind::Sphere: {
      int n = subsamples_;
      double w = 4 * M_PI * radius_ * radius_ / n;
      double ga = M_PI * (3.0 - std::sqrt(5.0));
      for (int i = 0; i < n; ++i) {
        double z = 1.0 - (2.0 * i + 1.0) / n;
        double rho = std::sqrt(std::max(0.0, 1 - z * z));
        double th = ga * i;
        pts_.push_back({center_.x + radius_ * rho * std::cos(th),
                        center_.y + radius_ * rho * std::sin(th),
                        center_.z + radius_ * z});
        wts_.push_back(w);
      }
      break;
    }
    case Kind::FlatPlane3: {
      int m = std::max(1, (int)std::round(2 * extent_ / spacing_));
      double w = (2 * extent_ / m) * (2 * extent_ / m);
      for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) {
          pts_.push_back({-extent_ + (i + 0.5) * 2 * extent_ / m,
                          -extent_ + (j + 0.5) * 2 * extent_ / m, 0});
          wts_.push_back(w);
        }
      break;
    }
    case Kind::Cantor: {
      double mass = std::pow(0.25, generation_) / (subsamples_ * (double)subsamples_);
      std::function<void(double, double, double, int)> rec =
          [&](double x, double y, double side, int level) {
            if (level == generation_) {
              for (int j = 0; j < subsamples_; ++j)
                for (int i = 0; i < subsamples_; ++i) {
                  pts_.push_back({x + (i + 0.5) * side / subsamples_,
                                  y + (j + 0.5) * side / subsamples_, 0});
                  wts_.push_back(mass);
                }
              return;
            }
            double s = side / 4, off = side * 0.75;
            rec(x, y, s, level + 1);
            rec(x + off, y, s, level + 1);
            rec(x, y + off, s, level + 1);
            rec(x + off, y + off, s, level + 1);
          };
      rec(0, 0, 1.0, 0);
      break;
    }
  }
  total_mass_ = 0;
  for (double w : wts_) total_mass_ += w;
}

double BoundarySet::graph_height(double x) const {
  if (x <= knots_.front().x) return knots_.front().y;
  if (x >= knots_.back().x) return knots_.back().y;
  for (size_t i = 0; i + 1 < knots_.size(); ++i) {
    if (x <= knots_[i + 1].x) {
      double t = (x - knots_[i].x) / (knots_[i + 1].x - knots_[i].x);
      return knots_[i].y + t * (knots_[i + 1].y - knots_[i].y);
    }
  }
  return knots_.back().y;
}

namespace {

double point_segment_dist(const Vec& p, const Vec& a, const Vec& b) {
  Vec d = b - a;
  double len2 = d.norm2();
  double t = len2 > 0 ? std::clamp((p - a).dot(d) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + d * t)).norm();
}

struct CantorSq {
  double x, y, side;
  int level;
};

Box cantor_box(const CantorSq& s) {
  Box b;
  b.dim = 2;
  b.lo = {s.x, s.y, 0};
  b.hi = {s.x + s.side, s.y + s.side, 0};
  return b;
}

void cantor_children(const CantorSq& s, CantorSq out[4]) {
  double c = s.side / 4, off = s.side * 0.75;
  out[0] = {s.x, s.y, c, s.level + 1};
  out[1] = {s.x + off, s.y, c, s.level + 1};
  out[2] = {s.x, s.y + off, c, s.level + 1};
  out[3] = {s.x + off, s.y + off, c, s.level + 1};
}

}  // namespace

double BoundarySet::distance(const Vec& p) const {
  switch (kind_) {
    case Kind::FlatLine:
      return std::abs(p.y);
    case Kind::FlatPlane3:
      return std::abs(p.z);
    case Kind::Circle:
      return std::abs((p - center_).norm() - radius_);
    case Kind::Sphere:
      return std::abs((p - center_).norm() - radius_);
    case Kind::LipschitzGraph: {
      double best = std::numeric_limits<double>::infinity();
      // constant rays beyond the knot range
      const Vec& f = knots_.front();
      const Vec& l = knots_.back();
      best = std::min(best, p.x <= f.x ? std::abs(p.y - f.y) : (p - f).norm());
      best = std::min(best, p.x >= l.x ? std::abs(p.y - l.y) : (p - l).norm());
      for (size_t i = 0; i + 1 < knots_.size(); ++i)
        best = std::min(best, point_segment_dist(p, knots_[i], knots_[i + 1]));
      return best;
    }
    case Kind::Polyline: {
      double best = std::numeric_limits<double>::infinity();
      for (size_t i = 0; i + 1 < knots_.size(); ++i)
        best = std::min(best, point_segment_dist(p, knots_[i], knots_[i + 1]));
      return best;
    }
    case Kind::Cantor: {
      double best = std::numeric_limits<double>::infinity();
      std::vector<CantorSq> stack{{0, 0, 1.0, 0}};
      while (!stack.empty()) {
        CantorSq s = stack.back();
        stack.pop_back();
        double d = cantor_box(s).dist(p);
        if (d >= best) continue;
        if (s.level == generation_) {
          best = std::min(best, d);
          continue;
        }
        CantorSq ch[4];
        cantor_children(s, ch);
        // nearest-first ordering tightens the bound quickly
        std::array<int, 4> idx{0, 1, 2, 3};
        std::array<double, 4> cd;
        for (int i = 0; i < 4; ++i) cd[i] = cantor_box(ch[i]).dist(p);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return cd[a] > cd[b]; });
        for (int i : idx) stack.push_back(ch[i]);
      }
      return best;
    }
  }
  return 0;
}

namespace {

double point_seg_dist2(const Vec& p, const Vec& a, const Vec& b) {
  Vec d = b - a;
  double len2 = d.norm2();
  double t = len2 > 0 ? std::clamp((p - a).dot(d) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + d * t)).norm2();
}

int orient(const Vec& a, const Vec& b, const Vec& c) {
  double v = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  return v > 0 ? 1 : (v < 0 ? -1 : 0);
}

bool on_seg(const Vec& a, const Vec& b, const Vec& p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

bool segs_intersect(const Vec& a, const Vec& b, const Vec& c, const Vec& d) {
  int o1 = orient(a, b, c), o2 = orient(a, b, d);
  int o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_seg(a, b, c)) return true;
  if (o2 == 0 && on_seg(a, b, d)) return true;
  if (o3 == 0 && on_seg(c, d, a)) return true;
  if (o4 == 0 && on_seg(c, d, b)) return true;
  return false;
}

double seg_seg_dist(const Vec& a, const Vec& b, const Vec& c, const Vec& d) {
  if (segs_intersect(a, b, c, d)) return 0;
  double m = std::min(std::min(point_seg_dist2(a, c, d), point_seg_dist2(b, c, d)),
                      std::min(point_seg_dist2(c, a, b), point_seg_dist2(d, a, b)));
  return std::sqrt(m);
}

// 2-D box to closed segment
double box_seg_dist(const Box& bx, const Vec& a, const Vec& b) {
  if (bx.contains_closed(a) || bx.contains_closed(b)) return 0;
  Vec c00{bx.lo.x, bx.lo.y, 0}, c10{bx.hi.x, bx.lo.y, 0};
  Vec c11{bx.hi.x, bx.hi.y, 0}, c01{bx.lo.x, bx.hi.y, 0};
  double m = seg_seg_dist(a, b, c00, c10);
  m = std::min(m, seg_seg_dist(a, b, c10, c11));
  m = std::min(m, seg_seg_dist(a, b, c11, c01));
  m = std::min(m, seg_seg_dist(a, b, c01, c00));
  return m;
}

// box to horizontal ray {(t, y0) : t >= x1} (dir = +1) or { t <= x1 } (dir = -1)
double box_hray_dist(const Box& bx, double x1, double y0, int dir) {
  double dx;
  if (dir > 0) {
    dx = bx.hi.x >= x1 ? 0.0 : x1 - bx.hi.x;
  } else {
    dx = bx.lo.x <= x1 ? 0.0 : bx.lo.x - x1;
  }
  double dy = std::max({bx.lo.y - y0, 0.0, y0 - bx.hi.y});
  return std::hypot(dx, dy);
}

}  // namespace

double BoundarySet::box_distance(const Box& b) const {
  switch (kind_) {
    case Kind::FlatLine:
      return std::max({b.lo.y, 0.0, -b.hi.y});
    case Kind::FlatPlane3:
      return std::max({b.lo.z, 0.0, -b.hi.z});
    case Kind::Circle:
    case Kind::Sphere: {
      double dmin = b.dist(center_);
      double far2 = 0;
      for (int a = 0; a < dim_; ++a) {
        double t = std::max(std::abs(b.lo[a] - center_[a]), std::abs(b.hi[a] - center_[a]));
        far2 += t * t;
      }
      double dmax = std::sqrt(far2);
      if (dmin >= radius_) return dmin - radius_;
      if (dmax <= radius_) return radius_ - dmax;
      return 0;
    }
    case Kind::LipschitzGraph: {
      double best = std::numeric_limits<double>::infinity();
      for (size_t i = 0; i + 1 < knots_.size(); ++i)
        best = std::min(best, box_seg_dist(b, knots_[i], knots_[i + 1]));
      best = std::min(best, box_hray_dist(b, knots_.front().x, knots_.front().y, -1));
      best = std::min(best, box_hray_dist(b, knots_.back().x, knots_.back().y, +1));
      return best;
    }
    case Kind::Polyline: {
      double best = std::numeric_limits<double>::infinity();
      for (size_t i = 0; i + 1 < knots_.size(); ++i)
        best = std::min(best, box_seg_dist(b, knots_[i], knots_[i + 1]));
      return best;
    }
    case Kind::Cantor: {
      double best = std::numeric_limits<double>::infinity();
      std::vector<CantorSq> stack{{0, 0, 1.0, 0}};
      while (!stack.empty()) {
        CantorSq s = stack.back();
        stack.pop_back();
        double d = cantor_box(s).dist(b);
        if (d >= best) continue;
        if (s.level == generation_) {
          best = d;
          if (best == 0) return 0;
          continue;
        }
        CantorSq ch[4];
        cantor_children(s, ch);
        std::array<int, 4> idx{0, 1, 2, 3};
        std::array<double, 4> cd;
        for (int i = 0; i < 4; ++i) cd[i] = cantor_box(ch[i]).dist(b);
        std::sort(idx.begin(), idx.end(), [&](int x, int y) { return cd[x] > cd[y]; });
        for (int i : idx) stack.push_back(ch[i]);
      }
      return best;
    }
  }
  return 0;
}

double BoundarySet::ball_mass(const Vec& c, double r) const {
  switch (kind_) {
    case Kind::FlatLine: {
      double h2 = r * r - c.y * c.y;
      if (h2 <= 0) return 0;
      double h = std::sqrt(h2);
      double lo = std::max(c.x - h, offset_ - extent_);
      double hi = std::min(c.x + h, offset_ + extent_);
      return std::max(0.0, hi - lo);
    }
    case Kind::LipschitzGraph:
    case Kind::Polyline: {
      double m = 0;
      for (size_t i = 0; i + 1 < knots_.size(); ++i)
        m += segment_disk_length(knots_[i], knots_[i + 1], c, r);
      return m;
    }
    case Kind::Circle: {
      double d = (center_ - c).norm();
      if (d == 0) return r >= radius_ ? 2 * M_PI * radius_ : 0.0;
      double arg = (d * d + radius_ * radius_ - r * r) / (2 * d * radius_);
      if (arg <= -1) return 2 * M_PI * radius_;
      if (arg >= 1) return 0;
      return 2 * std::acos(arg) * radius_;
    }
    case Kind::FlatPlane3: {
      double h2 = r * r - c.z * c.z;
      if (h2 <= 0) return 0;
      Box win;
      win.dim = 2;
      win.lo = {-extent_, -extent_, 0};
      win.hi = {extent_, extent_, 0};
      return box_disk_area(win, {c.x, c.y, 0}, std::sqrt(h2));
    }
    case Kind::Sphere:
      return ball_mass_sampled(c, r);
    case Kind::Cantor: {
      double m = 0;
      std::vector<CantorSq> stack{{0, 0, 1.0, 0}};
      while (!stack.empty()) {
        CantorSq s = stack.back();
        stack.pop_back();
        Box b = cantor_box(s);
        if (b.dist(c) > r) continue;
        double far2 = 0;
        for (int a = 0; a < 2; ++a) {
          double t = std::max(std::abs(b.lo[a] - c[a]), std::abs(b.hi[a] - c[a]));
          far2 += t * t;
        }
        double node_mass = std::pow(0.25, s.level);
        if (far2 <= r * r) {
          m += node_mass;
          continue;
        }
        if (s.level == generation_) {
          m += node_mass * box_disk_area(b, c, r) / (s.side * s.side);
          continue;
        }
        CantorSq ch[4];
        cantor_children(s, ch);
        for (auto& x : ch) stack.push_back(x);
      }
      return m;
    }
  }
  return 0;
}

double BoundarySet::ball_mass_sampled(const Vec& c, double r) const {
  double m = 0;
  double r2 = r * r;
  for (size_t i = 0; i < pts_.size(); ++i)
    if ((pts_[i] - c).norm2() <= r2) m += wts_[i];
  return m;
}

MomentSums BoundarySet::ball_moments(const Vec& c, double r) const {
  MomentSums m;
  double r2 = r * r;
  for (size_t i = 0; i < pts_.size(); ++i)
    if ((pts_[i] - c).norm2() <= r2) m.add(pts_[i], wts_[i]);
  return m;
}

double BoundarySet::sup_dist_to_plane(const Plane& h, const Vec& c, double r) const {
  switch (kind_) {
    case Kind::FlatLine: {
      double half2 = r * r - c.y * c.y;
      if (half2 <= 0) return 0;
      double half = std::sqrt(half2);
      double lo = std::max(c.x - half, offset_ - extent_);
      double hi = std::min(c.x + half, offset_ + extent_);
      if (hi <= lo) return 0;
      return std::max(h.dist({lo, 0, 0}), h.dist({hi, 0, 0}));
    }
    case Kind::LipschitzGraph:
    case Kind::Polyline: {
      double best = 0;
      for (size_t i = 0; i + 1 < knots_.size(); ++i) {
        double t0, t1;
        if (!segment_disk_clip(knots_[i], knots_[i + 1], c, r, &t0, &t1)) continue;
        Vec d = knots_[i + 1] - knots_[i];
        best = std::max(best, h.dist(knots_[i] + d * t0));
        best = std::max(best, h.dist(knots_[i] + d * t1));
      }
      return best;
    }
    case Kind::Circle: {
      double d = (center_ - c).norm();
      double arg = d == 0 ? (r >= radius_ ? -1.0 : 1.0)
                          : (d * d + radius_ * radius_ - r * r) / (2 * d * radius_);
      if (arg >= 1) return 0;
      double beta = std::atan2(c.y - center_.y, c.x - center_.x);
      double alpha = arg <= -1 ? M_PI : std::acos(arg);
      auto on_circle = [&](double th) {
        return Vec{center_.x + radius_ * std::cos(th), center_.y + radius_ * std::sin(th), 0};
      };
      double best = std::max(h.dist(on_circle(beta - alpha)), h.dist(on_circle(beta + alpha)));
      double thstar = std::atan2(h.normal.y, h.normal.x);
      for (double th : {thstar, thstar + M_PI}) {
        double dd = th - beta;
        while (dd > M_PI) dd -= 2 * M_PI;
        while (dd < -M_PI) dd += 2 * M_PI;
        if (std::abs(dd) <= alpha) best = std::max(best, h.dist(on_circle(th)));
      }
      return best;
    }
    case Kind::FlatPlane3: {
      double h2 = r * r - c.z * c.z;
      if (h2 <= 0) return 0;
      double rho = std::sqrt(h2);
      Vec cd{c.x, c.y, 0};
      double inplane = std::hypot(h.normal.x, h.normal.y);
      return h.dist(cd) + rho * inplane;
    }
    case Kind::Sphere: {
      double best = 0;
      double r2 = r * r;
      for (auto& p : pts_)
        if ((p - c).norm2() <= r2) best = std::max(best, h.dist(p));
      return best;
    }
    case Kind::Cantor: {
      double best = 0;
      double tol = 1e-9 * std::max(r, 1e-30);
      auto corner_max = [&](const Box& b) {
        double m = 0;
        for (double X : {b.lo.x, b.hi.x})
          for (double Y : {b.lo.y, b.hi.y}) m = std::max(m, h.dist({X, Y, 0}));
        return m;
      };
      // descend to generation squares, then keep quartering partially
      // covered squares until they are inside the ball or negligible
      std::function<void(double, double, double, int)> rec = [&](double x, double y,
                                                                 double side, int level) {
        Box b;
        b.dim = 2;
        b.lo = {x, y, 0};
        b.hi = {x + side, y + side, 0};
        if (b.dist(c) > r) return;
        double ub = corner_max(b);
        if (ub <= best) return;
        if (level < generation_) {
          double s = side / 4, off = side * 0.75;
          rec(x, y, s, level + 1);
          rec(x + off, y, s, level + 1);
          rec(x, y + off, s, level + 1);
          rec(x + off, y + off, s, level + 1);
          return;
        }
        // inside a generation square: uniform quartering against the ball
        std::function<void(double, double, double)> quarter = [&](double qx, double qy,
                                                                  double qs) {
          Box qb;
          qb.dim = 2;
          qb.lo = {qx, qy, 0};
          qb.hi = {qx + qs, qy + qs, 0};
          if (qb.dist(c) > r) return;
          double qub = corner_max(qb);
          if (qub <= best) return;
          double far2 = 0;
          for (int a = 0; a < 2; ++a) {
            double t = std::max(std::abs(qb.lo[a] - c[a]), std::abs(qb.hi[a] - c[a]));
            far2 += t * t;
          }
          if (far2 <= r * r || qs <= tol) {
            best = std::max(best, qub);
            return;
          }
          double hs = qs / 2;
          quarter(qx, qy, hs);
          quarter(qx + hs, qy, hs);
          quarter(qx, qy + hs, hs);
          quarter(qx + hs, qy + hs, hs);
        };
        quarter(x, y, side);
      };
      rec(0, 0, 1.0, 0);
      return best;
    }
  }
  return 0;
}

double BoundarySet::sup_plane_to_set(const Plane& h, const Vec& c, double r,
                                     double tol) const {
  double dc = h.signed_dist(c);
  double half2 = r * r - dc * dc;
  if (half2 <= 0) return 0;
  double half = std::sqrt(half2);
  Vec c0 = c - h.normal * dc;
  tol = std::max(tol, 1e-12 * std::max(1.0, r));

  if (dim_ == 2) {
    Vec u{-h.normal.y, h.normal.x, 0};
    std::vector<double> cand;
    double s = half / 64;
    if (s <= 0) return distance(c0);
    for (double t = -half; t <= half; t += s) cand.push_back(t);
    cand.push_back(half);
    double vmax = 0;
    while (true) {
      vmax = 0;
      std::vector<double> vals(cand.size());
      for (size_t i = 0; i < cand.size(); ++i) {
        vals[i] = distance(c0 + u * cand[i]);
        vmax = std::max(vmax, vals[i]);
      }
      if (s <= tol) break;
      std::vector<double> next;
      for (size_t i = 0; i < cand.size(); ++i) {
        if (vals[i] >= vmax - 2 * s) {
          next.push_back(cand[i]);
          if (cand[i] - s / 2 >= -half) next.push_back(cand[i] - s / 2);
          if (cand[i] + s / 2 <= half) next.push_back(cand[i] + s / 2);
        }
      }
      std::sort(next.begin(), next.end());
      next.erase(std::unique(next.begin(), next.end()), next.end());
      cand = std::move(next);
      s /= 2;
    }
    return vmax;
  }

  // 3-D: lattice over the disk H cap B, same refinement loop
  Vec e = std::abs(h.normal.x) < 0.9 ? Vec{1, 0, 0} : Vec{0, 1, 0};
  Vec u = normalized(e - h.normal * e.dot(h.normal));
  Vec v{h.normal.y * u.z - h.normal.z * u.y, h.normal.z * u.x - h.normal.x * u.z,
        h.normal.x * u.y - h.normal.y * u.x};
  struct P2 {
    double a, b;
    bool operator<(const P2& o) const { return a != o.a ? a < o.a : b < o.b; }
    bool operator==(const P2& o) const { return a == o.a && b == o.b; }
  };
  std::vector<P2> cand;
  double s = half / 24;
  for (double a = -half; a <= half; a += s)
    for (double b = -half; b <= half; b += s)
      if (a * a + b * b <= half2) cand.push_back({a, b});
  if (cand.empty()) cand.push_back({0, 0});
  double vmax = 0;
  while (true) {
    vmax = 0;
    std::vector<double> vals(cand.size());
    for (size_t i = 0; i < cand.size(); ++i) {
      vals[i] = distance(c0 + u * cand[i].a + v * cand[i].b);
      vmax = std::max(vmax, vals[i]);
    }
    if (s <= tol || cand.size() > 200000) break;
    std::vector<P2> next;
    for (size_t i = 0; i < cand.size(); ++i) {
      if (vals[i] >= vmax - 2 * s) {
        for (int da = -1; da <= 1; ++da)
          for (int db = -1; db <= 1; ++db) {
            P2 q{cand[i].a + da * s / 2, cand[i].b + db * s / 2};
            if (q.a * q.a + q.b * q.b <= half2) next.push_back(q);
          }
      }
    }
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    cand = std::move(next);
    s /= 2;
  }
  return vmax;
}

BoundarySet BoundarySet::refined() const {
  BoundarySet e = *this;
  if (kind_ == Kind::Cantor) {
    e.subsamples_ *= 2;
    e.spacing_ /= 2;
  } else if (kind_ == Kind::Sphere) {
    e.subsamples_ *= 4;
    e.spacing_ /= 2;
  } else {
    e.spacing_ /= 2;
  }
  e.build_samples();
  return e;
}

double BoundarySet::finest_feature() const {
  switch (kind_) {
    case Kind::FlatLine:
    case Kind::FlatPlane3:
      return 1e300;
    case Kind::Circle:
    case Kind::Sphere:
      return radius_;
    case Kind::Cantor:
      return std::pow(0.25, generation_);
    case Kind::LipschitzGraph:
    case Kind::Polyline: {
      double s = 1e300;
      for (size_t i = 0; i + 1 < knots_.size(); ++i)
        s = std::min(s, (knots_[i + 1] - knots_[i]).norm());
      return s;
    }
  }
  return 1e300;
}

double BoundarySet::circle_trace_harmonic(const Vec& p) const {
  Vec d = p - center_;
  double r2 = d.norm2();
  if (r2 <= radius_ * radius_) return d.x / radius_;
  return radius_ * d.x / r2;
}

AdrReport verify_adr(const BoundarySet& e, const AdrParams& params) {
  AdrReport rep;
  int n = e.surface_dim();
  double r_min = params.r_min, r_max = params.r_max;
  if (r_min <= 0) {
    r_min = 8 * e.sample_spacing();
    if (e.kind() == BoundarySet::Kind::Cantor)
      r_min = std::max(r_min, 4 * std::pow(0.25, e.cantor_generation()));
  }
  if (r_max <= 0) {
    r_max = e.bounded() ? e.diameter() / 3.0 : e.extent() / 4.0;
  }
  r_max = std::max(r_max, r_min * 2);

  Rng rng(params.seed);
  const auto& pts = e.samples();
  double cmin = std::numeric_limits<double>::infinity(), cmax = 0;
  double cmin_s = cmin, cmax_s = 0, cmin_r = cmin, cmax_r = 0;
  BoundarySet fine = e.refined();
  int trials = 0;
  rep.scales.assign(params.radii, AdrScale{});
  for (int j = 0; j < params.radii; ++j) {
    double fr = (j + 0.5) / params.radii;
    rep.scales[j].r = r_min * std::pow(r_max / r_min, fr);
    rep.scales[j].min_ratio = std::numeric_limits<double>::infinity();
  }
  for (int t = 0; t < params.centers; ++t) {
    Vec x = pts[(size_t)rng.uniform_int((int64_t)pts.size())];
    for (int j = 0; j < params.radii; ++j) {
      double r = rep.scales[j].r;
      if (!e.bounded()) {
        // keep the ball inside the sampled window
        double margin = e.extent() - r;
        double wx = x.x - e.window_offset();
        if (std::abs(wx) > margin || (e.dim() == 3 && std::abs(x.y) > margin)) continue;
      }
      double mass = e.ball_mass(x, r);
      double ratio = mass / std::pow(r, n);
      cmin = std::min(cmin, ratio);
      cmax = std::max(cmax, ratio);
      rep.scales[j].min_ratio = std::min(rep.scales[j].min_ratio, ratio);
      rep.scales[j].max_ratio = std::max(rep.scales[j].max_ratio, ratio);
      double ms = e.ball_mass_sampled(x, r) / std::pow(r, n);
      double mr = fine.ball_mass_sampled(x, r) / std::pow(r, n);
      cmin_s = std::min(cmin_s, ms);
      cmax_s = std::max(cmax_s, ms);
      cmin_r = std::min(cmin_r, mr);
      cmax_r = std::max(cmax_r, mr);
      ++trials;
    }
  }
  rep.c_lower = cmin;
  rep.C_upper = cmax;
  rep.ratio = cmax / cmin;
  rep.trials = trials;
  double d1 = std::abs(cmax_s - cmax_r) / std::max(1e-300, cmax_r);
  double d2 = std::abs(cmin_s - cmin_r) / std::max(1e-300, cmin_r);
  rep.drift = std::max(d1, d2);
  rep.pass = rep.trials > 0 && std::isfinite(rep.C_upper) && rep.c_lower > 0 &&
             rep.drift <= 0.10;
  return rep;
}

}  // namespace cme
