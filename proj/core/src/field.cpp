#include "cme/field.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace cme {

namespace {

constexpr double kPi = 3.14159265358979323846;

int axis_cells(const Box& box, double h, int axis) {
  double s = box.side(axis);
  int n = (int)std::llround(s / h);
  if (n < 8) throw std::invalid_argument("grid needs at least 8 cells per axis");
  if (std::abs(s - n * h) > 1e-9 * std::max(1.0, s))
    throw std::invalid_argument("box sides must be integer multiples of h");
  return n;
}

HarmonicField make_field(const BoundarySet& e, const Box& box,
                         const BoundaryData& data, double h) {
  if (!(h > 0)) throw std::invalid_argument("h must be positive");
  if (e.dim() != box.dim) throw std::invalid_argument("set/box dimension mismatch");
  HarmonicField f;
  f.boundary = e;
  f.box = box;
  f.dim = box.dim;
  f.h = h;
  f.nx = axis_cells(box, h, 0) + 1;
  f.ny = axis_cells(box, h, 1) + 1;
  f.nz = box.dim == 3 ? axis_cells(box, h, 2) + 1 : 1;
  f.u.assign(f.node_count(), 0.0);
  f.pinned.assign(f.node_count(), 0);

  const int nx = f.nx, ny = f.ny, nz = f.nz;
  std::atomic<bool> oversized{false};
  parallel_chunks((int64_t)ny * nz, 4, [&](int64_t r0, int64_t r1, int) {
    for (int64_t r = r0; r < r1; ++r) {
      int k = (int)(r / ny), j = (int)(r % ny);
      for (int i = 0; i < nx; ++i) {
        bool face = i == 0 || i == nx - 1 || j == 0 || j == ny - 1 ||
                    (f.dim == 3 && (k == 0 || k == nz - 1));
        Vec p = f.node(i, j, k);
        if (!face && f.boundary.distance(p) >= h) continue;
        double v = data.eval(p, f.boundary);
        if (std::abs(v) > 1 + 1e-12) oversized.store(true, std::memory_order_relaxed);
        int64_t id = f.index(i, j, k);
        f.pinned[id] = 1;
        f.u[id] = v;
      }
    }
  });
  if (oversized) throw std::invalid_argument("boundary data must stay within [-1, 1]");
  return f;
}

// y = A x on the unpinned nodes, 0 elsewhere. Krylov vectors keep pinned
// slots at zero, so the stencil needs no neighbor masks; outer faces are
// always pinned, so every unpinned node has its full neighborhood.
void apply_stencil(const HarmonicField& f, const std::vector<double>& x,
                   std::vector<double>& y) {
  const int nx = f.nx, ny = f.ny, nz = f.nz;
  const int64_t sy = nx, sz = (int64_t)nx * ny;
  const double deg = 2.0 * f.dim;
  parallel_chunks((int64_t)ny * nz, 4, [&](int64_t r0, int64_t r1, int) {
    for (int64_t r = r0; r < r1; ++r) {
      int k = (int)(r / ny), j = (int)(r % ny);
      int64_t base = ((int64_t)k * ny + j) * nx;
      for (int i = 0; i < nx; ++i) {
        int64_t id = base + i;
        if (f.pinned[id]) {
          y[id] = 0;
          continue;
        }
        double acc = deg * x[id] - x[id - 1] - x[id + 1] - x[id - sy] - x[id + sy];
        if (f.dim == 3) acc -= x[id - sz] + x[id + sz];
        y[id] = acc;
      }
    }
  });
}

std::vector<double> build_rhs(const HarmonicField& f) {
  std::vector<double> b(f.node_count(), 0.0);
  const int nx = f.nx, ny = f.ny, nz = f.nz;
  const int64_t sy = nx, sz = (int64_t)nx * ny;
  parallel_chunks((int64_t)ny * nz, 4, [&](int64_t r0, int64_t r1, int) {
    for (int64_t r = r0; r < r1; ++r) {
      int k = (int)(r / ny), j = (int)(r % ny);
      int64_t base = ((int64_t)k * ny + j) * nx;
      for (int i = 0; i < nx; ++i) {
        int64_t id = base + i;
        if (f.pinned[id]) continue;
        double acc = 0;
        if (f.pinned[id - 1]) acc += f.u[id - 1];
        if (f.pinned[id + 1]) acc += f.u[id + 1];
        if (f.pinned[id - sy]) acc += f.u[id - sy];
        if (f.pinned[id + sy]) acc += f.u[id + sy];
        if (f.dim == 3) {
          if (f.pinned[id - sz]) acc += f.u[id - sz];
          if (f.pinned[id + sz]) acc += f.u[id + sz];
        }
        b[id] = acc;
      }
    }
  });
  return b;
}

constexpr int64_t kVecChunk = 1 << 14;

// chunked partials summed in chunk order: bit-stable under CME_THREADS
double vdot(const std::vector<double>& a, const std::vector<double>& b) {
  int64_t n = (int64_t)a.size();
  std::vector<double> partial((n + kVecChunk - 1) / kVecChunk, 0.0);
  parallel_chunks(n, kVecChunk, [&](int64_t i0, int64_t i1, int c) {
    double acc = 0;
    for (int64_t i = i0; i < i1; ++i) acc += a[i] * b[i];
    partial[c] = acc;
  });
  double t = 0;
  for (double p : partial) t += p;
  return t;
}

void vaxpy(double alpha, const std::vector<double>& x, std::vector<double>& y) {
  parallel_chunks((int64_t)y.size(), kVecChunk, [&](int64_t i0, int64_t i1, int) {
    for (int64_t i = i0; i < i1; ++i) y[i] += alpha * x[i];
  });
}

void vxpay(const std::vector<double>& r, double beta, std::vector<double>& p) {
  parallel_chunks((int64_t)p.size(), kVecChunk, [&](int64_t i0, int64_t i1, int) {
    for (int64_t i = i0; i < i1; ++i) p[i] = r[i] + beta * p[i];
  });
}

struct CgResult {
  double residual = 0;
  int iterations = 0;
  std::vector<double> history;
};

CgResult run_cg(const HarmonicField& f, const std::vector<double>& b,
                std::vector<double>& x, double tol, int max_iter) {
  CgResult res;
  int64_t n = (int64_t)b.size();
  double bn = std::sqrt(vdot(b, b));
  if (bn == 0) {
    std::fill(x.begin(), x.end(), 0.0);
    res.history.push_back(0);
    return res;
  }
  std::vector<double> r(n, 0.0), p(n, 0.0), ap(n, 0.0);
  double rel = 0;
  for (;;) {
    // true residual; legs below track it by recurrence only
    apply_stencil(f, x, r);
    parallel_chunks(n, kVecChunk, [&](int64_t i0, int64_t i1, int) {
      for (int64_t i = i0; i < i1; ++i) r[i] = b[i] - r[i];
    });
    double rs = vdot(r, r);
    rel = std::sqrt(rs) / bn;
    res.history.push_back(rel);
    if (rel <= tol || res.iterations >= max_iter) break;
    p = r;
    for (int leg = 0; leg < 500 && res.iterations < max_iter; ++leg) {
      ++res.iterations;
      apply_stencil(f, p, ap);
      double pap = vdot(p, ap);
      if (!(pap > 0)) break;
      double alpha = rs / pap;
      vaxpy(alpha, p, x);
      vaxpy(-alpha, ap, r);
      double rs2 = vdot(r, r);
      rel = std::sqrt(rs2) / bn;
      res.history.push_back(rel);
      double beta = rs2 / rs;
      rs = rs2;
      if (rel <= tol) break;
      vxpay(r, beta, p);
    }
  }
  res.residual = rel;
  return res;
}

HarmonicField solve_impl(const BoundarySet& e, const Box& box,
                         const BoundaryData& data, double h,
                         const SolveOptions& opt) {
  HarmonicField f = make_field(e, box, data, h);
  std::vector<double> x(f.node_count(), 0.0);

  int cx = f.nx - 1, cy = f.ny - 1, cz = f.nz - 1;
  bool coarsen = opt.cascadic && cx % 2 == 0 && cy % 2 == 0 && cx / 2 >= 8 &&
                 cy / 2 >= 8 && (f.dim == 2 || (cz % 2 == 0 && cz / 2 >= 8));
  if (coarsen) {
    HarmonicField guess = solve_impl(e, box, data, 2 * h, opt);
    const int nx = f.nx, ny = f.ny, nz = f.nz;
    parallel_chunks((int64_t)ny * nz, 4, [&](int64_t r0, int64_t r1, int) {
      for (int64_t r = r0; r < r1; ++r) {
        int k = (int)(r / ny), j = (int)(r % ny);
        for (int i = 0; i < nx; ++i) {
          int64_t id = f.index(i, j, k);
          if (!f.pinned[id]) x[id] = guess.value_at(f.node(i, j, k));
        }
      }
    });
  }

  std::vector<double> b = build_rhs(f);
  int max_iter =
      opt.max_iter > 0 ? opt.max_iter : std::max(2000, 30 * (f.nx + f.ny + f.nz));
  CgResult cg = run_cg(f, b, x, opt.tol, max_iter);
  f.residual = cg.residual;
  f.iterations = cg.iterations;
  f.residual_history = std::move(cg.history);
  if (f.residual > opt.tol) {
    std::ostringstream msg;
    msg << "harmonic solve stalled at relative residual " << f.residual
        << " after " << f.iterations << " iterations; tail:";
    size_t tail = std::min<size_t>(5, f.residual_history.size());
    for (size_t i = f.residual_history.size() - tail; i < f.residual_history.size(); ++i)
      msg << ' ' << f.residual_history[i];
    throw std::runtime_error(msg.str());
  }
  parallel_chunks(f.node_count(), kVecChunk, [&](int64_t i0, int64_t i1, int) {
    for (int64_t i = i0; i < i1; ++i)
      if (!f.pinned[i]) f.u[i] = x[i];
  });
  return f;
}

// Midpoint sweep shared by the integral operators: visits every grid cell
// whose center can fall inside clip, accumulating per chunk and combining in
// chunk order so the totals do not depend on the thread count.
struct CellSums {
  double a = 0, b = 0;
  int64_t n = 0;
  bool bad = false;
};

CellSums sweep_cells(const HarmonicField& f, const Box& clip,
                     const std::function<void(const Vec&, CellSums&)>& visit) {
  int nc[3] = {f.nx - 1, f.ny - 1, f.dim == 3 ? f.nz - 1 : 1};
  int lo[3], hi[3];
  for (int a = 0; a < 3; ++a) {
    if (a < f.dim) {
      double t0 = (clip.lo[a] - f.box.lo[a]) / f.h - 0.5;
      double t1 = (clip.hi[a] - f.box.lo[a]) / f.h - 0.5;
      lo[a] = std::clamp((int)std::floor(t0) - 1, 0, nc[a] - 1);
      hi[a] = std::clamp((int)std::ceil(t1) + 1, 0, nc[a] - 1);
    } else {
      lo[a] = hi[a] = 0;
    }
  }
  int spany = hi[1] - lo[1] + 1, spanz = hi[2] - lo[2] + 1;
  int64_t rows = (int64_t)spany * spanz;
  std::vector<CellSums> partial((rows + 3) / 4);
  parallel_chunks(rows, 4, [&](int64_t r0, int64_t r1, int c) {
    CellSums acc;
    for (int64_t r = r0; r < r1; ++r) {
      int ck = lo[2] + (int)(r / spany), cj = lo[1] + (int)(r % spany);
      for (int ci = lo[0]; ci <= hi[0]; ++ci) {
        Vec p{f.box.lo.x + (ci + 0.5) * f.h, f.box.lo.y + (cj + 0.5) * f.h,
              f.dim == 3 ? f.box.lo.z + (ck + 0.5) * f.h : 0.0};
        visit(p, acc);
      }
    }
    partial[c] = acc;
  });
  CellSums total;
  for (const CellSums& p : partial) {
    total.a += p.a;
    total.b += p.b;
    total.n += p.n;
    total.bad = total.bad || p.bad;
  }
  return total;
}

bool stencil_fits(const HarmonicField& f, const Vec& p, double arm) {
  double eps = 1e-9 * f.h;
  for (int a = 0; a < f.dim; ++a)
    if (p[a] - arm < f.box.lo[a] - eps || p[a] + arm > f.box.hi[a] + eps)
      return false;
  return true;
}

}  // namespace

double BoundaryData::eval(const Vec& p, const BoundarySet& e) const {
  switch (kind) {
    case Kind::Constant:
      return value;
    case Kind::BallIndicator:
      return (p - center).norm() <= radius ? value : 0.0;
    case Kind::SmoothBump: {
      double q = (p - center).norm2() / (radius * radius);
      return q >= 1 ? 0.0 : value * (1 - q) * (1 - q);
    }
    case Kind::Coordinate:
      return value * p[axis];
    case Kind::HalfPlaneStep: {
      double x = p.x - center.x, y = std::abs(p.y - center.y);
      if (y == 0) return value * (x > 0 ? 1.0 : x < 0 ? 0.0 : 0.5);
      return value * (0.5 + std::atan(x / y) / kPi);
    }
    case Kind::CircleTrace:
      return value * e.circle_trace_harmonic(p);
  }
  return 0;
}

double HarmonicField::value_at(const Vec& p) const {
  auto coord = [&](double c, double l, int n) {
    double t = (c - l) / h;
    return std::clamp(t, 0.0, (double)(n - 1));
  };
  double fx = coord(p.x, box.lo.x, nx), fy = coord(p.y, box.lo.y, ny);
  int i0 = std::min((int)fx, nx - 2), j0 = std::min((int)fy, ny - 2);
  double wx = fx - i0, wy = fy - j0;
  if (dim == 2) {
    double v0 = (1 - wx) * u[index(i0, j0)] + wx * u[index(i0 + 1, j0)];
    double v1 = (1 - wx) * u[index(i0, j0 + 1)] + wx * u[index(i0 + 1, j0 + 1)];
    return (1 - wy) * v0 + wy * v1;
  }
  double fz = coord(p.z, box.lo.z, nz);
  int k0 = std::min((int)fz, nz - 2);
  double wz = fz - k0, acc = 0;
  for (int dk = 0; dk < 2; ++dk)
    for (int dj = 0; dj < 2; ++dj)
      for (int di = 0; di < 2; ++di)
        acc += u[index(i0 + di, j0 + dj, k0 + dk)] * (di ? wx : 1 - wx) *
               (dj ? wy : 1 - wy) * (dk ? wz : 1 - wz);
  return acc;
}

Vec HarmonicField::gradient_at(const Vec& p) const {
  Vec g{};
  for (int a = 0; a < dim; ++a) {
    Vec pp = p, pm = p;
    pp[a] += h;
    pm[a] -= h;
    g[a] = (value_at(pp) - value_at(pm)) / (2 * h);
  }
  return g;
}

void HarmonicField::dump(std::ostream& os) const {
  os << "field dim " << dim << " h " << format_double(h) << " nodes " << nx
     << ' ' << ny << ' ' << nz << " lo " << format_double(box.lo.x) << ' '
     << format_double(box.lo.y) << ' ' << format_double(box.lo.z) << " residual "
     << format_double(residual) << " iterations " << iterations << " sup "
     << format_double(sup_norm) << "\n";
  for (int k = 0; k < nz; ++k) {
    if (k) os << "\n";
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        if (i) os << ' ';
        os << format_double(u[index(i, j, k)]);
      }
      os << "\n";
    }
  }
  os << "pinned\n";
  for (int k = 0; k < nz; ++k) {
    if (k) os << "\n";
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        if (i) os << ' ';
        os << (pinned[index(i, j, k)] ? 1 : 0);
      }
      os << "\n";
    }
  }
}

HarmonicField solve_harmonic(const BoundarySet& e, const Box& box,
                             const BoundaryData& data, double h,
                             const SolveOptions& opt) {
  double feat = e.finest_feature();
  if (h > feat / 4 * (1 + 1e-12))
    throw std::invalid_argument("h must resolve the set's finest feature by 4 nodes");

  HarmonicField f = solve_impl(e, box, data, h, opt);

  double lo = 1e300, hi = -1e300, sup = 0;
  for (int64_t i = 0; i < f.node_count(); ++i) {
    if (f.pinned[i]) {
      lo = std::min(lo, f.u[i]);
      hi = std::max(hi, f.u[i]);
    }
    sup = std::max(sup, std::abs(f.u[i]));
  }
  f.data_lo = lo;
  f.data_hi = hi;
  f.sup_norm = sup;
  double slack = 1e-6 * std::max({1.0, std::abs(lo), std::abs(hi)});
  for (int64_t i = 0; i < f.node_count(); ++i) {
    if (!f.pinned[i] && (f.u[i] < lo - slack || f.u[i] > hi + slack))
      throw std::logic_error("maximum principle violated by the solved field");
  }
  return f;
}

Vec gradient(const HarmonicField& f, const Vec& X) {
  if (!stencil_fits(f, X, f.h))
    throw std::invalid_argument("gradient stencil leaves the grid");
  if (f.delta(X) < 2 * f.h)
    throw std::invalid_argument("gradient needs delta(X) >= 2h");
  return f.gradient_at(X);
}

CarlesonSample carleson_functional(const HarmonicField& f, const Vec& x, double r) {
  if (f.delta(x) > 1e-9)
    throw std::invalid_argument("carleson center must lie on the boundary set");
  if (r < 8 * f.h)
    throw std::invalid_argument("carleson ball under-resolved: need r >= 8h");
  if (!f.box.contains_closed(x))
    throw std::invalid_argument("carleson center outside the grid box");

  const double h = f.h, r2 = r * r, dmin = 2 * h;
  const double vol = std::pow(h, f.dim);
  Box clip = f.box;
  for (int a = 0; a < f.dim; ++a) {
    clip.lo[a] = x[a] - r;
    clip.hi[a] = x[a] + r;
  }

  CellSums main = sweep_cells(f, clip, [&](const Vec& c, CellSums& s) {
    if ((c - x).norm2() > r2) return;
    double d = f.delta(c);
    if (d < dmin) {
      s.b += vol;
      return;
    }
    if (!stencil_fits(f, c, h)) {
      s.bad = true;
      return;
    }
    s.a += f.gradient_at(c).norm2() * d * vol;
  });
  if (main.bad)
    throw std::invalid_argument("carleson ball reaches a grid face away from the set");

  // same quadrature at half the cell size, for the attached error estimate
  const double svol = vol / (1 << f.dim);
  CellSums fine = sweep_cells(f, clip, [&](const Vec& c, CellSums& s) {
    int nsub = 1 << f.dim;
    for (int m = 0; m < nsub; ++m) {
      Vec q = c;
      q.x += (m & 1 ? 1 : -1) * h / 4;
      q.y += (m & 2 ? 1 : -1) * h / 4;
      if (f.dim == 3) q.z += (m & 4 ? 1 : -1) * h / 4;
      if ((q - x).norm2() > r2) continue;
      double d = f.delta(q);
      if (d < dmin) continue;
      Vec g = stencil_fits(f, q, h) ? f.gradient_at(q) : f.gradient_at(c);
      s.a += g.norm2() * d * svol;
    }
  });

  double rn = std::pow(r, f.dim - 1);
  CarlesonSample out;
  out.center = x;
  out.radius = r;
  out.value = main.a / rn;
  out.error_estimate = std::abs(main.a - fine.a) / rn;
  out.excluded_volume = main.b;
  return out;
}

double region_energy(const HarmonicField& f, const RegionUnion& r) {
  if (r.empty()) return 0;
  const double h = f.h, dmin = 2 * h, vol = std::pow(h, f.dim);
  CellSums s = sweep_cells(f, r.bounding_box(), [&](const Vec& c, CellSums& acc) {
    if (!r.contains(c)) return;
    double d = f.delta(c);
    if (d < dmin) return;
    if (!stencil_fits(f, c, h)) {
      acc.bad = true;
      return;
    }
    acc.a += f.gradient_at(c).norm2() * d * vol;
  });
  if (s.bad)
    throw std::invalid_argument("region quadrature leaves the grid");
  return s.a;
}

double dyadic_carleson_functional(const HarmonicField& f, const SurfaceCube& q,
                                  const RegionUnion& tq) {
  if (!(q.mass > 0)) throw std::invalid_argument("cube carries no mass");
  return region_energy(f, tq) / q.mass;
}

ConeMax nontangential_max(const HarmonicField& f, const RegionUnion& omega,
                          const Vec& x, double kappa) {
  if (!(kappa > 0)) throw std::invalid_argument("kappa must be positive");
  ConeMax out;
  if (omega.empty()) return out;
  std::vector<Face> faces = region_boundary_faces(omega);
  Box bb = omega.bounding_box();

  int lo[3], hi[3];
  for (int a = 0; a < 3; ++a) {
    int n = a == 0 ? f.nx : a == 1 ? f.ny : f.nz;
    if (a < f.dim) {
      double t0 = (bb.lo[a] - f.box.lo[a]) / f.h;
      double t1 = (bb.hi[a] - f.box.lo[a]) / f.h;
      lo[a] = std::clamp((int)std::floor(t0), 0, n - 1);
      hi[a] = std::clamp((int)std::ceil(t1), 0, n - 1);
    } else {
      lo[a] = hi[a] = 0;
    }
  }
  int spany = hi[1] - lo[1] + 1, spanz = hi[2] - lo[2] + 1;
  int64_t rows = (int64_t)spany * spanz;
  struct Part {
    double best = 0;
    int64_t n = 0;
  };
  std::vector<Part> partial((rows + 3) / 4);
  parallel_chunks(rows, 4, [&](int64_t r0, int64_t r1, int c) {
    Part acc;
    for (int64_t r = r0; r < r1; ++r) {
      int k = lo[2] + (int)(r / spany), j = lo[1] + (int)(r % spany);
      for (int i = lo[0]; i <= hi[0]; ++i) {
        Vec p = f.node(i, j, k);
        if (!omega.contains(p)) continue;
        double d = dist_to_faces(faces, p);
        if ((p - x).norm() > (1 + kappa) * d) continue;
        acc.best = std::max(acc.best, std::abs(f.u[f.index(i, j, k)]));
        ++acc.n;
      }
    }
    partial[c] = acc;
  });
  for (const Part& p : partial) {
    out.value = std::max(out.value, p.best);
    out.nodes += p.n;
  }
  out.empty = out.nodes == 0;
  if (out.empty) out.value = 0;
  return out;
}

double caccioppoli_ratio(const HarmonicField& f, const Box& inner) {
  Box outer = inner.scaled(2);
  for (int a = 0; a < f.dim; ++a)
    if (outer.lo[a] < f.box.lo[a] - 1e-12 || outer.hi[a] > f.box.hi[a] + 1e-12)
      throw std::invalid_argument("doubled box leaves the grid");
  if (inner.max_side() < 4 * f.h)
    throw std::invalid_argument("box under-resolved: need l(I) >= 4h");
  if (f.boundary.box_distance(outer) < 2 * f.h)
    throw std::invalid_argument("doubled box too close to the boundary set");

  const double vol = std::pow(f.h, f.dim);
  CellSums s = sweep_cells(f, outer, [&](const Vec& c, CellSums& acc) {
    if (inner.contains(c)) acc.a += f.gradient_at(c).norm2() * vol;
    if (outer.contains(c)) {
      double v = f.value_at(c);
      acc.b += v * v * vol;
    }
  });
  if (!(s.b > 0)) return 0;
  double l = inner.max_side();
  return s.a * l * l / s.b;
}

}  // namespace cme
