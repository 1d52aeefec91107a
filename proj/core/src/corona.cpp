#include "cme/corona.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cme {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// deterministic orientation: the dominant component of the normal is positive
void orient(Vec& n) {
  int a = 0;
  if (std::abs(n.y) > std::abs(n[a])) a = 1;
  if (std::abs(n.z) > std::abs(n[a])) a = 2;
  if (n[a] < 0) n = n * -1.0;
}

void make_frame(const Plane& h, int dim, Vec& t1, Vec& t2) {
  const Vec& n = h.normal;
  if (dim == 2) {
    t1 = Vec{-n.y, n.x, 0};
    t2 = Vec{0, 0, 0};
    return;
  }
  // axis least aligned with the normal seeds the frame
  Vec e{1, 0, 0};
  if (std::abs(n.y) < std::abs(n.x)) e = Vec{0, 1, 0};
  if (std::abs(n.z) < std::abs(e.dot(n))) e = Vec{0, 0, 1};
  t1 = normalized(e - n * n.dot(e));
  t2 = Vec{n.y * t1.z - n.z * t1.y, n.z * t1.x - n.x * t1.z, n.x * t1.y - n.y * t1.x};
}

double sin_angle(const Vec& n1, const Vec& n2) {
  double c = std::min(1.0, std::abs(n1.dot(n2)));
  return std::sqrt(std::max(0.0, 1.0 - c * c));
}

int32_t level_index(const SurfaceGrid& g, int k, const CubeId& id) {
  const SurfaceCube* p = g.find(id);
  if (!p) return -1;
  return (int32_t)(p - g.generation(k).data());
}

}  // namespace

PlaneFit bwgl_classify_ball(const BoundarySet& e, const Vec& x, double len, double eta,
                            double K) {
  PlaneFit pf;
  double r = K * len, r2 = r * r;
  const auto& pts = e.samples();
  const auto& wts = e.weights();
  MomentSums ms;
  int count = 0;
  for (size_t i = 0; i < pts.size(); ++i)
    if ((pts[i] - x).norm2() <= r2) {
      ms.add(pts[i], wts[i]);
      ++count;
    }
  if (count < e.dim() + 1) {
    pf.h = Plane{x, Vec{0, 0, 0}};
    pf.h.normal[e.dim() - 1] = 1;
    pf.deficiency = kInf;
    pf.undersampled = true;
    return pf;
  }
  pf.h = plane_fit(ms, e.dim());
  orient(pf.h.normal);
  pf.sup_set_to_plane = e.sup_dist_to_plane(pf.h, x, r);
  pf.sup_plane_to_set = e.sup_plane_to_set(pf.h, x, r, eta * len / 100);
  pf.deficiency = pf.sup_set_to_plane + pf.sup_plane_to_set;
  pf.good = pf.deficiency < eta * len;
  return pf;
}

PlaneFit bwgl_classify(const SurfaceCube& q, const BoundarySet& e, double eta, double K) {
  return bwgl_classify_ball(e, q.center, q.len(), eta, K);
}

double RegimeGraph::height(double u, double v) const {
  if (nu == 1 && nv == 1) return h[0];
  double fu = std::clamp((u - u0) / s, 0.0, (double)(nu - 1));
  double fv = std::clamp((v - v0) / s, 0.0, (double)(nv - 1));
  int iu = std::min(nu - 2 >= 0 ? nu - 2 : 0, (int)fu);
  int iv = std::min(nv - 2 >= 0 ? nv - 2 : 0, (int)fv);
  double au = fu - iu, av = fv - iv;
  if (nv == 1) {
    if (nu == 1) return h[0];
    return h[iu] * (1 - au) + h[iu + 1] * au;
  }
  auto at = [&](int i, int j) { return h[(size_t)j * nu + i]; };
  double lo = at(iu, iv) * (1 - au) + at(std::min(iu + 1, nu - 1), iv) * au;
  int jv = std::min(iv + 1, nv - 1);
  double hi = at(iu, jv) * (1 - au) + at(std::min(iu + 1, nu - 1), jv) * au;
  return lo * (1 - av) + hi * av;
}

Vec RegimeGraph::point(double u, double v) const {
  return base.point + t1 * u + t2 * v + base.normal * height(u, v);
}

void RegimeGraph::project(const Vec& x, double& u, double& v, double& w) const {
  Vec d = x - base.point;
  u = d.dot(t1);
  v = dim == 3 ? d.dot(t2) : 0.0;
  w = d.dot(base.normal);
}

double RegimeGraph::side(const Vec& x) const {
  double u, v, w;
  project(x, u, v, w);
  return w - height(u, v);
}

double RegimeGraph::dist(const Vec& x) const {
  double u, v, w;
  project(x, u, v, w);
  double best = std::abs(w - height(u, v));
  double reach = best + 2 * s;
  int iu_lo = std::max(0, (int)std::floor((u - reach - u0) / s));
  int iu_hi = std::min(nu - 1, (int)std::ceil((u + reach - u0) / s));
  if (nv == 1) {
    for (int i = iu_lo; i <= iu_hi; ++i) {
      double ui = u0 + i * s;
      best = std::min(best, (x - point(ui, 0)).norm());
    }
    return best;
  }
  int iv_lo = std::max(0, (int)std::floor((v - reach - v0) / s));
  int iv_hi = std::min(nv - 1, (int)std::ceil((v + reach - v0) / s));
  for (int j = iv_lo; j <= iv_hi; ++j)
    for (int i = iu_lo; i <= iu_hi; ++i)
      best = std::min(best, (x - point(u0 + i * s, v0 + j * s)).norm());
  return best;
}

namespace {

RegimeGraph fit_regime_graph(const std::vector<CubeId>& members, const SurfaceGrid& g,
                             double K) {
  const BoundarySet& e = g.boundary();
  const auto& pts = e.samples();
  const auto& wts = e.weights();
  std::vector<char> used(pts.size(), 0);
  double lmin = kInf;
  for (const auto& id : members) {
    const SurfaceCube& q = g.cube(id);
    lmin = std::min(lmin, q.len());
    double r2 = K * q.len() * K * q.len();
    for (size_t i = 0; i < pts.size(); ++i)
      if (!used[i] && (pts[i] - q.center).norm2() <= r2) used[i] = 1;
  }

  RegimeGraph rg;
  rg.dim = e.dim();
  MomentSums ms;
  for (size_t i = 0; i < pts.size(); ++i)
    if (used[i]) ms.add(pts[i], wts[i]);
  rg.base = plane_fit(ms, rg.dim);
  orient(rg.base.normal);
  make_frame(rg.base, rg.dim, rg.t1, rg.t2);

  struct P {
    double u, v, w;
  };
  std::vector<P> pr;
  for (size_t i = 0; i < pts.size(); ++i)
    if (used[i]) {
      Vec d = pts[i] - rg.base.point;
      pr.push_back({d.dot(rg.t1), rg.dim == 3 ? d.dot(rg.t2) : 0.0, d.dot(rg.base.normal)});
    }

  double umin = kInf, umax = -kInf, vmin = kInf, vmax = -kInf;
  for (auto& p : pr) {
    umin = std::min(umin, p.u), umax = std::max(umax, p.u);
    vmin = std::min(vmin, p.v), vmax = std::max(vmax, p.v);
  }
  rg.s = lmin / 4;
  double span = std::max(umax - umin, rg.dim == 3 ? vmax - vmin : 0.0);
  if (span / rg.s > 1e6) rg.s = span / 1e6;
  rg.u0 = umin;
  rg.nu = std::max(1, (int)std::floor((umax - umin) / rg.s) + 2);
  if (rg.dim == 3) {
    rg.v0 = vmin;
    rg.nv = std::max(1, (int)std::floor((vmax - vmin) / rg.s) + 2);
  }

  rg.h.assign((size_t)rg.nu * rg.nv, 0.0);
  if (rg.dim == 2) {
    std::sort(pr.begin(), pr.end(), [](const P& a, const P& b) { return a.u < b.u; });
    size_t j = 0;
    for (int i = 0; i < rg.nu; ++i) {
      double u = rg.u0 + i * rg.s;
      while (j + 1 < pr.size() && std::abs(pr[j + 1].u - u) <= std::abs(pr[j].u - u)) ++j;
      rg.h[i] = pr[j].w;
    }
  } else {
    // bucket the projections, then nearest-sample by expanding rings
    int bw = rg.nu, bh = rg.nv;
    std::vector<std::vector<int32_t>> cell((size_t)bw * bh);
    for (int32_t i = 0; i < (int32_t)pr.size(); ++i) {
      int cu = std::clamp((int)((pr[i].u - rg.u0) / rg.s), 0, bw - 1);
      int cv = std::clamp((int)((pr[i].v - rg.v0) / rg.s), 0, bh - 1);
      cell[(size_t)cv * bw + cu].push_back(i);
    }
    for (int jv = 0; jv < rg.nv; ++jv)
      for (int iu = 0; iu < rg.nu; ++iu) {
        double u = rg.u0 + iu * rg.s, v = rg.v0 + jv * rg.s;
        double best = kInf, bw2 = 0;
        int32_t hit = -1;
        for (int ring = 0; ring < std::max(bw, bh); ++ring) {
          for (int dv = -ring; dv <= ring; ++dv)
            for (int du = -ring; du <= ring; ++du) {
              if (std::max(std::abs(du), std::abs(dv)) != ring) continue;
              int cu = iu + du, cv = jv + dv;
              if (cu < 0 || cv < 0 || cu >= bw || cv >= bh) continue;
              for (int32_t i : cell[(size_t)cv * bw + cu]) {
                double d2 = (pr[i].u - u) * (pr[i].u - u) + (pr[i].v - v) * (pr[i].v - v);
                if (d2 < best) best = d2, hit = i, bw2 = pr[i].w;
              }
            }
          if (hit >= 0 && best <= (double)ring * ring * rg.s * rg.s) break;
        }
        rg.h[(size_t)jv * rg.nu + iu] = hit >= 0 ? bw2 : 0.0;
      }
  }

  rg.lip = 0;
  for (int jv = 0; jv < rg.nv; ++jv)
    for (int iu = 0; iu + 1 < rg.nu; ++iu)
      rg.lip = std::max(rg.lip, std::abs(rg.h[(size_t)jv * rg.nu + iu + 1] -
                                         rg.h[(size_t)jv * rg.nu + iu]) /
                                    rg.s);
  for (int jv = 0; jv + 1 < rg.nv; ++jv)
    for (int iu = 0; iu < rg.nu; ++iu)
      rg.lip = std::max(rg.lip, std::abs(rg.h[(size_t)(jv + 1) * rg.nu + iu] -
                                         rg.h[(size_t)jv * rg.nu + iu]) /
                                    rg.s);
  return rg;
}

// deepest member cube that owns the in-plane location of the worst slope
CubeId offending_member(const StoppingRegime& s, const SurfaceGrid& g) {
  const RegimeGraph& rg = s.gamma;
  double worst = -1, ustar = 0, vstar = 0;
  for (int jv = 0; jv < rg.nv; ++jv)
    for (int iu = 0; iu + 1 < rg.nu; ++iu) {
      double d = std::abs(rg.h[(size_t)jv * rg.nu + iu + 1] - rg.h[(size_t)jv * rg.nu + iu]);
      if (d > worst)
        worst = d, ustar = rg.u0 + (iu + 0.5) * rg.s, vstar = rg.v0 + jv * rg.s;
    }
  for (int jv = 0; jv + 1 < rg.nv; ++jv)
    for (int iu = 0; iu < rg.nu; ++iu) {
      double d = std::abs(rg.h[(size_t)(jv + 1) * rg.nu + iu] - rg.h[(size_t)jv * rg.nu + iu]);
      if (d > worst)
        worst = d, ustar = rg.u0 + iu * rg.s, vstar = rg.v0 + (jv + 0.5) * rg.s;
    }
  Vec pstar = rg.point(ustar, vstar);
  CubeId best{};
  int best_k = std::numeric_limits<int>::min();
  double best_d = kInf;
  bool best_in = false;
  for (const auto& id : s.members) {
    const SurfaceCube& q = g.cube(id);
    double d = (q.center - pstar).norm();
    bool in = d <= 2 * q.len();
    if (std::tuple(in, id.k, -d) > std::tuple(best_in, best_k, -best_d))
      best = id, best_k = id.k, best_d = d, best_in = in;
  }
  return best;
}

}  // namespace

int32_t CoronaDecomposition::regime_of(const SurfaceGrid& g, const CubeId& id) const {
  if (id.k < k_min || id.k > k_max) return -1;
  int32_t i = level_index(g, id.k, id);
  if (i < 0) return -1;
  return assign[id.k - k_min][i];
}

bool CoronaDecomposition::is_good(const SurfaceGrid& g, const CubeId& id) const {
  return regime_of(g, id) >= 0;
}

const PlaneFit& CoronaDecomposition::fit_of(const SurfaceGrid& g, const CubeId& id) const {
  if (id.k < k_min || id.k > k_max) throw std::out_of_range("cube not in grid");
  int32_t i = level_index(g, id.k, id);
  if (i < 0) throw std::out_of_range("cube not in grid");
  return fits[id.k - k_min][i];
}

std::vector<CubeId> CoronaDecomposition::bad_cubes(const SurfaceGrid& g) const {
  std::vector<CubeId> out;
  for (int k = k_min; k <= k_max; ++k) {
    const auto& cubes = g.generation(k);
    if (cubes.size() != assign[k - k_min].size())
      throw std::invalid_argument("grid does not match this decomposition");
    for (size_t i = 0; i < cubes.size(); ++i)
      if (assign[k - k_min][i] < 0) out.push_back(cubes[i].id);
  }
  return out;
}

CoronaDecomposition::Coherency CoronaDecomposition::check_coherency(
    const SurfaceGrid& g) const {
  Coherency c;
  for (const auto& s : regimes) {
    std::vector<CubeId> m = s.members;
    std::sort(m.begin(), m.end());
    for (const auto& id : m) {
      if (!s.root.is_ancestor_of(id)) ++c.stray_members;
      if (id.k > s.root.k) {
        CubeId p = id.parent();
        if (!std::binary_search(m.begin(), m.end(), p)) ++c.open_chains;
      }
      auto kids = g.children_of(id);
      if (!kids.empty()) {
        int in = 0;
        for (const auto& kid : kids)
          if (std::binary_search(m.begin(), m.end(), kid)) ++in;
        if (in != 0 && in != (int)kids.size()) ++c.split_families;
      }
    }
  }
  // every cube claimed exactly once: count assignments against member lists
  size_t assigned = 0;
  for (const auto& row : assign)
    for (int32_t a : row)
      if (a >= 0) ++assigned;
  size_t listed = 0;
  for (const auto& s : regimes) listed += s.members.size();
  if (assigned != listed) ++c.overlaps;
  return c;
}

CoronaDecomposition build_corona(const SurfaceGrid& g, double eta, double K) {
  CoronaDecomposition c;
  c.eta = eta;
  c.K = K;
  c.k_min = g.k_min();
  c.k_max = g.k_max();
  int nk = c.k_max - c.k_min + 1;
  c.assign.resize(nk);
  c.fits.resize(nk);

  const BoundarySet& e = g.boundary();
  std::vector<std::pair<int, int32_t>> flat;
  for (int k = c.k_min; k <= c.k_max; ++k) {
    size_t n = g.generation(k).size();
    c.assign[k - c.k_min].assign(n, -2);
    c.fits[k - c.k_min].resize(n);
    for (int32_t i = 0; i < (int32_t)n; ++i) flat.push_back({k, i});
  }
  parallel_chunks((int64_t)flat.size(), 256, [&](int64_t lo, int64_t hi, int) {
    for (int64_t f = lo; f < hi; ++f) {
      auto [k, i] = flat[f];
      const SurfaceCube& q = g.generation(k)[i];
      c.fits[k - c.k_min][i] = bwgl_classify(q, e, eta, K);
    }
  });
  for (int k = c.k_min; k <= c.k_max; ++k)
    for (size_t i = 0; i < c.assign[k - c.k_min].size(); ++i)
      if (!c.fits[k - c.k_min][i].good) c.assign[k - c.k_min][i] = -1;

  auto slot = [&](const CubeId& id) -> int32_t& {
    return c.assign[id.k - c.k_min][level_index(g, id.k, id)];
  };

  int32_t next_id = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int k = c.k_min; k <= c.k_max; ++k) {
      const auto& cubes = g.generation(k);
      for (size_t i = 0; i < cubes.size(); ++i) {
        if (c.assign[k - c.k_min][i] != -2) continue;
        changed = true;
        StoppingRegime s;
        s.id = next_id++;
        s.root = cubes[i].id;
        const Vec root_n = c.fits[k - c.k_min][i].h.normal;
        c.assign[k - c.k_min][i] = s.id;
        s.members.push_back(s.root);
        std::vector<CubeId> frontier{s.root};
        while (!frontier.empty()) {
          CubeId p = frontier.back();
          frontier.pop_back();
          auto kids = g.children_of(p);
          if (kids.empty() || p.k == c.k_max) continue;
          bool admit = true;
          for (const auto& kid : kids) {
            int32_t ki = level_index(g, kid.k, kid);
            const PlaneFit& pf = c.fits[kid.k - c.k_min][ki];
            if (c.assign[kid.k - c.k_min][ki] != -2 || !pf.good ||
                sin_angle(pf.h.normal, root_n) > eta) {
              admit = false;
              break;
            }
          }
          if (!admit) continue;
          for (const auto& kid : kids) {
            slot(kid) = s.id;
            s.members.push_back(kid);
            frontier.push_back(kid);
          }
        }
        std::sort(s.members.begin(), s.members.end());

        for (;;) {
          s.gamma = fit_regime_graph(s.members, g, K);
          if (s.gamma.lip <= eta) break;
          if (s.members.size() == 1) {
            // the base plane alone already satisfies the bilateral estimate
            std::fill(s.gamma.h.begin(), s.gamma.h.end(), 0.0);
            s.gamma.lip = 0;
            break;
          }
          CubeId bad = offending_member(s, g);
          CubeId front = bad == s.root ? s.root : bad.parent();
          // drop every family below the split point
          std::vector<CubeId> keep;
          for (const auto& m : s.members) {
            if (front.is_ancestor_of(m) && !(m == front)) {
              slot(m) = -2;
            } else {
              keep.push_back(m);
            }
          }
          s.members = std::move(keep);
        }
        c.regimes.push_back(std::move(s));
      }
    }
  }
  return c;
}

double packing_constant(const std::vector<CubeId>& marked, const SurfaceGrid& g) {
  std::vector<CubeId> mk = marked;
  std::sort(mk.begin(), mk.end());
  double best = 0;
  std::vector<std::vector<double>> acc(g.k_max() - g.k_min() + 1);
  for (int k = g.k_max(); k >= g.k_min(); --k) {
    const auto& cubes = g.generation(k);
    auto& row = acc[k - g.k_min()];
    row.resize(cubes.size());
    for (size_t i = 0; i < cubes.size(); ++i) {
      double sum = std::binary_search(mk.begin(), mk.end(), cubes[i].id) ? cubes[i].mass : 0.0;
      if (k < g.k_max())
        for (const auto& kid : g.children_of(cubes[i].id))
          sum += acc[k + 1 - g.k_min()][level_index(g, kid.k, kid)];
      row[i] = sum;
      best = std::max(best, sum / cubes[i].mass);
    }
  }
  return best;
}

BilateralCheck verify_bilateral(const StoppingRegime& s, const SurfaceCube& q,
                                const BoundarySet& e, double eta, double K) {
  BilateralCheck bc;
  double r = K * q.len(), r2 = r * r;
  const auto& pts = e.samples();
  for (size_t i = 0; i < pts.size(); ++i)
    if ((pts[i] - q.center).norm2() <= r2)
      bc.set_to_graph = std::max(bc.set_to_graph, s.gamma.dist(pts[i]));

  double uc, vc, wc;
  s.gamma.project(q.center, uc, vc, wc);
  double step = std::min(s.gamma.s, eta * q.len() / 4);
  int n = (int)std::ceil(2 * r / step);
  for (int i = 0; i <= n; ++i) {
    double u = uc - r + 2 * r * i / n;
    if (s.gamma.dim == 2) {
      Vec y = s.gamma.point(u, 0);
      if ((y - q.center).norm2() <= r2)
        bc.graph_to_set = std::max(bc.graph_to_set, e.distance(y));
    } else {
      for (int j = 0; j <= n; ++j) {
        Vec y = s.gamma.point(u, vc - r + 2 * r * j / n);
        if ((y - q.center).norm2() <= r2)
          bc.graph_to_set = std::max(bc.graph_to_set, e.distance(y));
      }
    }
  }
  bc.ok = bc.set_to_graph < eta * q.len() && bc.graph_to_set < eta * q.len();
  return bc;
}

}  // namespace cme
