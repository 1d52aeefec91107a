#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "cme/corona.hpp"

using namespace cme;

namespace {

// brute deficiency of a given plane: sample sup one way, dense lattice the other
double brute_deficiency(const BoundarySet& e, const Plane& h, const Vec& x, double r) {
  double a = 0;
  for (const Vec& p : e.samples())
    if ((p - x).norm() <= r) a = std::max(a, h.dist(p));
  Vec t{-h.normal.y, h.normal.x, 0};
  double b = 0;
  int n = 1024;
  for (int i = 0; i <= n; ++i) {
    Vec y = x - h.normal * h.signed_dist(x) + t * (-r + 2.0 * r * i / n);
    if ((y - x).norm() <= r) b = std::max(b, e.distance(y));
  }
  return a + b;
}

// best achievable deficiency over a dense family of line angles and offsets
double brute_inf_deficiency(const BoundarySet& e, const Vec& x, double r) {
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 120; ++a) {
    double th = a * M_PI / 120;
    Vec n{std::cos(th), std::sin(th), 0};
    double hmin = std::numeric_limits<double>::infinity(), hmax = -hmin;
    for (const Vec& p : e.samples())
      if ((p - x).norm() <= r) {
        double v = n.dot(p - x);
        hmin = std::min(hmin, v), hmax = std::max(hmax, v);
      }
    if (hmin > hmax) continue;
    Plane h{x + n * (0.5 * (hmin + hmax)), n};
    best = std::min(best, brute_deficiency(e, h, x, r));
  }
  return best;
}

// reference stopping-time construction, recursive instead of pass-driven
struct RefCorona {
  std::map<CubeId, int> regime;
  int count = 0;
};

void ref_descend(const SurfaceGrid& g, const CoronaDecomposition& c, RefCorona& out,
                 const CubeId& q, int id, const Vec& root_n, double eta) {
  out.regime[q] = id;
  auto kids = g.children_of(q);
  if (kids.empty()) return;
  for (const auto& kid : kids) {
    const PlaneFit& pf = c.fit_of(g, kid);
    double cs = std::min(1.0, std::abs(pf.h.normal.dot(root_n)));
    if (!pf.good || std::sqrt(1 - cs * cs) > eta) return;
  }
  for (const auto& kid : kids) ref_descend(g, c, out, kid, id, root_n, eta);
}

RefCorona ref_corona(const SurfaceGrid& g, const CoronaDecomposition& c, double eta) {
  RefCorona out;
  for (int k = g.k_min(); k <= g.k_max(); ++k)
    for (const auto& q : g.generation(k)) {
      if (out.regime.count(q.id) || !c.fit_of(g, q.id).good) continue;
      ref_descend(g, c, out, q.id, out.count++, c.fit_of(g, q.id).h.normal, eta);
    }
  return out;
}

std::vector<CubeId> roots_and_bad(const CoronaDecomposition& c, const SurfaceGrid& g) {
  std::vector<CubeId> m = c.bad_cubes(g);
  for (const auto& s : c.regimes) m.push_back(s.root);
  return m;
}

}  // namespace

TEST_CASE("flat line: one regime, no bad cubes, zero deficiency") {
  // window [0,8] sits inside the single dyadic cube [0,8) at the top level
  auto e = BoundarySet::flat_line_window(0.0, 8.0, 1.0 / 32);
  SurfaceGrid g(e, -3, 2);
  double eta = 1.0 / 16, K = 8;
  for (int k = -3; k <= 2; k += 5)
    for (const auto& q : g.generation(k)) {
      PlaneFit pf = bwgl_classify(q, e, eta, K);
      CHECK(pf.good);
      CHECK(pf.deficiency == doctest::Approx(0.0).epsilon(1e-12));
    }
  auto c = build_corona(g, eta, K);
  REQUIRE(c.regimes.size() == 1);
  CHECK(c.bad_cubes(g).empty());
  CHECK(c.regimes[0].members.size() == g.cube_count());
  CHECK(c.regimes[0].gamma.lip == 0.0);
  CHECK(c.check_coherency(g).ok());

  for (const auto& q : g.generation(0)) {
    auto bc = verify_bilateral(c.regimes[0], q, e, eta, K);
    CHECK(bc.ok);
    CHECK(bc.set_to_graph == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(bc.graph_to_set == doctest::Approx(0.0).epsilon(1e-12));
  }
  CHECK(packing_constant(roots_and_bad(c, g), g) == doctest::Approx(1.0));
}

TEST_CASE("gentle lipschitz graph: every cube good") {
  std::vector<Vec> knots;
  for (int i = -8; i <= 8; ++i) knots.push_back({i * 0.5, 0.005 * (std::abs(i) % 2), 0});
  auto e = BoundarySet::lipschitz_graph(knots, 4.0, 1.0 / 256);
  REQUIRE(e.lipschitz_bound() <= 0.011);
  SurfaceGrid g(e, 0, 4);
  double eta = 0.1, K = 4;
  for (int k = 0; k <= 4; ++k)
    for (const auto& q : g.generation(k)) {
      PlaneFit pf = bwgl_classify(q, e, eta, K);
      CHECK(pf.good);
      // independent evaluation of the same plane
      double ref = brute_deficiency(e, pf.h, q.center, K * q.len());
      CHECK(pf.deficiency == doctest::Approx(ref).epsilon(0.05).scale(eta * q.len() * 0.01));
    }
}

TEST_CASE("four-corner cantor: coarse cubes bad, flags match the plane-family oracle") {
  auto e = BoundarySet::cantor_four_corners(4, 2);
  SurfaceGrid g(e, 0, 3);
  double eta = 1.0 / 16, K = 8;
  for (int k = 0; k <= 3; ++k)
    for (const auto& q : g.generation(k)) {
      PlaneFit pf = bwgl_classify(q, e, eta, K);
      CHECK(!pf.good);
      double inf_def = brute_inf_deficiency(e, q.center, K * q.len());
      CHECK((inf_def < eta * q.len()) == pf.good);
      // the fitted plane cannot beat the family infimum by construction
      CHECK(pf.deficiency >= inf_def * 0.95);
    }
}

TEST_CASE("sawtooth graph corona: regimes match the recursive reference") {
  std::vector<Vec> knots;
  for (int i = -4; i <= 4; ++i) knots.push_back({(double)i, 0.05 * (std::abs(i) % 2), 0});
  auto e = BoundarySet::lipschitz_graph(knots, 4.0, 1.0 / 256);
  REQUIRE(e.lipschitz_bound() == doctest::Approx(0.05));
  SurfaceGrid g(e, 0, 6);
  double eta = 0.2, K = 2;
  auto c = build_corona(g, eta, K);
  CHECK(c.check_coherency(g).ok());

  // G plus B covers the grid exactly once
  size_t members = 0;
  for (const auto& s : c.regimes) members += s.members.size();
  CHECK(members + c.bad_cubes(g).size() == g.cube_count());

  CHECK(c.regimes.size() >= 1);
  CHECK(c.regimes.size() <= 9);

  auto ref = ref_corona(g, c, eta);
  CHECK(ref.count == (int)c.regimes.size());
  std::map<int32_t, int> match;
  size_t agreed = 0;
  for (const auto& s : c.regimes)
    for (const auto& id : s.members) {
      auto it = ref.regime.find(id);
      REQUIRE(it != ref.regime.end());
      auto ins = match.emplace(s.id, it->second);
      if (ins.first->second == it->second) ++agreed;
    }
  CHECK(agreed == members);

  // regime graphs stay within the configured slope budget
  for (const auto& s : c.regimes) CHECK(s.gamma.lip <= eta);

  // the bilateral estimate holds for every member of every regime
  for (const auto& s : c.regimes)
    for (const auto& id : s.members) {
      auto bc = verify_bilateral(s, g.cube(id), e, eta, K);
      CHECK(bc.ok);
    }
}

TEST_CASE("corrupted regime graph is caught by the bilateral check") {
  auto e = BoundarySet::flat_line_window(0.0, 8.0, 1.0 / 32);
  SurfaceGrid g(e, -3, 2);
  double eta = 1.0 / 16, K = 8;
  auto c = build_corona(g, eta, K);
  REQUIRE(c.regimes.size() == 1);
  StoppingRegime s = c.regimes[0];
  const SurfaceCube& q = g.generation(2)[3];
  for (auto& h : s.gamma.h) h += 2 * eta * q.len();
  auto bc = verify_bilateral(s, q, e, eta, K);
  CHECK(!bc.ok);
  CHECK(bc.set_to_graph >= 2 * eta * q.len() * 0.99);
}

TEST_CASE("deficiency is invariant under rigid motions") {
  std::vector<Vec> v1{{0, 0, 0}, {1, 0.05, 0}, {2, -0.03, 0}, {3, 0.01, 0}};
  auto e1 = BoundarySet::polyline(v1, 1.0 / 256);
  Vec c1{1.5, 0.0, 0};
  double th = 0.7;
  Vec t{0.3, -0.2, 0};
  auto rot = [&](const Vec& p) {
    return Vec{p.x * std::cos(th) - p.y * std::sin(th) + t.x,
               p.x * std::sin(th) + p.y * std::cos(th) + t.y, 0};
  };
  std::vector<Vec> v2;
  for (const Vec& p : v1) v2.push_back(rot(p));
  auto e2 = BoundarySet::polyline(v2, 1.0 / 256);

  PlaneFit a = bwgl_classify_ball(e1, c1, 0.5, 0.1, 2.0);
  PlaneFit b = bwgl_classify_ball(e2, rot(c1), 0.5, 0.1, 2.0);
  CHECK(a.deficiency == doctest::Approx(b.deficiency).epsilon(1e-6));
  CHECK(a.good == b.good);
}

TEST_CASE("packing constant: telescoping and stability") {
  auto seg = BoundarySet::polyline({{0, 0, 0}, {1, 0, 0}}, 1.0 / 512);
  SurfaceGrid g(seg, 0, 6);
  CHECK(packing_constant({}, g) == 0.0);
  std::vector<CubeId> all;
  for (int k = 0; k <= 6; ++k)
    for (const auto& q : g.generation(k)) all.push_back(q.id);
  CHECK(packing_constant(all, g) == doctest::Approx(7.0).epsilon(1e-12));

  // cantor: every cube is bad at these depths, so the ledger grows by one
  // sigma-level per added generation and stays within 20 percent
  auto e = BoundarySet::cantor_four_corners(6, 2);
  double eta = 1.0 / 16, K = 8;
  SurfaceGrid g1(e, 0, 10);
  auto c1 = build_corona(g1, eta, K);
  double p1 = packing_constant(roots_and_bad(c1, g1), g1);
  SurfaceGrid g2(e, 0, 12);
  auto c2 = build_corona(g2, eta, K);
  double p2 = packing_constant(roots_and_bad(c2, g2), g2);
  CHECK(std::isfinite(p1));
  CHECK(std::isfinite(p2));
  CHECK(p1 > 0);
  CHECK(std::abs(p2 - p1) <= 0.2 * p1);
}

TEST_CASE("packing of stops is monotone in eta") {
  std::vector<Vec> knots;
  for (int i = -4; i <= 4; ++i) knots.push_back({(double)i, 0.05 * (std::abs(i) % 2), 0});
  auto e = BoundarySet::lipschitz_graph(knots, 4.0, 1.0 / 256);
  SurfaceGrid g(e, 0, 5);
  double K = 4;
  double prev = std::numeric_limits<double>::infinity();
  for (double eta : {0.05, 0.1, 0.2}) {
    auto c = build_corona(g, eta, K);
    double p = packing_constant(roots_and_bad(c, g), g);
    CHECK(p <= prev + 1e-9);
    prev = p;
  }
}
