#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "cme/grid.hpp"

using namespace cme;

TEST_CASE("unit segment: counts and masses per generation") {
  auto e = BoundarySet::polyline({{0, 0, 0}, {1, 0, 0}}, 1.0 / 64);
  SurfaceGrid g(e, 0, 3);
  for (int k = 0; k <= 3; ++k) {
    const auto& gen = g.generation(k);
    CHECK((int)gen.size() == (1 << k));
    for (auto& q : gen) CHECK(q.mass == doctest::Approx(ipow2(-k)).epsilon(1e-12));
  }
  // generation coverage: sample ranges tile [0, N)
  for (int k = 0; k <= 3; ++k) {
    int64_t covered = 0;
    for (auto& q : g.generation(k)) covered += q.end - q.begin;
    CHECK(covered == (int64_t)e.samples().size());
  }
}

TEST_CASE("mass additivity is exact") {
  auto e = BoundarySet::cantor_four_corners(4, 2);
  SurfaceGrid g(e, 0, 7);
  for (int k = 0; k < 7; ++k) {
    for (auto& q : g.generation(k)) {
      double s = 0;
      for (auto& cid : g.children_of(q.id)) s += g.cube(cid).mass;
      CHECK(q.mass == s);  // bitwise, by construction
    }
  }
  // independent bucket sums agree to 1e-12 relative
  const auto& pts = e.samples();
  const auto& wts = e.weights();
  for (int k : {0, 3, 6}) {
    for (auto& q : g.generation(k)) {
      double direct = 0;
      for (size_t i = 0; i < pts.size(); ++i)
        if (q.id.box(2).contains(pts[i])) direct += wts[i];
      CHECK(q.mass == doctest::Approx(direct).epsilon(1e-12));
    }
  }
}

TEST_CASE("four-corner cantor: self-similar cube counts") {
  int gen = 4;
  auto e = BoundarySet::cantor_four_corners(gen, 2);
  SurfaceGrid g(e, 0, 2 * gen);

  // counting oracle: enumerate the 4^j construction squares at scale 4^-j
  // and collect the distinct dyadic ids containing their sample points
  for (int j = 0; j <= gen; ++j) {
    std::set<CubeId> ids;
    for (auto& p : e.samples()) ids.insert(cube_containing(p, 2 * j));
    CHECK((int)ids.size() == 1 << (2 * j));  // 4^j at depth 4^-j
    CHECK(g.generation(2 * j).size() == ids.size());
  }
  // odd dyadic depths: each square splits across 4 boxes one level up
  for (int j = 0; j < gen; ++j) {
    std::set<CubeId> ids;
    for (auto& p : e.samples()) ids.insert(cube_containing(p, 2 * j + 1));
    CHECK(g.generation(2 * j + 1).size() == ids.size());
    CHECK((int)ids.size() == 1 << (2 * (j + 1)));
  }
}

TEST_CASE("unit circle: generation masses sum to the full measure") {
  auto e = BoundarySet::circle({0.5, 0.5, 0}, 1.0, 1.0 / 256);
  SurfaceGrid g(e, 0, 2);
  for (int k = 0; k <= 2; ++k) {
    double s = 0;
    for (auto& q : g.generation(k)) s += q.mass;
    CHECK(s == doctest::Approx(2 * M_PI).epsilon(0.01));
  }
}

TEST_CASE("nesting: containment or disjointness, exact on ids") {
  auto e = BoundarySet::cantor_four_corners(3, 2);
  SurfaceGrid g(e, 0, 6);
  Rng rng(13);
  std::vector<SurfaceCube> all;
  for (int k = 0; k <= 6; ++k)
    for (auto& q : g.generation(k)) all.push_back(q);
  for (int t = 0; t < 4000; ++t) {
    const auto& a = all[(size_t)rng.uniform_int((int64_t)all.size())];
    const auto& b = all[(size_t)rng.uniform_int((int64_t)all.size())];
    if (a.id.k > b.id.k) continue;
    bool anc = a.id.is_ancestor_of(b.id);
    // geometric double-check on the boxes
    Box ab = a.id.box(2), bb = b.id.box(2);
    if (anc) {
      CHECK(ab.contains(bb.center()));
    } else {
      CHECK(!ab.overlaps_open(bb));
    }
  }
}

TEST_CASE("cube diameters and surface-ball radii") {
  auto e = BoundarySet::cantor_four_corners(4, 2);
  SurfaceGrid g(e, 0, 8);
  const auto& pts = e.samples();
  double c1 = 0, a0 = 1e30;
  for (int k = 0; k <= 8; ++k) {
    for (auto& q : g.generation(k)) {
      CHECK(q.bbox_diam <= std::sqrt(2.0) * q.len() * (1 + 1e-12));
      c1 = std::max(c1, q.bbox_diam / q.len());
      CHECK(q.r_outer <= std::sqrt(2.0) * q.len() * (1 + 1e-12));
      if (std::isfinite(q.r_inner)) {
        CHECK(q.r_inner > 0);
        a0 = std::min(a0, q.r_inner / q.len());
      }
    }
  }
  CHECK(c1 > 0);
  CHECK(a0 > 0);

  // brute-force check of the radii on one mid-depth generation
  for (auto& q : g.generation(4)) {
    Box b = q.id.box(2);
    double inner = 1e30, outer = 0;
    for (auto& p : pts) {
      double d = (p - q.center).norm();
      if (b.contains(p)) {
        outer = std::max(outer, d);
      } else {
        inner = std::min(inner, d);
      }
    }
    CHECK(q.r_outer == doctest::Approx(outer));
    if (std::isfinite(q.r_inner)) CHECK(q.r_inner == doctest::Approx(inner));
    // ball(center, r_inner) cap E lies inside Q; Q lies in ball(center, r_outer)
    for (auto& p : pts) {
      double d = (p - q.center).norm();
      if (d < q.r_inner * (1 - 1e-12)) CHECK(b.contains(p));
      if (b.contains(p)) CHECK(d <= q.r_outer * (1 + 1e-12));
    }
  }
}

TEST_CASE("surface ball mass wrapper") {
  auto line = BoundarySet::flat_line(4.0, 1.0 / 256);
  CHECK(surface_ball_mass(line, {0.5, 0, 0}, 0.25) ==
        doctest::Approx(0.5).epsilon(0.02));
  CHECK_THROWS_AS(surface_ball_mass(line, {0.5, 0.5, 0}, 0.25), std::domain_error);

  auto circ = BoundarySet::circle({0, 0, 0}, 1.0, 1.0 / 256);
  CHECK(surface_ball_mass(circ, {1, 0, 0}, 2.0) == doctest::Approx(2 * M_PI).epsilon(1e-9));

  auto cant = BoundarySet::cantor_four_corners(4, 2);
  Vec corner = cant.samples()[0];
  double brute = 0;
  for (size_t i = 0; i < cant.samples().size(); ++i)
    if ((cant.samples()[i] - corner).norm2() <= 0.25 * 0.25) brute += cant.weights()[i];
  CHECK(surface_ball_mass(cant, corner, 0.25) == doctest::Approx(brute));
}

TEST_CASE("grid dump is deterministic and complete") {
  auto e = BoundarySet::cantor_four_corners(3, 2);
  SurfaceGrid g(e, 0, 4);
  std::ostringstream a, b;
  g.dump(a);
  g.dump(b);
  CHECK(a.str() == b.str());
  size_t rows = 0;
  for (char c : a.str())
    if (c == '\n') ++rows;
  CHECK(rows == g.cube_count() + 1);
}

TEST_CASE("construction errors") {
  auto e = BoundarySet::polyline({{0, 0, 0}, {1, 0, 0}}, 1.0 / 16);
  CHECK_THROWS(SurfaceGrid(e, 3, 1));
  // far-too-coarse k_min on a bounded set is rejected
  auto c = BoundarySet::circle({0, 0, 0}, 0.01, 1.0 / 1024);
  CHECK_THROWS(SurfaceGrid(c, -20, 2));
}

TEST_CASE("adr report records per-scale envelopes") {
  auto line = BoundarySet::flat_line(8.0, 1.0 / 64);
  auto rep = verify_adr(line, {});
  CHECK(rep.pass);
  REQUIRE(!rep.scales.empty());
  for (auto& s : rep.scales) {
    if (!std::isfinite(s.min_ratio)) continue;  // no trial landed in this bucket
    CHECK(s.min_ratio == doctest::Approx(2.0));
    CHECK(s.max_ratio == doctest::Approx(2.0));
    CHECK(s.r > 0);
  }
}
