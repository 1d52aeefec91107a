#include "cme/geometry.hpp"

#include <cstdio>
#include <cstdlib>

namespace cme {

int thread_count() {
  static int cached = [] {
    if (const char* env = std::getenv("CME_THREADS")) {
      int v = std::atoi(env);
      if (v >= 1) return std::min(v, 256);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return (int)std::max(1u, std::min(hw, 8u));
  }();
  return cached;
}

void parallel_chunks(int64_t n, int64_t chunk,
                     const std::function<void(int64_t, int64_t, int)>& fn) {
  if (n <= 0) return;
  chunk = std::max<int64_t>(1, chunk);
  int64_t nchunks = (n + chunk - 1) / chunk;
  int nt = std::min<int64_t>(thread_count(), nchunks);
  if (nt <= 1) {
    for (int64_t c = 0; c < nchunks; ++c)
      fn(c * chunk, std::min(n, (c + 1) * chunk), (int)c);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (int t = 0; t < nt; ++t) {
    pool.emplace_back([&, t] {
      for (int64_t c = t; c < nchunks; c += nt)
        fn(c * chunk, std::min(n, (c + 1) * chunk), (int)c);
    });
  }
  for (auto& th : pool) th.join();
}

double parallel_sum(int64_t n, const std::function<double(int64_t)>& term) {
  if (n <= 0) return 0.0;
  const int64_t chunk = 1 << 14;
  int64_t nchunks = (n + chunk - 1) / chunk;
  std::vector<double> partial(nchunks, 0.0);
  parallel_chunks(n, chunk, [&](int64_t i0, int64_t i1, int c) {
    double acc = 0;
    for (int64_t i = i0; i < i1; ++i) acc += term(i);
    partial[c] = acc;
  });
  double total = 0;
  for (double p : partial) total += p;  // fixed chunk order keeps bits stable
  return total;
}

std::array<double, 2> sym2_eigen(double a, double b, double c, Vec* vmin) {
  double tr = a + c, det = a * c - b * b;
  double disc = std::sqrt(std::max(0.0, tr * tr / 4 - det));
  double lmin = tr / 2 - disc, lmax = tr / 2 + disc;
  if (vmin) {
    Vec v;
    // (A - lmax I) maps everything onto the lmin eigenspace
    Vec r0{a - lmax, b, 0}, r1{b, c - lmax, 0};
    v = r0.norm2() >= r1.norm2() ? r0 : r1;
    if (v.norm2() == 0) v = {1, 0, 0};
    v = normalized(v);
    if (v.x < 0 || (v.x == 0 && v.y < 0)) v = v * -1.0;
    *vmin = v;
  }
  return {lmin, lmax};
}

std::array<double, 3> sym3_eigen(const std::array<double, 6>& u, Vec* vmin) {
  // u = {a00,a01,a02,a11,a12,a22}
  double A[3][3] = {{u[0], u[1], u[2]}, {u[1], u[3], u[4]}, {u[2], u[4], u[5]}};
  double V[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (int sweep = 0; sweep < 24; ++sweep) {
    double off = std::abs(A[0][1]) + std::abs(A[0][2]) + std::abs(A[1][2]);
    if (off < 1e-15 * (std::abs(A[0][0]) + std::abs(A[1][1]) + std::abs(A[2][2]) + 1e-300))
      break;
    for (int p = 0; p < 2; ++p)
      for (int q = p + 1; q < 3; ++q) {
        if (A[p][q] == 0) continue;
        double theta = (A[q][q] - A[p][p]) / (2 * A[p][q]);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1));
        double cth = 1 / std::sqrt(t * t + 1), sth = t * cth;
        for (int r = 0; r < 3; ++r) {
          double arp = A[r][p], arq = A[r][q];
          A[r][p] = cth * arp - sth * arq;
          A[r][q] = sth * arp + cth * arq;
        }
        for (int r = 0; r < 3; ++r) {
          double apr = A[p][r], aqr = A[q][r];
          A[p][r] = cth * apr - sth * aqr;
          A[q][r] = sth * apr + cth * aqr;
        }
        for (int r = 0; r < 3; ++r) {
          double vrp = V[r][p], vrq = V[r][q];
          V[r][p] = cth * vrp - sth * vrq;
          V[r][q] = sth * vrp + cth * vrq;
        }
      }
  }
  std::array<double, 3> ev = {A[0][0], A[1][1], A[2][2]};
  int imin = 0;
  if (ev[1] < ev[imin]) imin = 1;
  if (ev[2] < ev[imin]) imin = 2;
  if (vmin) {
    Vec v{V[0][imin], V[1][imin], V[2][imin]};
    v = normalized(v);
    if (v.x < 0 || (v.x == 0 && (v.y < 0 || (v.y == 0 && v.z < 0)))) v = v * -1.0;
    *vmin = v;
  }
  std::sort(ev.begin(), ev.end());
  return ev;
}

std::string format_double(double v) {
  if (v == 0.0) v = 0.0;  // normalize -0
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace cme
