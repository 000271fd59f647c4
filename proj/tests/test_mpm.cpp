#include "doctest.h"

#include <cstring>
#include <numeric>

#include "core/scene.hpp"
#include "core/sim.hpp"
#include "oracles.hpp"

using namespace plastisim;

namespace {

template <class T>
SimParams<T> desk_params(int n) {
  SimParams<T> prm;
  prm.n = n;
  prm.finalize();
  return prm;
}

template <class T>
void make_block(const SimParams<T>& prm, Particles<T>& ps, Vec3<T> lo, Vec3<T> hi) {
  Volume<T> box;
  box.kind = VolKind::Box;
  box.a = lo;
  box.b = hi;
  sample_volumes(prm, {box}, {}, ps);
}

template <class T>
T total_grid_mass(const Grid<T>& g) {
  T s = 0;
  for (T m : g.m) s += m;
  return s;
}

template <class T>
Vec3<T> total_grid_momentum(const Grid<T>& g) {
  Vec3<T> s{};
  for (const auto& v : g.v) s += v;
  return s;
}

template <class T>
Vec3<T> total_particle_momentum(const SimParams<T>& prm, const Particles<T>& ps) {
  Vec3<T> s{};
  for (const auto& v : ps.v) s += v;
  return prm.p_mass * s;
}

// Matrix log of an SPD matrix near identity by the Mercator series:
// log(I + E) = E - E^2/2 + E^3/3 - ...  Converges fast for the small
// deformations used in the reference-oracle test.
Mat3d logm_series(const Mat3d& A) {
  Mat3d E = A - Mat3d::identity();
  Mat3d term = E, out = E;
  for (int k = 2; k < 40; k++) {
    term = term * E;
    out += (k % 2 == 0 ? -1.0 / k : 1.0 / k) * term;
  }
  return out;
}

}  // namespace

TEST_CASE("p2g: single particle at a node center splats mass by weights") {
  auto prm = desk_params<double>(16);
  Particles<double> ps;
  ps.resize(1);
  ps.x[0] = {0.5, 0.5, 0.5};  // exactly on node (8,8,8)
  Grid<double> grid;
  grid.resize(prm.n);
  p2g(prm, ps, grid);
  CHECK(total_grid_mass(grid) == doctest::Approx(prm.p_mass).epsilon(1e-12));
  // On-node weights are (1/8, 3/4, 1/8) per axis; the center node gets
  // (3/4)^3 of the mass.
  CHECK(grid.m[grid.idx(8, 8, 8)] ==
        doctest::Approx(prm.p_mass * 0.421875).epsilon(1e-12));
  CHECK(max_abs(total_grid_momentum(grid)) < 1e-18);
}

TEST_CASE("p2g conserves mass and momentum (stress-free and stressed)") {
  auto prm = desk_params<double>(16);
  Particles<double> ps;
  make_block(prm, ps, Vec3<double>{0.4, 0.4, 0.4}, Vec3<double>{0.55, 0.5, 0.5});
  oracle::Rng rng(61);
  for (auto& v : ps.v) v = rng.vec3(-1, 1);
  SUBCASE("rest deformation") {}
  SUBCASE("random deformation and affine state") {
    for (auto& F : ps.F)
      F = Mat3d::identity() + 0.02 * rng.mat3();
    for (auto& C : ps.C) C = 2.0 * rng.mat3();
  }
  Grid<double> grid;
  grid.resize(prm.n);
  Vec3d mom_before = total_particle_momentum(prm, ps);
  p2g(prm, ps, grid);
  double mass_total = prm.p_mass * double(ps.size());
  CHECK(std::abs(total_grid_mass(grid) - mass_total) / mass_total < 1e-12);
  // The stress and affine scatter terms are momentum-free by the linear
  // reproduction property of the B-spline stencil.
  CHECK(max_abs(total_grid_momentum(grid) - mom_before) / norm(mom_before) < 1e-10);
}

TEST_CASE("p2g mass conservation holds in single precision") {
  auto prm = desk_params<float>(32);
  Particles<float> ps;
  make_block(prm, ps, Vec3<float>{0.3f, 0.3f, 0.3f}, Vec3<float>{0.6f, 0.5f, 0.6f});
  Grid<float> grid;
  grid.resize(prm.n);
  p2g(prm, ps, grid);
  float mass_total = prm.p_mass * float(ps.size());
  CHECK(std::abs(total_grid_mass(grid) - mass_total) / mass_total < 1e-6f);
}

TEST_CASE("p2g matches a straight-line scalar reference on two particles") {
  auto prm = desk_params<double>(16);
  Particles<double> ps;
  ps.resize(2);
  ps.x[0] = {0.47, 0.52, 0.5};
  ps.x[1] = {0.51, 0.49, 0.533};
  ps.v[0] = {0.3, -0.2, 0.1};
  ps.v[1] = {-0.1, 0.05, 0.2};
  oracle::Rng rng(62);
  // Small affine velocities so the trial strain stays in the elastic branch
  // and the reference can use a series matrix log for the stress.
  ps.C[0] = 3.0 * rng.mat3();
  ps.C[1] = 3.0 * rng.mat3();
  Particles<double> ps_ref = ps;

  Grid<double> grid;
  grid.resize(prm.n);
  p2g(prm, ps, grid);

  // ---- reference: plain scalar loops, no shared helpers ----
  std::vector<double> rm(grid.m.size(), 0.0);
  std::vector<Vec3d> rv(grid.v.size(), Vec3d{});
  for (int p = 0; p < 2; p++) {
    Mat3d F = (Mat3d::identity() + prm.dt * ps_ref.C[p]) * ps_ref.F[p];
    // Elastic branch assertion: deviatoric log strain far below yield.
    Vec3d sig = oracle::singular_values_ref(F);
    double e[3] = {std::log(sig[0]), std::log(sig[1]), std::log(sig[2])};
    double mean = (e[0] + e[1] + e[2]) / 3;
    double dev = std::sqrt((e[0] - mean) * (e[0] - mean) +
                           (e[1] - mean) * (e[1] - mean) +
                           (e[2] - mean) * (e[2] - mean));
    REQUIRE(dev < prm.yield_stress / (2 * prm.mu));
    // Hencky stress via matrix log: tau = mu log(F F^T) + (lambda/2) tr(log) I.
    Mat3d L = logm_series(F * transpose(F));
    Mat3d tau = prm.mu * L + 0.5 * prm.lambda * trace(L) * Mat3d::identity();
    double base[3], fx[3], w[3][3];
    for (int d = 0; d < 3; d++) {
      double xd = ps_ref.x[p][d] * prm.inv_dx;
      base[d] = std::floor(xd - 0.5);
      fx[d] = xd - base[d];
      w[d][0] = 0.5 * (1.5 - fx[d]) * (1.5 - fx[d]);
      w[d][1] = 0.75 - (fx[d] - 1.0) * (fx[d] - 1.0);
      w[d][2] = 0.5 * (fx[d] - 0.5) * (fx[d] - 0.5);
    }
    Mat3d A = (-4.0 * prm.dt * prm.inv_dx * prm.inv_dx * prm.p_vol) * tau +
              prm.p_mass * ps_ref.C[p];
    for (int i = 0; i < 3; i++)
      for (int j = 0; j < 3; j++)
        for (int k = 0; k < 3; k++) {
          double wt = w[0][i] * w[1][j] * w[2][k];
          Vec3d dpos{(i - fx[0]) * prm.dx, (j - fx[1]) * prm.dx,
                     (k - fx[2]) * prm.dx};
          size_t id = ((size_t(base[0]) + i) * prm.n + size_t(base[1]) + j) * prm.n +
                      size_t(base[2]) + k;
          rm[id] += wt * prm.p_mass;
          rv[id] += wt * (prm.p_mass * ps_ref.v[p] + A * dpos);
        }
  }
  for (size_t i = 0; i < rm.size(); i++) {
    CHECK(std::abs(grid.m[i] - rm[i]) < 1e-12);
    CHECK(max_abs(grid.v[i] - rv[i]) < 1e-12);
  }
}

TEST_CASE("p2g rejects out-of-margin particles naming the index") {
  auto prm = desk_params<double>(16);
  Particles<double> ps;
  ps.resize(3);
  ps.x[0] = {0.5, 0.5, 0.5};
  ps.x[1] = {0.5, 0.01, 0.5};  // below margin
  ps.x[2] = {0.5, 0.5, 0.5};
  Grid<double> grid;
  grid.resize(prm.n);
  try {
    p2g(prm, ps, grid);
    FAIL("expected out-of-margin error");
  } catch (const Error& e) {
    CHECK(e.code == ErrorCode::Diverged);
    CHECK(std::string(e.what()).find("particle 1") != std::string::npos);
  }
}

TEST_CASE("grid_op: momentum to velocity, gravity increment") {
  auto prm = desk_params<double>(16);
  Particles<double> ps;
  ps.resize(1);
  ps.x[0] = {0.5, 0.5, 0.5};
  ps.v[0] = {0.25, 0, 0};
  Grid<double> grid;
  grid.resize(prm.n);
  p2g(prm, ps, grid);
  // v = mom / (m + m_eps): the regularized division recovers the particle
  // velocity scaled by m / (m + m_eps), a bias below 1e-10 on real nodes.
  SUBCASE("no gravity: regularized division, bias bounded by m_eps/m") {
    prm.gravity = {0, 0, 0};
    grid_op(prm, grid, {}, ContactMode::Hard);
    for (size_t i = 0; i < grid.m.size(); i++)
      if (grid.m[i] > 0) {
        double s = grid.m[i] / (grid.m[i] + prm.m_eps);
        CHECK(max_abs(grid.v[i] - s * Vec3d{0.25, 0, 0}) < 1e-13);
        CHECK(max_abs(grid.v[i] - Vec3d{0.25, 0, 0}) <
              0.25 * prm.m_eps / grid.m[i] + 1e-13);
      }
  }
  SUBCASE("free fall adds g*dt to every occupied node") {
    grid_op(prm, grid, {}, ContactMode::Hard);
    for (size_t i = 0; i < grid.m.size(); i++)
      if (grid.m[i] > 0) {
        double s = grid.m[i] / (grid.m[i] + prm.m_eps);
        CHECK(max_abs(grid.v[i] - Vec3d{0.25 * s, -9.8 * prm.dt, 0}) < 1e-13);
      }
  }
}

TEST_CASE("grid_op: approaching nodes inside a static sticky manipulator stop") {
  auto prm = desk_params<double>(16);
  Particles<double> ps;
  make_block(prm, ps, Vec3<double>{0.45, 0.45, 0.45}, Vec3<double>{0.55, 0.55, 0.55});
  for (auto& v : ps.v) v = {0.5, 0, 0};
  prm.gravity = {0, 0, 0};
  Manipulator<double> m;
  m.kind = ShapeKind::Sphere;
  m.size = {0.2, 0, 0};
  m.pos = {0.5, 0.5, 0.5};
  m.friction = 1e9;
  Grid<double> grid;
  grid.resize(prm.n);
  p2g(prm, ps, grid);
  grid_op(prm, grid, {m}, ContactMode::Hard);
  int stopped = 0;
  for (int i = 0; i < prm.n; i++)
    for (int j = 0; j < prm.n; j++)
      for (int k = 0; k < prm.n; k++) {
        size_t id = grid.idx(i, j, k);
        if (grid.m[id] <= 0) continue;
        Vec3d x{i * prm.dx, j * prm.dx, k * prm.dx};
        Vec3d n = sdf_normal(m, x);
        if (sdf(m, x) < -prm.dx && dot(Vec3d{0.5, 0, 0}, n) < -1e-6) {
          CHECK(max_abs(grid.v[id]) < 1e-15);  // full stick to static body
          stopped++;
        }
      }
  CHECK(stopped >= 8);
}

TEST_CASE("g2p: constant grid field is reproduced exactly") {
  auto prm = desk_params<double>(16);
  Particles<double> ps;
  make_block(prm, ps, Vec3<double>{0.3, 0.3, 0.3}, Vec3<double>{0.5, 0.45, 0.5});
  Grid<double> grid;
  grid.resize(prm.n);
  Vec3d u{0.3, -0.2, 0.15};
  for (auto& v : grid.v) v = u;
  std::vector<Vec3d> x_before = ps.x;
  g2p(prm, ps, grid);
  for (size_t p = 0; p < ps.size(); p++) {
    CHECK(max_abs(ps.v[p] - u) < 1e-13);
    CHECK(max_abs(ps.C[p]) < 1e-10);  // affine part vanishes by linearity
    CHECK(max_abs(ps.x[p] - (x_before[p] + prm.dt * u)) < 1e-15);
  }
}

TEST_CASE("g2p: rigid rotation field recovers the spin matrix") {
  auto prm = desk_params<double>(16);
  Particles<double> ps;
  make_block(prm, ps, Vec3<double>{0.35, 0.35, 0.35}, Vec3<double>{0.6, 0.55, 0.6});
  Grid<double> grid;
  grid.resize(prm.n);
  Vec3d omega{0.4, -0.3, 0.8}, c{0.5, 0.5, 0.5};
  for (int i = 0; i < prm.n; i++)
    for (int j = 0; j < prm.n; j++)
      for (int k = 0; k < prm.n; k++)
        grid.v[grid.idx(i, j, k)] =
            cross(omega, Vec3d{i * prm.dx, j * prm.dx, k * prm.dx} - c);
  g2p(prm, ps, grid);
  Mat3d spin(0, -omega.z, omega.y, omega.z, 0, -omega.x, -omega.y, omega.x, 0);
  for (size_t p = 0; p < ps.size(); p++)
    CHECK(max_abs(ps.C[p] - spin) < 1e-9);  // exact by the second-moment identity
}

TEST_CASE("force-free substep round trip conserves momentum") {
  auto prm = desk_params<double>(16);
  prm.gravity = {0, 0, 0};
  Particles<double> ps;
  make_block(prm, ps, Vec3<double>{0.4, 0.45, 0.4}, Vec3<double>{0.55, 0.55, 0.55});
  oracle::Rng rng(63);
  for (auto& v : ps.v) v = 0.1 * rng.vec3(-1, 1);
  Grid<double> grid;
  grid.resize(prm.n);
  Vec3d before = total_particle_momentum(prm, ps);
  std::vector<Manipulator<double>> none;
  substep(prm, ps, grid, none, ContactMode::Hard);
  Vec3d after = total_particle_momentum(prm, ps);
  CHECK(norm(after - before) / norm(before) < 1e-6);
}

TEST_CASE("substep: rest material with zero gravity stays put") {
  auto prm = desk_params<double>(16);
  prm.gravity = {0, 0, 0};
  Particles<double> ps;
  make_block(prm, ps, Vec3<double>{0.4, 0.4, 0.4}, Vec3<double>{0.55, 0.55, 0.55});
  Particles<double> before = ps;
  Grid<double> grid;
  grid.resize(prm.n);
  std::vector<Manipulator<double>> none;
  for (int s = 0; s < 5; s++) substep(prm, ps, grid, none, ContactMode::Hard);
  for (size_t p = 0; p < ps.size(); p++) {
    CHECK(max_abs(ps.x[p] - before.x[p]) < 1e-9);
    CHECK(max_abs(ps.v[p]) < 1e-9);
    CHECK(max_abs(ps.F[p] - Mat3d::identity()) < 1e-9);
  }
}

TEST_CASE("falling block settles on the floor without penetration") {
  auto prm = desk_params<double>(16);
  Particles<double> ps;
  // Block hovering just above its rest height.
  make_block(prm, ps, Vec3<double>{0.42, 0.16, 0.42}, Vec3<double>{0.58, 0.28, 0.58});
  double y0_min = 1e30;
  for (auto& x : ps.x) y0_min = std::min(y0_min, x.y);
  Grid<double> grid;
  grid.resize(prm.n);
  std::vector<Manipulator<double>> none;
  for (int s = 0; s < 1200; s++) substep(prm, ps, grid, none, ContactMode::Hard);
  double y_min = 1e30, v_max = 0;
  for (size_t p = 0; p < ps.size(); p++) {
    y_min = std::min(y_min, ps.x[p].y);
    v_max = std::max(v_max, norm(ps.v[p]));
  }
  CHECK(y_min >= prm.margin() - prm.dx);  // never below floor margin - one cell
  CHECK(y_min < y0_min);                  // it actually fell
  CHECK(v_max < 0.5);                     // and came to near rest
}

TEST_CASE("plastic feasibility after substeps with a low yield stress") {
  auto prm = desk_params<double>(16);
  prm.yield_stress = 5;
  prm.finalize();
  Particles<double> ps;
  make_block(prm, ps, Vec3<double>{0.42, 0.16, 0.42}, Vec3<double>{0.58, 0.3, 0.58});
  Grid<double> grid;
  grid.resize(prm.n);
  std::vector<Manipulator<double>> none;
  for (int s = 0; s < 400; s++) substep(prm, ps, grid, none, ContactMode::Hard);
  double k = prm.yield_stress / (2 * prm.mu);
  for (const auto& F : ps.F) {
    auto s = svd3(F);
    Vec3d eps = log_strain(s.sigma);
    Vec3d dev = eps - Vec3d(sum(eps) / 3);
    CHECK(norm(dev) <= k + 1e-5);
  }
}

TEST_CASE("elastic limit: huge yield stress makes the return map a no-op") {
  auto prm = desk_params<double>(16);
  prm.yield_stress = 1e9;
  prm.finalize();
  Particles<double> ps;
  make_block(prm, ps, Vec3<double>{0.42, 0.2, 0.42}, Vec3<double>{0.58, 0.3, 0.58});
  Grid<double> grid;
  grid.resize(prm.n);
  std::vector<Manipulator<double>> none;
  for (int s = 0; s < 100; s++) substep(prm, ps, grid, none, ContactMode::Hard);
  for (const auto& F : ps.F) {
    Mat3d Fp = von_mises_return_map(F, prm.yield_stress, prm.mu);
    CHECK(max_abs(Fp - F) < 1e-12);
  }
}

TEST_CASE("substep is bitwise deterministic") {
  auto prm = desk_params<double>(16);
  Particles<double> a;
  make_block(prm, a, Vec3<double>{0.4, 0.2, 0.4}, Vec3<double>{0.6, 0.35, 0.6});
  oracle::Rng rng(64);
  for (auto& v : a.v) v = rng.vec3(-0.5, 0.5);
  Particles<double> b = a;
  Grid<double> ga, gb;
  ga.resize(prm.n);
  gb.resize(prm.n);
  Manipulator<double> m;
  m.size = {0.08, 0, 0};
  m.pos = {0.5, 0.45, 0.5};
  m.lin_vel = {0, -0.3, 0};
  std::vector<Manipulator<double>> ma{m}, mb{m};
  for (int s = 0; s < 25; s++) {
    substep(prm, a, ga, ma, ContactMode::Soft);
    substep(prm, b, gb, mb, ContactMode::Soft);
  }
  CHECK(std::memcmp(a.x.data(), b.x.data(), a.size() * sizeof(Vec3d)) == 0);
  CHECK(std::memcmp(a.v.data(), b.v.data(), a.size() * sizeof(Vec3d)) == 0);
  CHECK(std::memcmp(a.F.data(), b.F.data(), a.size() * sizeof(Mat3d)) == 0);
  CHECK(std::memcmp(a.C.data(), b.C.data(), a.size() * sizeof(Mat3d)) == 0);
}

TEST_CASE("scene sampling: density, margins, overlap rejection") {
  auto prm = desk_params<double>(32);
  Particles<double> ps;
  make_block(prm, ps, Vec3<double>{0.4, 0.4, 0.4}, Vec3<double>{0.6, 0.6, 0.6});
  // 0.2^3 volume at 8 particles per (1/32)^3 cell -> about 2097 particles.
  double expect = 0.2 * 0.2 * 0.2 * prm.ppc * prm.n * prm.n * prm.n;
  CHECK(double(ps.size()) == doctest::Approx(expect).epsilon(0.25));
  // Out-of-margin volume rejected.
  Particles<double> bad;
  CHECK_THROWS_AS(
      make_block(prm, bad, Vec3<double>{0.0, 0.4, 0.4}, Vec3<double>{0.2, 0.6, 0.6}),
      Error);
  // Overlapping volumes rejected.
  Volume<double> v1, v2;
  v1.a = {0.4, 0.4, 0.4};
  v1.b = {0.5, 0.5, 0.5};
  v2.a = {0.45, 0.45, 0.45};
  v2.b = {0.55, 0.55, 0.55};
  CHECK_THROWS_AS(sample_volumes(prm, {v1, v2}, {}, bad), Error);
  // Manipulator overlapping the soft body rejected.
  Manipulator<double> m;
  m.size = {0.05, 0, 0};
  m.pos = {0.45, 0.45, 0.45};
  CHECK_THROWS_AS(sample_volumes(prm, {v1}, {m}, bad), Error);
}
