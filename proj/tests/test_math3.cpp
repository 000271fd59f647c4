#include "doctest.h"

#include "core/bspline.hpp"
#include "core/svd3.hpp"
#include "core/vec.hpp"
#include "oracles.hpp"

using namespace plastisim;

TEST_CASE("mat3 basics: determinant, transpose, products") {
  Mat3d A(1, 2, 3, 4, 5, 6, 7, 8, 10);
  CHECK(det(A) == doctest::Approx(-3.0));
  Mat3d At = transpose(A);
  CHECK(At(0, 1) == 4);
  CHECK(At(2, 0) == 3);
  Vec3d v{1, -1, 2};
  Vec3d Av = A * v;
  CHECK(Av.x == doctest::Approx(5));
  CHECK(Av.y == doctest::Approx(11));
  CHECK(Av.z == doctest::Approx(19));
  CHECK(trace(A) == doctest::Approx(16));
  CHECK(ddot(A, Mat3d::identity()) == doctest::Approx(trace(A)));
}

TEST_CASE("quaternion rotate agrees with its rotation matrix") {
  oracle::Rng rng(11);
  for (int k = 0; k < 50; k++) {
    Quat<double> q = qnormalized(
        Quat<double>{rng.normal(), rng.normal(), rng.normal(), rng.normal()});
    Vec3d v = rng.vec3(-2, 2);
    Vec3d r1 = rotate(q, v);
    Vec3d r2 = quat_to_mat(q) * v;
    CHECK(max_abs(r1 - r2) < 1e-12);
    // rotate_inv undoes rotate
    CHECK(max_abs(rotate_inv(q, r1) - v) < 1e-12);
  }
}

TEST_CASE("quat_integrate matches the axis-angle rotation matrix") {
  oracle::Rng rng(12);
  for (int k = 0; k < 50; k++) {
    Vec3d omega = rng.vec3(-5, 5);
    double dt = rng.uniform(1e-4, 0.3);
    Quat<double> q = quat_integrate(Quat<double>{}, omega, dt);
    Mat3d R = quat_to_mat(q);
    Mat3d Rref = oracle::rodrigues(omega * dt);
    CHECK(max_abs(R - Rref) < 1e-10);
  }
}

TEST_CASE("quat_integrate: zero angular velocity is the identity map") {
  Quat<double> q = qnormalized(Quat<double>{0.3, -0.4, 0.5, 0.6});
  Quat<double> q2 = quat_integrate(q, Vec3d{0, 0, 0}, 1e-3);
  CHECK(q2.w == q.w);
  CHECK(q2.x == q.x);
}

TEST_CASE("quat_integrate keeps unit norm over 10^4 steps") {
  Quat<double> q{1, 0, 0, 0};
  oracle::Rng rng(13);
  Vec3d omega = rng.vec3(-3, 3);
  for (int i = 0; i < 10000; i++) q = quat_integrate(q, omega, 1e-3);
  CHECK(std::abs(qnorm(q) - 1.0) < 1e-12);
  // Constant omega composes exactly: total rotation is omega * total_time.
  Mat3d Rref = oracle::rodrigues(omega * 10.0);
  CHECK(max_abs(quat_to_mat(q) - Rref) < 1e-8);
}

TEST_CASE("svd3: identity and diagonal matrices are exact") {
  auto r = svd3(Mat3d::identity());
  CHECK(max_abs(r.sigma - Vec3d{1, 1, 1}) < 1e-14);
  auto d = svd3(Mat3d::diag({3, 2, 1}));
  CHECK(max_abs(d.sigma - Vec3d{3, 2, 1}) < 1e-14);
  CHECK(max_abs(d.U * Mat3d::diag(d.sigma) * transpose(d.V) -
                Mat3d::diag({3, 2, 1})) < 1e-14);
}

TEST_CASE("svd3: reconstruction, orthogonality, ordering on random matrices") {
  oracle::Rng rng(21);
  for (int k = 0; k < 100; k++) {
    Mat3d M = rng.mat3();
    auto r = svd3(M);
    CHECK(max_abs(r.U * Mat3d::diag(r.sigma) * transpose(r.V) - M) < 1e-10);
    CHECK(max_abs(transpose(r.U) * r.U - Mat3d::identity()) < 1e-12);
    CHECK(max_abs(transpose(r.V) * r.V - Mat3d::identity()) < 1e-12);
    CHECK(r.sigma[0] >= r.sigma[1]);
    CHECK(r.sigma[1] >= r.sigma[2]);
    CHECK(r.sigma[2] >= 0);
    CHECK(det(r.V) == doctest::Approx(1.0).epsilon(1e-10));
    // Cross-check singular values against an independent eigen solver.
    Vec3d sref = oracle::singular_values_ref(M);
    CHECK(max_abs(r.sigma - sref) < 1e-9);
  }
}

TEST_CASE("svd3: rank-deficient input still gives orthonormal factors") {
  oracle::Rng rng(22);
  for (int k = 0; k < 20; k++) {
    Mat3d M = outer(rng.vec3(-1, 1), rng.vec3(-1, 1));  // rank 1
    auto r = svd3(M);
    CHECK(r.sigma[1] < 1e-12);
    CHECK(r.sigma[2] < 1e-12);
    CHECK(max_abs(r.U * Mat3d::diag(r.sigma) * transpose(r.V) - M) < 1e-12);
    CHECK(max_abs(transpose(r.U) * r.U - Mat3d::identity()) < 1e-10);
    CHECK(max_abs(transpose(r.V) * r.V - Mat3d::identity()) < 1e-10);
  }
  auto z = svd3(Mat3d());
  CHECK(max_abs(z.sigma) == 0);
  CHECK(max_abs(transpose(z.U) * z.U - Mat3d::identity()) < 1e-14);
}

TEST_CASE("svd3_vjp: pure singular-value gradient on a diagonal matrix") {
  // M = diag(3,2,1) has U = V = I; with dsigma = e1 and dU = dV = 0 the
  // input gradient must be diag(1,0,0).
  auto r = svd3(Mat3d::diag({3, 2, 1}));
  Mat3d g = svd3_vjp(r.U, r.sigma, r.V, Mat3d(), Vec3d{1, 0, 0}, Mat3d());
  CHECK(max_abs(g - Mat3d::diag({1, 0, 0})) < 1e-12);
}

TEST_CASE("svd3_vjp matches finite differences on well-separated spectra") {
  oracle::Rng rng(23);
  int tested = 0;
  while (tested < 50) {
    Mat3d M = rng.mat3();
    auto r = svd3(M);
    // Keep the spectrum well separated so finite differences stay on one
    // smooth branch of the decomposition.
    if (r.sigma[0] - r.sigma[1] < 5e-2 || r.sigma[1] - r.sigma[2] < 5e-2 ||
        r.sigma[2] < 5e-2)
      continue;
    tested++;
    Mat3d cU = rng.mat3(), cV = rng.mat3();
    Vec3d cs = rng.vec3(-1, 1);
    auto loss = [&](const Mat3d& A) {
      auto s = svd3(A);
      return ddot(cU, s.U) + dot(cs, s.sigma) + ddot(cV, s.V);
    };
    Mat3d g = svd3_vjp(r.U, r.sigma, r.V, cU, cs, cV);
    Mat3d gfd = oracle::fd_grad(loss, M, 1e-6);
    for (int i = 0; i < 3; i++)
      for (int j = 0; j < 3; j++)
        CHECK(oracle::rel_err(g(i, j), gfd(i, j), 1e-8) < 1e-5);
  }
}

TEST_CASE("svd3_vjp stays finite on exactly repeated singular values") {
  oracle::Rng rng(24);
  for (int k = 0; k < 20; k++) {
    Mat3d U = rng.rotation(), V = rng.rotation();
    Mat3d M = U * Mat3d::diag({2, 2, 1}) * transpose(V);
    auto r = svd3(M);
    Mat3d g = svd3_vjp(r.U, r.sigma, r.V, rng.mat3(), rng.vec3(-1, 1), rng.mat3());
    CHECK(all_finite(g));
    // The repeated pair is regularized to ~1/(1e-6 * (s_i+s_j)); magnitudes
    // must stay below that scale.
    CHECK(max_abs(g) < 1e7);
  }
}

TEST_CASE("bspline weights: knot values and support") {
  // fx = 1.0 (particle exactly on a node) gives (1/8, 3/4, 1/8).
  auto it = make_interp(Vec3d{1.0, 1.0, 1.0}, 1.0);
  CHECK(it.base[0] == 0);
  CHECK(it.fx[0] == doctest::Approx(1.0));
  CHECK(it.w[0][0] == doctest::Approx(0.125));
  CHECK(it.w[0][1] == doctest::Approx(0.75));
  CHECK(it.w[0][2] == doctest::Approx(0.125));
  // fx = 0.5 (support boundary) gives (1/2, 1/2, 0).
  auto it2 = make_interp(Vec3d{0.5, 0.5, 0.5}, 1.0);
  CHECK(it2.fx[0] == doctest::Approx(0.5));
  CHECK(it2.w[0][0] == doctest::Approx(0.5));
  CHECK(it2.w[0][1] == doctest::Approx(0.5));
  CHECK(it2.w[0][2] == doctest::Approx(0.0));
}

TEST_CASE("bspline weights: partition of unity and derivative sum") {
  oracle::Rng rng(31);
  for (int k = 0; k < 200; k++) {
    Vec3d x = rng.vec3(0.05, 0.95);
    double inv_dx = 32.0;
    auto it = make_interp(x, inv_dx);
    for (int d = 0; d < 3; d++) {
      CHECK(it.fx[d] >= 0.5);
      CHECK(it.fx[d] <= 1.5);
      // base + fx reproduces the scaled position
      CHECK(it.base[d] + it.fx[d] == doctest::Approx(x[d] * inv_dx).epsilon(1e-12));
      double wsum = it.w[d][0] + it.w[d][1] + it.w[d][2];
      double dwsum = it.dw[d][0] + it.dw[d][1] + it.dw[d][2];
      CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(std::abs(dwsum) < 1e-12);
      for (int o = 0; o < 3; o++) CHECK(it.w[d][o] >= 0.0);
    }
  }
}

TEST_CASE("bspline derivative weights match finite differences") {
  oracle::Rng rng(32);
  for (int k = 0; k < 50; k++) {
    Vec3d x = rng.vec3(0.1, 0.9);
    double inv_dx = 16.0;
    auto it = make_interp(x, inv_dx);
    double h = 1e-7;
    for (int o = 0; o < 3; o++) {
      auto wp = make_interp(Vec3d{x.x + h, x.y, x.z}, inv_dx);
      auto wm = make_interp(Vec3d{x.x - h, x.y, x.z}, inv_dx);
      REQUIRE(wp.base[0] == wm.base[0]);
      double fd = (wp.w[0][o] - wm.w[0][o]) / (2 * h);
      CHECK(oracle::rel_err(it.dw[0][o] * inv_dx, fd, 1e-6) < 1e-6);
    }
  }
}
