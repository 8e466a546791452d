#include <doctest.h>

#include <cmath>
#include <random>

#include <szl/szego.hpp>

using namespace szl;

namespace {

BundlePoint pt(cplx a, cplx b) {
  CVec v(2);
  v << a, b;
  return BundlePoint::normalized(v);
}

TorusAction weight_one_minus_one() {
  Eigen::MatrixXi W(1, 2);
  W << 1, -1;
  return TorusAction(W, Vec::Zero(1));
}

Eigen::VectorXi vp(int v) { return Eigen::VectorXi::Constant(1, v); }

// u_k((1,0)) for the unit-circle knot: (k+1)/pi * integral of cos^k.
double knot_exact(long k) {
  if (k % 2) return 0.0;
  const double lb = std::lgamma(k + 1.0) - 2 * std::lgamma(k / 2 + 1.0) - k * std::log(2.0);
  return 2.0 * (k + 1) * std::exp(lb);
}

}  // namespace

TEST_CASE("kernel normalization") {
  SzegoKernel K1(1), K2(2), K3(3);
  for (long k : {0L, 1L, 5L, 40L}) {
    CHECK(K1.constant(k) == doctest::Approx((k + 1) / kPi).epsilon(1e-13));
    CHECK(K2.constant(k) == doctest::Approx((k + 1.0) * (k + 2) / (kPi * kPi)).epsilon(1e-13));
  }
  // Constants reproduce against the total mass in degree zero.
  for (const auto& K : {K1, K2, K3}) CHECK(K.constant(0) * K.measure_total() == doctest::Approx(1.0));
  CHECK(K1.constant(100000) > 0.0);
}

TEST_CASE("kernel evaluation") {
  BundlePoint x = pt(cplx(0.3, 0.4), cplx(-0.2, 0.8));
  BundlePoint y = pt(cplx(0.5, -0.1), cplx(0.7, 0.2));
  const cplx inner = hermitian(x.coords(), y.coords());
  CHECK(std::abs(kernel_eval(7, x, y) - 8.0 / kPi * ipow(inner, 7)) < 1e-13);
  CHECK(std::abs(kernel_eval(7, x, y) - std::conj(kernel_eval(7, y, x))) < 1e-13);
  CHECK(std::abs(kernel_eval(3, pt(1, 0), pt(0, 1))) == 0.0);
}

TEST_CASE("node count rule") {
  QuadratureOptions opt;
  CHECK(quadrature_nodes(1, 1, opt) == 256);
  CHECK(quadrature_nodes(10000, 1, opt) == 800);
  CHECK(quadrature_nodes(10000, 2, opt) == 1600);
  CHECK(quadrature_nodes(1000, 1, opt, 2000) == 2001);
  opt.alias_guard = false;
  CHECK(quadrature_nodes(1000, 1, opt, 2000) == 256);
  opt.node_override = 17;
  CHECK(quadrature_nodes(1000, 1, opt, 2000) == 17);
  CHECK(integrand_degree(builtin_knot(0.0), 40) == 40);
  CHECK(integrand_degree(builtin_knot(0.0).with_weight([](const Vec&) { return cplx(1.0); }), 40) == 0);
}

TEST_CASE("unit-circle knot at (1,0) against the closed form") {
  LegendrianImmersion L = builtin_knot(0.0);
  for (long k = 0; k <= 120; k += 7) {
    const cplx u = compute_u_k(L, k, pt(1, 0));
    CAPTURE(k);
    CHECK(std::abs(u - knot_exact(k)) <= 1e-10 * std::max(1.0, knot_exact(k)));
  }
}

TEST_CASE("circle equivariance u_k(e^{i theta} x) = e^{i k theta} u_k(x)") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ud(-1, 1);
  LegendrianImmersion L = builtin_knot(0.7);
  for (int c = 0; c < 20; ++c) {
    BundlePoint x = pt(cplx(ud(rng), ud(rng)), cplx(ud(rng), ud(rng)));
    const long k = 10 + 13 * c;
    const double th = 3 * ud(rng);
    const cplx a = compute_u_k(L, k, x.rotated(th));
    const cplx b = std::polar(1.0, k * th) * compute_u_k(L, k, x);
    CHECK(std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)));
  }
}

TEST_CASE("node doubling agrees for smooth integrands") {
  QuadratureOptions opt;
  opt.check_convergence = true;
  LegendrianImmersion L = builtin_knot(0.3);
  BundlePoint x = pt(cplx(0.9, 0.1), cplx(0.2, -0.3));
  const cplx a = compute_u_k(L, 150, x, opt);
  const cplx b = compute_u_k(L, 150, x);
  CHECK(std::abs(a - b) < 1e-10 * std::max(1.0, std::abs(b)));
}

TEST_CASE("node doubling flags an under-resolved rule") {
  QuadratureOptions opt;
  opt.check_convergence = true;
  opt.node_override = 10;
  CHECK_THROWS_AS(compute_u_k(builtin_knot(0.0), 60, pt(1, 0.4), opt), ConvergenceError);
}

TEST_CASE("threaded and serial sums are bit-identical") {
  QuadratureOptions serial, threaded;
  threaded.threads = 3;
  LegendrianImmersion L = builtin_knot(0.2);
  BundlePoint x = pt(cplx(0.6, 0.2), cplx(0.1, 0.7));
  const cplx a = compute_u_k(L, 333, x, serial);
  const cplx b = compute_u_k(L, 333, x, threaded);
  CHECK(a.real() == b.real());
  CHECK(a.imag() == b.imag());
}

TEST_CASE("isotypic components of a G-invariant curve") {
  LegendrianImmersion L = builtin_torus_knot(1, -1);
  TorusAction act = weight_one_minus_one();
  BundlePoint x = pt(cplx(0.8, 0.1), cplx(0.3, 0.5));
  const cplx full = compute_u_k(L, 40, x);
  const cplx zero = compute_u_k_varpi(L, act, vp(0), 40, x);
  CHECK(std::abs(full - zero) < 1e-10 * std::abs(full));
  for (int v : {1, -1, 2, 5}) CHECK(std::abs(compute_u_k_varpi(L, act, vp(v), 40, x)) < 1e-10 * std::abs(full));
}

TEST_CASE("isotypic components transform by the character") {
  LegendrianImmersion L = builtin_knot(0.0);
  TorusAction act = weight_one_minus_one();
  BundlePoint x = pt(cplx(0.8, 0.1), cplx(0.3, 0.5));
  const long k = 30;
  const cplx base = compute_u_k_varpi(L, act, vp(2), k, x);
  CHECK(std::abs(base) > 1e-3);
  cplx avg = 0.0;
  for (int j = 0; j < 7; ++j) {
    Vec s = Vec::Constant(1, 2 * kPi * j / 7);
    const cplx u = compute_u_k_varpi(L, act, vp(2), k, act.act(s, x));
    CHECK(std::abs(u - std::polar(1.0, -2 * s(0)) * base) < 1e-10 * std::abs(base));
    avg += u / 7.0;
  }
  // The invariant part of a varpi = 2 state vanishes.
  CHECK(std::abs(avg) < 1e-10 * std::abs(base));
  // Components for all characters add back up to u_k.
  cplx sum = 0.0;
  for (int v = -k; v <= k; ++v) sum += compute_u_k_varpi(L, act, vp(v), k, x);
  CHECK(std::abs(sum - compute_u_k(L, k, x)) < 1e-9 * std::abs(sum));
}

TEST_CASE("Hermitian products") {
  LegendrianImmersion L = builtin_knot(0.0);
  const cplx self = hermitian_product(L, L, 40);
  CHECK(self.real() > 0.0);
  CHECK(std::fabs(self.imag()) < 1e-10 * self.real());
  const cplx a = hermitian_product(L, builtin_knot(1.0), 40);
  const cplx b = hermitian_product(builtin_knot(1.0), L, 40);
  CHECK(std::abs(a - std::conj(b)) < 1e-10 * std::abs(a));
  // Saturations with different |x_0| never meet: the product decays fast.
  const cplx far = hermitian_product(builtin_torus_knot(1, -2), builtin_torus_knot(1, -1), 200);
  CHECK(std::abs(far) < 1e-6);
}

TEST_CASE("state sequences") {
  StateSequence s = compute_sequence(builtin_knot(0.0), pt(1, 0), {40, 10, 20});
  REQUIRE(s.ks() == std::vector<long>{10, 20, 40});
  CHECK(s.moduli()[2] == doctest::Approx(knot_exact(40)).epsilon(1e-10));
  CHECK_THROWS(compute_u_k(builtin_knot(0.0), -1, pt(1, 0)));
}
