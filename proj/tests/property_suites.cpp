#include "property_suites.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>

#include <szl/asymptotics.hpp>

using namespace szl;

namespace {

using Rng = std::mt19937_64;

double unif(Rng& r, double a, double b) { return std::uniform_real_distribution<double>(a, b)(r); }
int uint_in(Rng& r, int a, int b) { return std::uniform_int_distribution<int>(a, b)(r); }

Mat gauss_mat(Rng& r, int rows, int cols) {
  std::normal_distribution<double> nd;
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = nd(r);
  return m;
}

CMat random_unitary(Rng& r, int n) {
  CMat z(n, n);
  z.real() = gauss_mat(r, n, n);
  z.imag() = gauss_mat(r, n, n);
  Eigen::HouseholderQR<CMat> qr(z);
  return qr.householderQ() * CMat::Identity(n, n);
}

CVec random_sphere(Rng& r, int m) {
  CVec v(m);
  v.real() = gauss_mat(r, m, 1);
  v.imag() = gauss_mat(r, m, 1);
  return v.normalized();
}

// Adapted frame with T Lambda = {p = 0}; orbit spanned by (R r, T R r) with T symmetric,
// which makes the orbit isotropic; T Lambda' = {(0, q) : R^t q = 0}.
struct RandomFrame {
  int n = 0, g = 0;
  FrameData frame;
  Mat lambda_prime;  // basis in R^{2n}
  Mat orbit;         // basis in R^{2n}
};

RandomFrame random_frame(Rng& r) {
  RandomFrame f;
  f.n = uint_in(r, 1, 4);
  f.g = uint_in(r, 0, f.n);
  const int n = f.n, g = f.g;
  Mat R = gauss_mat(r, n, g);
  Mat T = gauss_mat(r, n, n);
  T = (0.5 * (T + T.transpose())).eval();
  Mat B(2 * n, g);
  B << R, T * R;
  Mat lam = Mat::Zero(2 * n, n);
  lam.bottomRows(n) = Mat::Identity(n, n);
  Mat lp = Mat::Zero(2 * n, n - g);
  if (n - g > 0) lp.bottomRows(n) = orth_complement(R, 1e-10);
  f.lambda_prime = lp;
  f.orbit = B;
  f.frame.lambda_tangent = RealSubspace(2 * n, lam);
  f.frame.lambda_prime_tangent = RealSubspace(2 * n, lp);
  f.frame.orbit_tangent = g > 0 ? RealSubspace(2 * n, orth(B, 1e-12)) : RealSubspace::zero(2 * n);
  f.frame.rt = compute_rt(f.frame.orbit_tangent);
  return f;
}

double dist_to_span(const Vec& v, const Mat& basis) {
  if (basis.cols() == 0) return v.norm();
  Mat q = orth(basis, 1e-12);
  return (v - q * (q.transpose() * v)).norm();
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(3);
  os << x;
  return os.str();
}

}  // namespace

SuiteResult suite_tangent_roundtrip(int cases) {
  SuiteResult s{"tangent decomposition round trip"};
  Rng rng(11);
  for (int c = 0; c < cases; ++c) {
    RandomFrame f = random_frame(rng);
    Vec w = gauss_mat(rng, 2 * f.n, 1);
    TangentDecomposition d = decompose_tangent(w, f.frame.lambda_tangent, f.frame.lambda_prime_tangent,
                                               f.frame.orbit_tangent);
    Mat lam = f.frame.lambda_tangent.basis();
    Mat both(2 * f.n, lam.cols() + f.orbit.cols());
    both << lam, f.orbit;
    double err = (d.sum() - w).norm();
    err = std::max(err, dist_to_span(d.w_c, f.lambda_prime));
    err = std::max(err, dist_to_span(d.w_b, lam));
    if (f.lambda_prime.cols() > 0) err = std::max(err, (f.lambda_prime.transpose() * d.w_b).norm());
    err = std::max(err, dist_to_span(d.w_d, f.orbit));
    err = std::max(err, (both.transpose() * d.w_a).norm());
    // Idempotence: decomposing a component returns it.
    TangentDecomposition again = decompose_tangent(d.w_b + d.w_d, f.frame.lambda_tangent,
                                                   f.frame.lambda_prime_tangent, f.frame.orbit_tangent);
    err = std::max({err, again.w_a.norm(), again.w_c.norm(), (again.w_b - d.w_b).norm(), (again.w_d - d.w_d).norm()});
    const double rel = err / std::max(1.0, w.norm());
    s.worst = std::max(s.worst, rel);
    if (rel > 1e-10) ++s.failures;
    ++s.cases;
  }
  s.detail = "max error " + fmt(s.worst) + " (tolerance 1e-10)";
  return s;
}

SuiteResult suite_rt_constraints(int cases) {
  SuiteResult s{"R,T constraints and symmetry"};
  Rng rng(12);
  for (int c = 0; c < cases; ++c) {
    RandomFrame f = random_frame(rng);
    if (f.g == 0) {
      --c;
      continue;
    }
    const RTData& rt = f.frame.rt;
    const Mat I = Mat::Identity(f.g, f.g);
    double err = (rt.R.transpose() * rt.R + rt.R.transpose() * rt.T.transpose() * rt.T * rt.R - I).norm();
    const Mat RTR = rt.R.transpose() * rt.T * rt.R;
    err = std::max(err, (RTR - RTR.transpose()).norm());
    // T vanishes on the orthogonal complement of range(R).
    Mat comp = orth_complement(rt.R, 1e-10);
    if (comp.cols() > 0) err = std::max(err, (rt.T * comp).norm());
    // The orbit inclusion r -> (R r, T R r) reproduces the orbit.
    Mat emb(2 * f.n, f.g);
    emb << rt.R, rt.T * rt.R;
    for (int j = 0; j < f.g; ++j) err = std::max(err, dist_to_span(emb.col(j), f.orbit));
    s.worst = std::max(s.worst, err);
    if (err > 1e-10) ++s.failures;
    ++s.cases;
  }
  s.detail = "max error " + fmt(s.worst) + " (tolerance 1e-10)";
  return s;
}

SuiteResult suite_s_positivity(int cases) {
  SuiteResult s{"positivity of S"};
  Rng rng(13);
  double worst_rel = 0.0;
  for (int c = 0; c < cases; ++c) {
    RandomFrame f = random_frame(rng);
    const int m = 2 * f.n;
    Vec w = gauss_mat(rng, m, 1);
    TangentDecomposition d = decompose_tangent(w, f.frame.lambda_tangent, f.frame.lambda_prime_tangent,
                                               f.frame.orbit_tangent);
    const Vec wp = d.w_a + d.w_b;
    const cplx q = q_form(w, f.frame);
    const cplx qp = q_form(wp, f.frame);
    QuadraticFormsSP sp = quadratic_forms_sp(f.frame.rt, f.frame);
    bool bad = false;
    if (wp.norm() > 1e-8 && !(q.real() > 0.0)) bad = true;
    if (q.real() < -1e-12) bad = true;
    // S depends on w only through w'; S and P agree between the two code paths.
    const double scale = std::max(1.0, w.squaredNorm());
    const double e1 = std::fabs(q.real() - qp.real()) / scale;
    const double e2 = std::abs(cplx(sp.s(w), sp.p(w)) - q) / scale;
    worst_rel = std::max({worst_rel, e1, e2});
    if (e1 > 1e-10 || e2 > 1e-10) bad = true;
    // Eigenvalues of S restricted to the w' space are positive.
    if (wp.norm() > 1e-8) {
      Eigen::SelfAdjointEigenSolver<Mat> es(sp.S);
      if (es.eigenvalues().minCoeff() < -1e-10) bad = true;
    }
    if (bad) ++s.failures;
    ++s.cases;
  }
  s.worst = worst_rel;
  s.detail = "S(w) > 0 for w' != 0, S(w) = S(w'), path mismatch " + fmt(worst_rel);
  return s;
}

SuiteResult suite_orbit_volume_identity(int cases) {
  SuiteResult s{"orbit volume identity |det A| V_eff |G_t| = 1 on CP^2"};
  Rng rng(14);
  int attempts = 0;
  while (s.cases < cases && attempts < 100 * cases) {
    ++attempts;
    const int g = uint_in(rng, 1, 2);
    Eigen::MatrixXi W(g, 3);
    for (int i = 0; i < g; ++i)
      for (int j = 0; j < 3; ++j) W(i, j) = uint_in(rng, -3, 3);
    // Positive vector in the kernel of W, so that Phi = W |m|^2 vanishes.
    Mat Wd = W.cast<double>();
    Eigen::FullPivLU<Mat> lu(Wd);
    if (lu.rank() != g) continue;
    Vec weights;
    if (g == 1) {
      Mat ker = lu.kernel();
      Vec cand = ker * (gauss_mat(rng, ker.cols(), 1));
      if (cand.minCoeff() < 0) cand = -cand;
      weights = cand;
    } else {
      weights = lu.kernel().col(0);
      if (weights.minCoeff() < 0) weights = -weights;
    }
    if (weights.minCoeff() < 0.05 * weights.maxCoeff()) continue;
    weights /= weights.sum();
    CVec m(3);
    for (int l = 0; l < 3; ++l) m(l) = std::polar(std::sqrt(weights(l)), unif(rng, 0, 2 * kPi));
    TorusAction act(W, Vec::Zero(g));
    BundlePoint x(m, 1e-9);
    // Orbit tangent vectors: horizontal parts of i (W_jl) m_l, real chart coordinates.
    HeisenbergChart chart = heisenberg_chart(x);
    Mat K(4, g);
    for (int j = 0; j < g; ++j) {
      CVec gen(3);
      for (int l = 0; l < 3; ++l) gen(l) = cplx(0, W(j, l)) * m(l);
      K.col(j) = chart.real_coords_of(gen - hermitian(gen, m) * m);
    }
    const double gram = (K.transpose() * K).determinant();
    if (gram < 1e-6) continue;
    // Stabilizer by enumeration on the lattice 2 pi Z^g / D, D a nonzero maximal minor.
    // Denominators of stabilizer elements divide any nonzero maximal minor of the
    // weight differences w_l - w_0.
    long D = 0;
    if (g == 1) {
      D = std::abs(W(0, 1) - W(0, 0));
      if (D == 0) D = std::abs(W(0, 2) - W(0, 0));
    } else {
      Eigen::Matrix2d M;
      M.row(0) = (W.col(1) - W.col(0)).cast<double>().transpose();
      M.row(1) = (W.col(2) - W.col(0)).cast<double>().transpose();
      D = std::lround(std::fabs(M.determinant()));
    }
    if (D == 0 || D > 60) continue;
    long count = 0;
    const long total = g == 1 ? D : D * D;
    for (long idx = 0; idx < total; ++idx) {
      Vec sv(g);
      sv(0) = 2 * kPi * (idx % D) / D;
      if (g == 2) sv(1) = 2 * kPi * (idx / D) / D;
      CVec gm = act.act(sv, m);
      if (std::abs(std::abs(hermitian(gm, m)) - 1.0) < 1e-9) ++count;
    }
    OrbitData od = effective_potential(act, hopf_project(x));
    const double det_a = 1.0 / (std::pow(2 * kPi, g) * std::sqrt(gram));
    const double id = det_a * od.v_eff * static_cast<double>(count);
    const double err = std::fabs(id - 1.0);
    s.worst = std::max(s.worst, err);
    if (err > 1e-6 || od.stabilizer_order != count) ++s.failures;
    ++s.cases;
  }
  s.detail = "max |identity - 1| " + fmt(s.worst) + " (tolerance 1e-6)";
  return s;
}

SuiteResult suite_gaussian_fourier(int cases) {
  SuiteResult s{"gaussian_fourier vs quadrature"};
  Rng rng(15);
  for (int c = 0; c < cases; ++c) {
    const int g = 1 + c % 3;
    Mat X = gauss_mat(rng, g, g);
    Mat re = X * X.transpose() / g + 0.5 * Mat::Identity(g, g);
    Mat Y = gauss_mat(rng, g, g);
    Mat im = 0.25 * (Y + Y.transpose());
    CMat A(g, g);
    A.real() = re;
    A.imag() = im;
    Vec b = gauss_mat(rng, g, 1);
    const cplx closed = gaussian_fourier(A, b);
    // Tensor trapezoid on a box; spectrally accurate for Gaussians. The step keeps the
    // aliased Fourier copies below 1e-10, their decay set by Re(A^{-1}).
    Eigen::SelfAdjointEigenSolver<Mat> es(re);
    const double lmin = es.eigenvalues().minCoeff();
    const double L = std::sqrt(32.0 / lmin);
    Mat reinv = A.inverse().real();
    Eigen::SelfAdjointEigenSolver<Mat> ei(0.5 * (reinv + reinv.transpose()));
    const double mu = ei.eigenvalues().minCoeff();
    const double h = 2 * kPi / (std::sqrt(4 * 23.0 / mu) + b.norm());
    const int N = static_cast<int>(std::ceil(2 * L / h));
    const double hh = 2 * L / N;
    long total = 1;
    for (int j = 0; j < g; ++j) total *= (N + 1);
    cplx sum = 0.0;
    Vec u(g);
    for (long idx = 0; idx < total; ++idx) {
      long r = idx;
      for (int j = 0; j < g; ++j) {
        u(j) = -L + hh * static_cast<double>(r % (N + 1));
        r /= (N + 1);
      }
      const cplx quad = u.cast<cplx>().dot(A * u.cast<cplx>());
      sum += std::exp(-quad - cplx(0, u.dot(b)));
    }
    sum *= std::pow(hh, g);
    const double err = std::abs(sum - closed) / std::abs(closed);
    s.worst = std::max(s.worst, err);
    if (err > 1e-6) ++s.failures;
    ++s.cases;
  }
  s.detail = "max relative error " + fmt(s.worst) + " (tolerance 1e-6, g <= 3)";
  return s;
}

SuiteResult suite_iota_invariant(int cases) {
  SuiteResult s{"iota_J symmetry, unitary invariance, sine law"};
  Rng rng(16);
  auto real_span = [](const CMat& U) {
    Mat B(2 * U.rows(), U.cols());
    for (Eigen::Index j = 0; j < U.cols(); ++j) B.col(j) = to_real(U.col(j));
    return RealSubspace::span(B);
  };
  for (int c = 0; c < cases; ++c) {
    const int n = uint_in(rng, 1, 3);
    CMat U1 = random_unitary(rng, n);
    Vec angles(n);
    double expect = 1.0;
    for (int j = 0; j < n; ++j) {
      angles(j) = (uint_in(rng, 0, 3) == 0) ? 0.0 : unif(rng, 0.05, kPi - 0.05);
      if (angles(j) != 0.0) expect *= std::fabs(std::sin(angles(j)));
    }
    CMat D = CMat::Zero(n, n);
    for (int j = 0; j < n; ++j) D(j, j) = std::polar(1.0, angles(j));
    // A real rotation of the reference plane leaves it unchanged.
    Mat O = Eigen::HouseholderQR<Mat>(gauss_mat(rng, n, n)).householderQ();
    CMat U2 = U1 * D * O.cast<cplx>();
    CMat V = random_unitary(rng, n);
    const double a = iota_invariant({real_span(U1), real_span(U2)});
    const double b = iota_invariant({real_span(U2), real_span(U1)});
    const double v = iota_invariant({real_span(V * U1), real_span(V * U2)});
    const double err = std::max({std::fabs(a - expect), std::fabs(b - a), std::fabs(v - a)});
    s.worst = std::max(s.worst, err);
    if (err > 1e-8) ++s.failures;
    ++s.cases;
  }
  s.detail = "max error " + fmt(s.worst) + " (tolerance 1e-8)";
  return s;
}

SuiteResult suite_chart_remainder(int cases) {
  SuiteResult s{"Heisenberg chart connection-form remainder slope"};
  Rng rng(17);
  double worst_slope = 1e9;
  for (int c = 0; c < cases; ++c) {
    const int n = uint_in(rng, 1, 3);
    BundlePoint x0(random_sphere(rng, n + 1), 1e-9);
    std::optional<RealSubspace> adapt;
    if (c % 2) {
      CMat U = random_unitary(rng, n);
      Mat B(2 * n, n);
      for (int j = 0; j < n; ++j) B.col(j) = to_real(U.col(j));
      adapt = RealSubspace::span(B);
    }
    HeisenbergChart chart = heisenberg_chart(x0, adapt);
    CVec dir = random_sphere(rng, n);
    std::vector<double> lr, le;
    for (int i = 0; i < 5; ++i) {
      const double r = 0.1 * std::pow(2.0, -i);
      const CVec z = r * dir;
      // alpha = Im(conj(u) . du) from central differences of the chart map.
      const double h = 1e-6;
      const Vec pq = to_real(z);
      Vec coef(2 * n + 1);
      auto at = [&](double th, const Vec& v) { return chart.point(th, to_complex(v)).coords(); };
      const CVec u0 = at(0.0, pq);
      coef(0) = (u0.dot((at(h, pq) - at(-h, pq)) / (2 * h))).imag();
      for (int j = 0; j < 2 * n; ++j) {
        Vec e = Vec::Zero(2 * n);
        e(j) = h;
        coef(1 + j) = (u0.dot((at(0.0, pq + e) - at(0.0, pq - e)) / (2 * h))).imag();
      }
      Vec flat(2 * n + 1);
      flat(0) = 1.0;
      flat.segment(1, n) = -pq.tail(n);
      flat.segment(1 + n, n) = pq.head(n);
      lr.push_back(std::log(r));
      le.push_back(std::log((coef - flat).norm()));
    }
    const double mx = std::accumulate(lr.begin(), lr.end(), 0.0) / lr.size();
    const double my = std::accumulate(le.begin(), le.end(), 0.0) / le.size();
    double sxx = 0, sxy = 0;
    for (size_t i = 0; i < lr.size(); ++i) {
      sxx += (lr[i] - mx) * (lr[i] - mx);
      sxy += (lr[i] - mx) * (le[i] - my);
    }
    const double slope = sxy / sxx;
    worst_slope = std::min(worst_slope, slope);
    if (!(slope >= 1.9)) ++s.failures;
    ++s.cases;
  }
  s.worst = worst_slope;
  s.detail = "minimum fitted slope " + fmt(worst_slope) + " (required >= 1.9)";
  return s;
}

namespace {

// Phase with a single real critical point at t0: Re S = sum alpha_m (1 - cos m tau)
// + beta_m (sin m tau - m sin tau), Im S = b (1 - cos tau), plus a real coupling
// gamma sin tau_1 sin tau_2 in two dimensions.
struct RandomPhase {
  int d = 1;
  Vec t0;
  std::vector<std::vector<double>> alpha, beta;
  Vec b;
  double gamma = 0.0;
  std::vector<double> amp;  // a(t) = 1 + amp0 cos(t_1 - amp1) (+ amp2 sin t_d)

  cplx value(const Vec& t) const {
    cplx s = 0.0;
    Vec tau = t - t0;
    for (int j = 0; j < d; ++j) {
      for (size_t m = 0; m < alpha[j].size(); ++m) {
        const double mm = static_cast<double>(m + 1);
        s += alpha[j][m] * (1 - std::cos(mm * tau(j))) + beta[j][m] * (std::sin(mm * tau(j)) - mm * std::sin(tau(j)));
      }
      s += cplx(0, b(j) * (1 - std::cos(tau(j))));
    }
    if (d == 2) s += gamma * std::sin(tau(0)) * std::sin(tau(1));
    return s;
  }
  CVec grad(const Vec& t) const {
    CVec g(d);
    Vec tau = t - t0;
    for (int j = 0; j < d; ++j) {
      cplx v = 0.0;
      for (size_t m = 0; m < alpha[j].size(); ++m) {
        const double mm = static_cast<double>(m + 1);
        v += alpha[j][m] * mm * std::sin(mm * tau(j)) + beta[j][m] * (mm * std::cos(mm * tau(j)) - mm * std::cos(tau(j)));
      }
      v += cplx(0, b(j) * std::sin(tau(j)));
      g(j) = v;
    }
    if (d == 2) {
      g(0) += gamma * std::cos(tau(0)) * std::sin(tau(1));
      g(1) += gamma * std::sin(tau(0)) * std::cos(tau(1));
    }
    return g;
  }
  CMat hess(const Vec& t) const {
    CMat H = CMat::Zero(d, d);
    Vec tau = t - t0;
    for (int j = 0; j < d; ++j) {
      cplx v = 0.0;
      for (size_t m = 0; m < alpha[j].size(); ++m) {
        const double mm = static_cast<double>(m + 1);
        v += alpha[j][m] * mm * mm * std::cos(mm * tau(j)) +
             beta[j][m] * (-mm * mm * std::sin(mm * tau(j)) + mm * std::sin(tau(j)));
      }
      v += cplx(0, b(j) * std::cos(tau(j)));
      H(j, j) = v;
    }
    if (d == 2) {
      H(0, 0) += -gamma * std::sin(tau(0)) * std::sin(tau(1));
      H(1, 1) += -gamma * std::sin(tau(0)) * std::sin(tau(1));
      H(0, 1) = H(1, 0) = gamma * std::cos(tau(0)) * std::cos(tau(1));
    }
    return H;
  }
  cplx amplitude(const Vec& t) const {
    cplx a = 1.0 + amp[0] * std::cos(t(0) - amp[1]);
    if (d == 2) a += cplx(0, amp[2]) * std::sin(t(1));
    return a;
  }
};

cplx torus_quadrature(const RandomPhase& ph, double k, int N) {
  const double h = 2 * kPi / N;
  long total = ph.d == 1 ? N : static_cast<long>(N) * N;
  cplx s = 0.0;
  Vec t(ph.d);
  for (long idx = 0; idx < total; ++idx) {
    t(0) = h * (idx % N);
    if (ph.d == 2) t(1) = h * (idx / N);
    s += std::exp(cplx(0, k) * ph.value(t)) * ph.amplitude(t);
  }
  return s * std::pow(h, ph.d);
}

// Doubles the node count until two successive rules agree to 1e-13.
cplx converged_quadrature(const RandomPhase& ph, double k) {
  int N = ph.d == 1 ? 256 : 128;
  cplx prev = torus_quadrature(ph, k, N);
  for (int it = 0; it < 8; ++it) {
    N *= 2;
    const cplx next = torus_quadrature(ph, k, N);
    if (std::abs(next - prev) <= 1e-13 * std::abs(next)) return next;
    prev = next;
  }
  return prev;
}

}  // namespace

SuiteResult suite_stationary_phase(int phases) {
  SuiteResult s{"stationary phase oracle vs quadrature"};
  Rng rng(18);
  double worst_slope = -1e9;
  for (int c = 0; c < phases; ++c) {
    RandomPhase ph;
    ph.d = c < phases / 2 ? 1 : 2;
    ph.t0 = Vec(ph.d);
    ph.b = Vec(ph.d);
    ph.alpha.resize(ph.d);
    ph.beta.resize(ph.d);
    for (int j = 0; j < ph.d; ++j) {
      ph.t0(j) = unif(rng, 0, 2 * kPi);
      ph.b(j) = unif(rng, 0.5, 1.5);
      const int modes = uint_in(rng, 1, 3);
      for (int m = 0; m < modes; ++m) {
        ph.alpha[j].push_back(unif(rng, -0.5, 0.5) / (m + 1));
        ph.beta[j].push_back(unif(rng, -0.3, 0.3) / (m + 1));
      }
    }
    ph.gamma = unif(rng, -0.3, 0.3);
    ph.amp = {unif(rng, 0, 0.5), unif(rng, 0, 2 * kPi), unif(rng, 0, 0.5)};
    PhaseFunction pf;
    pf.dim = ph.d;
    pf.value = [&ph](const Vec& t) { return ph.value(t); };
    pf.gradient = [&ph](const Vec& t) { return ph.grad(t); };
    pf.hessian = [&ph](const Vec& t) { return ph.hess(t); };
    std::vector<double> lk, le;
    bool bad = false;
    for (double k : {100.0, 200.0, 400.0, 800.0}) {
      StationaryPhaseResult sp = stationary_phase_oracle(pf, [&ph](const Vec& t) { return ph.amplitude(t); }, k);
      if (sp.points.size() != 1) bad = true;
      const cplx q = converged_quadrature(ph, k);
      lk.push_back(std::log(k));
      le.push_back(std::log(std::abs(sp.value - q) / std::abs(q)));
    }
    const double mx = std::accumulate(lk.begin(), lk.end(), 0.0) / lk.size();
    const double my = std::accumulate(le.begin(), le.end(), 0.0) / le.size();
    double sxx = 0, sxy = 0;
    for (size_t i = 0; i < lk.size(); ++i) {
      sxx += (lk[i] - mx) * (lk[i] - mx);
      sxy += (lk[i] - mx) * (le[i] - my);
    }
    const double slope = sxy / sxx;
    worst_slope = std::max(worst_slope, slope);
    if (bad || !(slope <= -0.9)) ++s.failures;
    ++s.cases;
  }
  s.worst = worst_slope;
  s.detail = "worst fitted error slope " + fmt(worst_slope) + " (required <= -0.9)";
  return s;
}

namespace {

// Gauss-Legendre nodes and weights on [0, 1].
void gauss_legendre(int m, std::vector<double>& x, std::vector<double>& w) {
  x.assign(m, 0.0);
  w.assign(m, 0.0);
  for (int i = 0; i < m; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (m + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int j = 2; j <= m; ++j) {
        const double p2 = ((2.0 * j - 1) * z * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      if (m == 1) p0 = 1.0;
      dp = m * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::fabs(dz) < 1e-16) break;
    }
    x[i] = 0.5 * (1.0 - z);
    w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
}

}  // namespace

SuiteResult suite_reproducing_kernel(int cases) {
  SuiteResult s{"kernel reproducing property"};
  Rng rng(19);
  for (int c = 0; c < cases; ++c) {
    const int n = 1 + c % 2;
    const int k = uint_in(rng, 0, 10);
    std::vector<int> alpha(n + 1, 0);
    for (int i = 0; i < k; ++i) ++alpha[uint_in(rng, 0, n)];
    const CVec x = random_sphere(rng, n + 1);
    SzegoKernel K(n);
    auto f = [&](const CVec& y) {
      cplx v = 1.0;
      for (int l = 0; l <= n; ++l) v *= ipow(y(l), alpha[l]);
      return v;
    };
    // y_l = sqrt(s_l) e^{i phi_l}, s on the simplex; d sigma = 2^{-n} ds dphi.
    const int M = k + 2;  // angle nodes: exact for frequencies below M
    const int G = k / 2 + 3;
    std::vector<double> gx, gw;
    gauss_legendre(G, gx, gw);
    const double hphi = 2 * kPi / M;
    long nang = 1;
    for (int l = 0; l <= n; ++l) nang *= M;
    cplx total = 0.0;
    auto angular = [&](const Vec& sv) {
      cplx acc = 0.0;
      CVec y(n + 1);
      for (long a = 0; a < nang; ++a) {
        long r = a;
        for (int l = 0; l <= n; ++l) {
          y(l) = std::polar(std::sqrt(std::max(0.0, sv(l))), hphi * (r % M));
          r /= M;
        }
        acc += K.eval(k, x, y) * f(y);
      }
      return acc * std::pow(hphi, n + 1);
    };
    Vec sv(n + 1);
    if (n == 1) {
      for (int i = 0; i < G; ++i) {
        sv << gx[i], 1 - gx[i];
        total += gw[i] * angular(sv);
      }
    } else {
      for (int i = 0; i < G; ++i)
        for (int j = 0; j < G; ++j) {
          const double u = gx[i], v = gx[j];
          sv << 1 - u - (1 - u) * v, u, (1 - u) * v;
          total += gw[i] * gw[j] * (1 - u) * angular(sv);
        }
    }
    total *= std::pow(2.0, -n) / (2 * kPi);
    const cplx fx = f(x);
    const double err = std::abs(total - fx) / std::max(1.0, std::abs(fx));
    s.worst = std::max(s.worst, err);
    if (err > 1e-6) ++s.failures;
    ++s.cases;
  }
  s.detail = "max error " + fmt(s.worst) + " (tolerance 1e-6, n <= 2, k <= 10)";
  return s;
}

std::vector<SuiteResult> run_all_suites() {
  return {suite_tangent_roundtrip(),    suite_rt_constraints(),   suite_s_positivity(),
          suite_orbit_volume_identity(), suite_gaussian_fourier(), suite_iota_invariant(),
          suite_chart_remainder(),      suite_stationary_phase(), suite_reproducing_kernel()};
}
