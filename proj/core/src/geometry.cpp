#include "szl/geometry.hpp"

#include <cmath>
#include <numeric>

namespace szl {

BundlePoint::BundlePoint(CVec coords, double tol) : c_(std::move(coords)) {
  if (c_.size() < 2) throw Error("BundlePoint needs at least two coordinates");
  if (std::abs(c_.norm() - 1.0) > tol) throw Error("BundlePoint must have unit norm");
}

BundlePoint BundlePoint::normalized(const CVec& v) {
  const double r = v.norm();
  if (r == 0.0) throw Error("cannot normalize the zero vector");
  return BundlePoint(v / r);
}

BundlePoint BundlePoint::rotated(double theta) const {
  return BundlePoint(c_ * std::polar(1.0, theta));
}

cplx hermitian(const CVec& x, const CVec& y) { return y.dot(x); }

bool ProjectivePoint::same_as(const ProjectivePoint& other, double tol) const {
  // |<a,b>| = 1 for unit representatives of the same line.
  return std::abs(1.0 - std::abs(hermitian(rep, other.rep))) <= tol;
}

ProjectivePoint hopf_project(const BundlePoint& x) {
  const CVec& c = x.coords();
  Eigen::Index imax = 0;
  c.cwiseAbs().maxCoeff(&imax);
  const cplx ph = std::abs(c(imax)) > 0 ? std::conj(c(imax)) / std::abs(c(imax)) : 1.0;
  return {c * ph};
}

BundlePoint lift(const ProjectivePoint& m) { return BundlePoint::normalized(m.rep); }

CVec horizontal_part(const BundlePoint& x, const CVec& v) {
  return v - hermitian(v, x.coords()) * x.coords();
}

HeisenbergChart::HeisenbergChart(BundlePoint center, CMat unitary_frame, CMat rotation)
    : center_(std::move(center)), U_(std::move(unitary_frame)), R_(std::move(rotation)) {
  const int n = center_.n();
  if (U_.rows() != n + 1 || U_.cols() != n + 1 || R_.rows() != n || R_.cols() != n)
    throw Error("HeisenbergChart: frame dimensions");
  if ((U_ * U_.adjoint() - CMat::Identity(n + 1, n + 1)).norm() > 1e-10 ||
      (R_ * R_.adjoint() - CMat::Identity(n, n)).norm() > 1e-10)
    throw Error("HeisenbergChart: frames must be unitary");
  CVec e1 = U_ * center_.coords();
  if (std::abs(e1(0) - 1.0) > 1e-10) throw Error("HeisenbergChart: frame must send center to e_1");
}

BundlePoint HeisenbergChart::point(double theta, const CVec& z) const {
  const int n = this->n();
  CVec v(n + 1);
  v(0) = 1.0;
  v.tail(n) = R_ * z;
  v /= std::sqrt(1.0 + z.squaredNorm());
  return BundlePoint(std::polar(1.0, theta) * (U_.adjoint() * v), 1e-10);
}

CMat HeisenbergChart::horizontal_frame() const {
  const int n = this->n();
  CMat block = CMat::Zero(n + 1, n);
  block.bottomRows(n) = R_;
  return U_.adjoint() * block;
}

CVec HeisenbergChart::coords_of(const CVec& horizontal) const {
  return horizontal_frame().adjoint() * horizontal;
}

Vec HeisenbergChart::alpha_pullback(const CVec& z) const {
  const int n = this->n();
  Vec a(1 + 2 * n);
  a(0) = 1.0;
  const double d = 1.0 + z.squaredNorm();
  // alpha = d theta + Im(conj(z) dz) / (1 + |z|^2)
  for (int j = 0; j < n; ++j) {
    a(1 + j) = -z(j).imag() / d;
    a(1 + n + j) = z(j).real() / d;
  }
  return a;
}

HeisenbergChart heisenberg_chart(const BundlePoint& x0, const std::optional<RealSubspace>& adapt_to) {
  const int n = x0.n();
  CMat seed(n + 1, n + 1);
  seed.col(0) = x0.coords();
  // Fill with the standard basis vectors least aligned with x0.
  std::vector<int> order(n + 1);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(x0(a)) < std::abs(x0(b));
  });
  for (int j = 0; j < n; ++j) seed.col(j + 1) = CVec::Unit(n + 1, order[j]);
  Eigen::HouseholderQR<CMat> qr(seed);
  CMat V = qr.householderQ();
  // The first column spans x0 up to a phase; pin it to x0 and re-orthonormalize.
  V.col(0) = x0.coords();
  for (int j = 1; j <= n; ++j) {
    for (int i = 0; i < j; ++i) V.col(j) -= V.col(i).dot(V.col(j)) * V.col(i);
    V.col(j).normalize();
  }
  CMat U = V.adjoint();
  CMat R = CMat::Identity(n, n);
  if (adapt_to) {
    if (adapt_to->ambient_dim() != 2 * n) throw Error("heisenberg_chart: adapt_to dimension");
    if (!is_lagrangian(*adapt_to)) throw GeometryError("heisenberg_chart: adapt_to is not Lagrangian");
    Mat tau = adapt_to->orthonormal_basis();
    CMat Tm(n, n);
    for (int j = 0; j < n; ++j) Tm.col(j) = to_complex(tau.col(j));
    R = cplx(0, -1) * Tm;
  }
  return HeisenbergChart(x0, U, R);
}

BundlePoint displace(const HeisenbergChart& chart, const CVec& w, double k) {
  if (!(k > 0)) throw Error("displace: k must be positive");
  if (w.size() != chart.n()) throw Error("displace: w has wrong dimension");
  CVec z = w / std::sqrt(k);
  if (z.norm() > HeisenbergChart::kRadius) throw Error("displace: point outside the chart domain");
  return chart.point(0.0, z);
}

TorusAction::TorusAction(Eigen::MatrixXi weights, Vec shift) : W_(std::move(weights)), shift_(std::move(shift)) {
  if (shift_.size() != W_.rows()) throw Error("TorusAction: shift must have one entry per circle factor");
  if (W_.cols() < 2) throw Error("TorusAction: need at least two coordinates");
}

CVec TorusAction::diagonal(const Vec& s) const {
  if (s.size() != g()) throw Error("TorusAction: parameter dimension");
  Vec phase = W_.cast<double>().transpose() * s;
  const double common = shift_.dot(s);
  CVec d(phase.size());
  for (Eigen::Index l = 0; l < phase.size(); ++l) d(l) = std::polar(1.0, phase(l) - common);
  return d;
}

CVec TorusAction::act(const Vec& s, const CVec& v) const { return diagonal(s).cwiseProduct(v); }

BundlePoint TorusAction::act(const Vec& s, const BundlePoint& x) const {
  return BundlePoint(act(s, x.coords()), 1e-10);
}

CVec TorusAction::generator(int j, const BundlePoint& x) const {
  CVec v(x.coords().size());
  for (Eigen::Index l = 0; l < v.size(); ++l)
    v(l) = cplx(0, W_(j, l) - shift_(j)) * x(l);
  return v;
}

Vec moment_map(const TorusAction& action, const BundlePoint& x) {
  Vec mod2 = x.coords().cwiseAbs2();
  return action.weights().cast<double>() * mod2 - action.shift();
}

namespace {

long long bareiss_det(Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic> M) {
  const Eigen::Index n = M.rows();
  if (n == 0) return 1;
  long long sign = 1, prev = 1;
  for (Eigen::Index k = 0; k < n - 1; ++k) {
    if (M(k, k) == 0) {
      Eigen::Index p = k + 1;
      while (p < n && M(p, k) == 0) ++p;
      if (p == n) return 0;
      M.row(k).swap(M.row(p));
      sign = -sign;
    }
    for (Eigen::Index i = k + 1; i < n; ++i)
      for (Eigen::Index j = k + 1; j < n; ++j)
        M(i, j) = (M(i, j) * M(k, k) - M(i, k) * M(k, j)) / prev;
    prev = M(k, k);
  }
  return sign * M(n - 1, n - 1);
}

}  // namespace

long gcd_of_maximal_minors(const Eigen::MatrixXi& D) {
  const int r = static_cast<int>(D.rows()), g = static_cast<int>(D.cols());
  if (g == 0) return 1;
  if (r < g) return 0;
  std::vector<int> idx(g);
  std::iota(idx.begin(), idx.end(), 0);
  long long acc = 0;
  while (true) {
    Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic> M(g, g);
    for (int i = 0; i < g; ++i)
      for (int j = 0; j < g; ++j) M(i, j) = D(idx[i], j);
    acc = std::gcd(acc, std::llabs(bareiss_det(M)));
    int i = g - 1;
    while (i >= 0 && idx[i] == r - g + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < g; ++j) idx[j] = idx[j - 1] + 1;
  }
  return static_cast<long>(acc);
}

long stabilizer_order(const TorusAction& action, const ProjectivePoint& m, double tol) {
  std::vector<int> support;
  for (Eigen::Index l = 0; l < m.rep.size(); ++l)
    if (std::abs(m.rep(l)) > tol) support.push_back(static_cast<int>(l));
  const int g = action.g();
  if (support.size() < 2) return g == 0 ? 1 : 0;
  // s stabilizes m iff (w_l - w_{l0}) . s is in 2 pi Z for every l in the support.
  Eigen::MatrixXi D(support.size() - 1, g);
  for (size_t i = 1; i < support.size(); ++i)
    D.row(i - 1) = (action.weights().col(support[i]) - action.weights().col(support[0])).transpose();
  return gcd_of_maximal_minors(D);
}

Mat orbit_tangent_vectors(const TorusAction& action, const HeisenbergChart& chart) {
  const int g = action.g();
  Mat K(2 * chart.n(), g);
  for (int j = 0; j < g; ++j)
    K.col(j) = chart.real_coords_of(horizontal_part(chart.center(), action.generator(j, chart.center())));
  return K;
}

OrbitData effective_potential(const TorusAction& action, const ProjectivePoint& m, int nodes_per_dim) {
  const BundlePoint x = lift(m);
  if (x.n() != action.n()) throw Error("effective_potential: dimension mismatch");
  if (moment_map(action, x).cwiseAbs().maxCoeff() > 1e-8)
    throw GeometryError("effective_potential: point is not in the zero locus of the moment map");
  const int g = action.g();
  const long order = stabilizer_order(action, m);
  if (order == 0) throw GeometryError("effective_potential: stabilizer is not finite");
  HeisenbergChart chart = heisenberg_chart(x);
  Mat K = orbit_tangent_vectors(action, chart);
  if (numerical_rank(K, default_tolerances().rank) < g)
    throw GeometryError("effective_potential: orbit is not locally free");

  // Orbit volume by the periodic trapezoidal rule over the torus.
  const double h = 2.0 * kPi / nodes_per_dim;
  long total = 1;
  for (int j = 0; j < g; ++j) total *= nodes_per_dim;
  double vol = 0.0;
  Vec s(g);
  for (long idx = 0; idx < total; ++idx) {
    long r = idx;
    for (int j = 0; j < g; ++j) {
      s(j) = h * static_cast<double>(r % nodes_per_dim);
      r /= nodes_per_dim;
    }
    BundlePoint y = action.act(s, x);
    CMat V(x.coords().size(), g);
    for (int j = 0; j < g; ++j) V.col(j) = horizontal_part(y, action.generator(j, y));
    Mat gram = (V.adjoint() * V).real();
    vol += std::sqrt(std::max(0.0, gram.determinant()));
  }
  vol *= std::pow(h, g);

  OrbitData out;
  out.base_point = m;
  out.stabilizer_order = order;
  out.v_eff = vol / static_cast<double>(order);
  out.orbit_tangent = RealSubspace::span(K);
  return out;
}

}  // namespace szl
