#include "szl/legendrian.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace szl {

namespace {

double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a < 0) a += 2.0 * kPi;
  if (a >= 2.0 * kPi) a -= 2.0 * kPi;
  return a;
}

double torus_distance(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    double d = std::fabs(wrap_angle(a(i) - b(i)));
    d = std::min(d, 2.0 * kPi - d);
    s += d * d;
  }
  return std::sqrt(s);
}

// Enumerate the points of a uniform grid with N nodes per circle factor.
template <class F>
void for_each_grid_point(int dims, int N, F&& f) {
  long total = 1;
  for (int j = 0; j < dims; ++j) total *= N;
  std::vector<int> idx(dims, 0);
  for (long c = 0; c < total; ++c) {
    long r = c;
    for (int j = 0; j < dims; ++j) {
      idx[j] = static_cast<int>(r % N);
      r /= N;
    }
    f(c, idx);
  }
}

}  // namespace

LegendrianImmersion::LegendrianImmersion(std::string name, int dim, int n, MapFn map, JacFn jacobian,
                                         WeightFn f_lambda)
    : name_(std::move(name)), dim_(dim), n_(n), map_(std::move(map)), jac_(std::move(jacobian)),
      f_(std::move(f_lambda)) {
  if (dim_ < 1 || n_ < 1) throw Error("LegendrianImmersion: dimensions must be positive");
  if (!map_) throw Error("LegendrianImmersion: map is required");
}

CMat LegendrianImmersion::jacobian(const Vec& t) const {
  if (jac_) return jac_(t);
  const double h = 1e-6;
  CMat J(n_ + 1, dim_);
  for (int i = 0; i < dim_; ++i) {
    Vec tp = t, tm = t;
    tp(i) += h;
    tm(i) -= h;
    J.col(i) = (map_(tp) - map_(tm)) / (2.0 * h);
  }
  return J;
}

LegendrianImmersion LegendrianImmersion::with_weight(WeightFn f) const {
  LegendrianImmersion out = *this;
  out.f_ = std::move(f);
  out.weight_degree_ = -1;
  return out;
}

LegendrianImmersion LegendrianImmersion::with_trig_degree(int degree, int weight_degree) const {
  LegendrianImmersion out = *this;
  out.trig_degree_ = degree;
  out.weight_degree_ = weight_degree;
  return out;
}

LegendrianImmersion LegendrianImmersion::transformed(const CMat& unitary, const std::string& name) const {
  if ((unitary * unitary.adjoint() - CMat::Identity(n_ + 1, n_ + 1)).norm() > 1e-10)
    throw Error("transformed: matrix is not unitary");
  LegendrianImmersion out = *this;
  out.name_ = name;
  auto m = map_;
  out.map_ = [m, unitary](const Vec& t) -> CVec { return unitary * m(t); };
  if (jac_) {
    auto j = jac_;
    out.jac_ = [j, unitary](const Vec& t) -> CMat { return unitary * j(t); };
  }
  return out;
}

LegendrianImmersion builtin_knot(double a) {
  if (a < -kPi - 1e-12 || a > kPi + 1e-12) throw Error("builtin_knot: a must lie in [-pi, pi]");
  const cplx ea = std::polar(1.0, a);
  auto map = [ea](const Vec& t) -> CVec {
    CVec v(2);
    v << std::cos(t(0)), ea * std::sin(t(0));
    return v;
  };
  auto jac = [ea](const Vec& t) -> CMat {
    CMat J(2, 1);
    J << -std::sin(t(0)), ea * std::cos(t(0));
    return J;
  };
  std::ostringstream nm;
  nm << "knot(a=" << a << ")";
  return LegendrianImmersion(nm.str(), 1, 1, map, jac).with_trig_degree(1);
}

LegendrianImmersion builtin_torus_product(int n, const Vec& a) {
  if (n < 1) throw Error("builtin_torus_product: n must be positive");
  if (a.size() != n) throw Error("builtin_torus_product: need one angle per factor");
  if (n == 1) return builtin_knot(a(0));
  const double c = 1.0 / std::sqrt(static_cast<double>(n));
  const Vec aa = a;
  auto map = [n, c, aa](const Vec& t) -> CVec {
    double phi = 0.0;
    for (int j = 1; j < n; ++j) phi += t(j);
    const cplx e = std::polar(c, -phi);
    CVec v(n + 1);
    v(0) = e * std::cos(t(0));
    v(1) = e * std::polar(1.0, aa(0)) * std::sin(t(0));
    for (int j = 1; j < n; ++j) v(j + 1) = std::polar(c, aa(j) + t(j));
    return v;
  };
  auto jac = [n, c, aa, map](const Vec& t) -> CMat {
    CVec v = map(t);
    double phi = 0.0;
    for (int j = 1; j < n; ++j) phi += t(j);
    const cplx e = std::polar(c, -phi);
    CMat J = CMat::Zero(n + 1, n);
    J(0, 0) = -e * std::sin(t(0));
    J(1, 0) = e * std::polar(1.0, aa(0)) * std::cos(t(0));
    const cplx I(0, 1);
    for (int j = 1; j < n; ++j) {
      J(0, j) = -I * v(0);
      J(1, j) = -I * v(1);
      J(j + 1, j) = I * v(j + 1);
    }
    return J;
  };
  std::ostringstream nm;
  nm << "torus_product(n=" << n << ")";
  return LegendrianImmersion(nm.str(), n, n, map, jac).with_trig_degree(1);
}

LegendrianImmersion builtin_torus_knot(int m0, int m1) {
  if (static_cast<long>(m0) * m1 >= 0) throw Error("builtin_torus_knot: weights must have opposite signs");
  const double r0 = std::sqrt(-static_cast<double>(m1) / (m0 - m1));
  const double r1 = std::sqrt(static_cast<double>(m0) / (m0 - m1));
  auto map = [=](const Vec& t) -> CVec {
    CVec v(2);
    v << std::polar(r0, m0 * t(0)), std::polar(r1, m1 * t(0));
    return v;
  };
  auto jac = [=](const Vec& t) -> CMat {
    CMat J(2, 1);
    J << cplx(0, m0) * std::polar(r0, m0 * t(0)), cplx(0, m1) * std::polar(r1, m1 * t(0));
    return J;
  };
  std::ostringstream nm;
  nm << "torus_knot(" << m0 << "," << m1 << ")";
  return LegendrianImmersion(nm.str(), 1, 1, map, jac).with_trig_degree(std::max(std::abs(m0), std::abs(m1)));
}

std::vector<std::string> builtin_names() { return {"knot", "torus_product", "torus_knot"}; }

LegendrianImmersion make_builtin(const std::string& family, const Vec& params) {
  if (family == "knot") {
    if (params.size() != 1) throw Error("knot takes one parameter a");
    return builtin_knot(params(0));
  }
  if (family == "torus_product") {
    if (params.size() < 1) throw Error("torus_product takes angles a_1..a_n");
    return builtin_torus_product(static_cast<int>(params.size()), params);
  }
  if (family == "torus_knot") {
    if (params.size() != 2) throw Error("torus_knot takes two integer weights");
    return builtin_torus_knot(static_cast<int>(std::lround(params(0))), static_cast<int>(std::lround(params(1))));
  }
  throw Error("unknown Legendrian family '" + family + "'");
}

double riemannian_density(const LegendrianImmersion& L, const Vec& t) {
  CMat J = L.jacobian(t);
  Mat G = (J.adjoint() * J).real();
  const double d = G.determinant();
  if (!(d > 1e-24)) throw GeometryError("riemannian_density: immersion degenerates");
  return std::sqrt(d);
}

double legendrian_defect(const LegendrianImmersion& L, int samples_per_dim) {
  const int d = L.dim();
  const double h = 2.0 * kPi / samples_per_dim;
  double worst = 0.0;
  Vec t(d);
  for_each_grid_point(d, samples_per_dim, [&](long, const std::vector<int>& idx) {
    for (int j = 0; j < d; ++j) t(j) = h * idx[j];
    CVec x = L.map(t);
    CMat J = L.jacobian(t);
    for (int j = 0; j < d; ++j) worst = std::max(worst, std::fabs(x.dot(J.col(j)).imag()));
  });
  return worst;
}

double immersion_margin(const LegendrianImmersion& L, int samples_per_dim) {
  const int d = L.dim();
  const double h = 2.0 * kPi / samples_per_dim;
  double worst = std::numeric_limits<double>::infinity();
  Vec t(d);
  for_each_grid_point(d, samples_per_dim, [&](long, const std::vector<int>& idx) {
    for (int j = 0; j < d; ++j) t(j) = h * idx[j];
    CMat J = L.jacobian(t);
    Mat Jr(2 * J.rows(), d);
    Jr << J.real(), J.imag();
    Eigen::JacobiSVD<Mat> svd(Jr);
    worst = std::min(worst, svd.singularValues()(d - 1));
  });
  return worst;
}

ReturnSearchReport find_return_elements_report(const BundlePoint& x, const LegendrianImmersion& L,
                                               const std::optional<TorusAction>& action,
                                               const ReturnSearchOptions& opt) {
  if (x.n() != L.n()) throw Error("find_return_elements: dimension mismatch");
  const Tolerances& tol = default_tolerances();
  const int g = action ? action->g() : 0;
  const int d = L.dim();
  const int N = opt.seeds_per_circle;
  const double h = 2.0 * kPi / N;
  const int m = g + d;
  ReturnSearchReport rep;

  // Objective 1 - |<g.x, iota(t)>| on the seed grid.
  std::vector<CVec> gx, pts;
  if (g > 0) {
    for_each_grid_point(g, N, [&](long, const std::vector<int>& idx) {
      Vec s(g);
      for (int j = 0; j < g; ++j) s(j) = h * idx[j];
      gx.push_back(action->act(s, x.coords()));
    });
  } else {
    gx.push_back(x.coords());
  }
  for_each_grid_point(d, N, [&](long, const std::vector<int>& idx) {
    Vec t(d);
    for (int j = 0; j < d; ++j) t(j) = h * idx[j];
    pts.push_back(L.map(t));
  });
  const long ng = static_cast<long>(gx.size()), nt = static_cast<long>(pts.size());
  std::vector<double> F(ng * nt);
  for (long a = 0; a < ng; ++a)
    for (long b = 0; b < nt; ++b) F[a + ng * b] = 1.0 - std::abs(hermitian(gx[a], pts[b]));

  auto flat = [&](const std::vector<int>& idx) {
    long c = 0, mul = 1;
    for (int j = 0; j < m; ++j) {
      c += mul * idx[j];
      mul *= N;
    }
    return c;
  };

  auto residual = [&](const Vec& y, Vec* r, Mat* J) {
    const double hh = y(0);
    Vec s = y.segment(1, g), t = y.tail(d);
    CVec gxv = g > 0 ? action->act(s, x.coords()) : x.coords();
    const cplx eh = std::polar(1.0, hh);
    CVec res = eh * gxv - L.map(t);
    r->resize(2 * res.size());
    *r << res.real(), res.imag();
    if (J) {
      CMat Jc(res.size(), 1 + m);
      Jc.col(0) = cplx(0, 1) * eh * gxv;
      for (int j = 0; j < g; ++j) {
        BundlePoint p(gxv, 1e-9);
        Jc.col(1 + j) = eh * action->generator(j, p);
      }
      Jc.rightCols(d) = -L.jacobian(t);
      J->resize(2 * res.size(), 1 + m);
      *J << Jc.real(), Jc.imag();
    }
  };

  std::vector<Vec> found;
  for_each_grid_point(m, N, [&](long c, const std::vector<int>& idx) {
    const double f0 = F[c];
    if (f0 > 0.5) return;
    // Keep discrete local minima only.
    std::vector<int> nb = idx;
    for (int j = 0; j < m; ++j) {
      for (int dlt : {-1, 1}) {
        nb[j] = (idx[j] + dlt + N) % N;
        if (F[flat(nb)] < f0) return;
        nb[j] = idx[j];
      }
    }
    ++rep.seeds_tried;
    Vec y(1 + m);
    for (int j = 0; j < m; ++j) y(1 + j) = h * idx[j];
    {
      const long a = c % ng, b = c / ng;
      y(0) = std::arg(hermitian(pts[b], gx[a]));
    }
    Vec r;
    Mat J;
    residual(y, &r, &J);
    double mu = 1e-3;
    for (int it = 0; it < opt.max_iterations && r.norm() > tol.newton; ++it) {
      Mat A = J.transpose() * J;
      A.diagonal().array() += mu;
      Vec step = -A.ldlt().solve(J.transpose() * r);
      Vec y2 = y + step, r2;
      residual(y2, &r2, nullptr);
      if (r2.norm() < r.norm()) {
        y = y2;
        mu = std::max(mu / 4.0, 1e-15);
        residual(y, &r, &J);
        if (step.norm() < 1e-15) break;
      } else {
        mu *= 8.0;
        if (mu > 1e8) break;
      }
    }
    if (r.norm() > tol.accept_root) {
      ++rep.seeds_not_converged;
      return;
    }
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = wrap_angle(y(i));
    for (const Vec& f : found)
      if (torus_distance(f, y) < tol.dedup) return;
    residual(y, &r, &J);
    if (numerical_rank(J, 1e-7 * std::max(1.0, J.norm())) < 1 + m)
      throw GeometryError("find_return_elements: solution set is not discrete (transversality fails)");
    found.push_back(y);
  });

  std::sort(found.begin(), found.end(), [](const Vec& a, const Vec& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i)
      if (std::fabs(a(i) - b(i)) > 1e-9) return a(i) < b(i);
    return false;
  });
  for (const Vec& y : found) {
    ReturnElement e;
    e.h = y(0);
    e.g_params = y.segment(1, g);
    e.t_params = y.tail(d);
    e.target = L.point(e.t_params);
    Vec r;
    residual(y, &r, nullptr);
    e.residual = r.norm();
    rep.elements.push_back(std::move(e));
  }
  return rep;
}

std::vector<ReturnElement> find_return_elements(const BundlePoint& x, const LegendrianImmersion& L,
                                                const std::optional<TorusAction>& action,
                                                const ReturnSearchOptions& opt) {
  return find_return_elements_report(x, L, action, opt).elements;
}

namespace {

Mat tangent_real_coords(const HeisenbergChart& chart, const CMat& J) {
  Mat out(2 * chart.n(), J.cols());
  for (Eigen::Index j = 0; j < J.cols(); ++j)
    out.col(j) = chart.real_coords_of(horizontal_part(chart.center(), J.col(j)));
  return out;
}

Mat dphi_on_lambda(const TorusAction& action, const CVec& x, const CMat& J) {
  const int g = action.g();
  Mat D(g, J.cols());
  for (int l = 0; l < g; ++l)
    for (Eigen::Index j = 0; j < J.cols(); ++j) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < x.size(); ++i)
        s += 2.0 * action.weights()(l, i) * (std::conj(x(i)) * J(i, j)).real();
      D(l, j) = s;
    }
  return D;
}

}  // namespace

HeisenbergChart adapted_chart(const LegendrianImmersion& L, const Vec& t) {
  BundlePoint x = L.point(t);
  HeisenbergChart base = heisenberg_chart(x);
  Mat tl = tangent_real_coords(base, L.jacobian(t));
  return heisenberg_chart(x, RealSubspace::span(tl));
}

FrameAt frame_at(const LegendrianImmersion& L, const Vec& t, const std::optional<TorusAction>& action) {
  const double rtol = default_tolerances().rank;
  HeisenbergChart chart = adapted_chart(L, t);
  const int n = chart.n();
  const CMat J = L.jacobian(t);
  Mat tl = tangent_real_coords(chart, J);
  FrameData fd;
  fd.lambda_tangent = RealSubspace::span(tl);
  if (action && action->g() > 0) {
    const int g = action->g();
    Mat K = orbit_tangent_vectors(*action, chart);
    if (numerical_rank(K, rtol) < g) throw GeometryError("frame_at: orbit is not locally free");
    Mat D = dphi_on_lambda(*action, chart.center().coords(), J);
    Eigen::JacobiSVD<Mat> svd(D, Eigen::ComputeFullV);
    int r = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()(i) > 1e-8) ++r;
    if (r < g) throw GeometryError("frame_at: Lambda is not transversal to the zero locus here");
    Mat ker = svd.matrixV().rightCols(J.cols() - r);
    fd.lambda_prime_tangent = ker.cols() ? RealSubspace::span(tl * ker) : RealSubspace::zero(2 * n);
    fd.orbit_tangent = RealSubspace(2 * n, orth(K, rtol));
  } else {
    fd.lambda_prime_tangent = fd.lambda_tangent;
    fd.orbit_tangent = RealSubspace::zero(2 * n);
  }
  fd.rt = compute_rt(fd.orbit_tangent);
  return {chart, fd};
}

TransversalityReport transversality_check(const LegendrianImmersion& L, const TorusAction& action,
                                          int seeds_per_circle) {
  if (L.n() != action.n()) throw Error("transversality_check: dimension mismatch");
  const Tolerances& tol = default_tolerances();
  const int d = L.dim(), g = action.g();
  const int N = seeds_per_circle;
  const double h = 2.0 * kPi / N;
  TransversalityReport rep;
  rep.expected_dim = d - g;
  int min_rank = g;
  int tangential = 0, non_free = 0;

  auto phi_at = [&](const Vec& t) {
    CVec x = L.map(t);
    return Vec(action.weights().cast<double>() * x.cwiseAbs2() - action.shift());
  };

  std::vector<Vec> found;
  for_each_grid_point(d, N, [&](long, const std::vector<int>& idx) {
    Vec t(d);
    for (int j = 0; j < d; ++j) t(j) = h * idx[j];
    Vec f = phi_at(t);
    for (int it = 0; it < 60 && f.norm() > 1e-14; ++it) {
      CVec x = L.map(t);
      Mat D = dphi_on_lambda(action, x, L.jacobian(t));
      Vec step = -D.completeOrthogonalDecomposition().solve(f);
      if (step.norm() > 0.5) step *= 0.5 / step.norm();
      t += step;
      f = phi_at(t);
      if (step.norm() < 1e-16) break;
    }
    if (f.norm() > tol.accept_root) return;
    for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = wrap_angle(t(i));
    for (const Vec& u : found)
      if (torus_distance(u, t) < tol.dedup) return;
    found.push_back(t);
  });

  for (const Vec& t : found) {
    LambdaPrimePoint p;
    p.t = t;
    p.x = L.point(t);
    p.moment_residual = moment_map(action, p.x).norm();
    CMat J = L.jacobian(t);
    Mat D = dphi_on_lambda(action, p.x.coords(), J);
    p.rank_dphi = numerical_rank(D, 1e-8);
    min_rank = std::min(min_rank, p.rank_dphi);
    // Principal angles in the ambient real space R^{2n+2}.
    Mat tl(2 * J.rows(), J.cols());
    tl << J.real(), J.imag();
    Mat orb(2 * J.rows(), g);
    for (int j = 0; j < g; ++j) {
      CVec v = action.generator(j, p.x);
      orb.col(j) << v.real(), v.imag();
    }
    if (numerical_rank(orb, tol.rank) < g) {
      ++non_free;
      p.min_principal_angle = 0.0;
    } else {
      Vec ang = principal_angles(tl, orb, tol.rank);
      p.min_principal_angle = ang.size() ? ang(0) : kPi / 2;
    }
    if (p.rank_dphi < g || p.min_principal_angle <= tol.min_principal_angle) {
      if (tangential < 5) {
        std::ostringstream os;
        os << "tangential intersection at t = (" << t.transpose() << "): rank d(Phi o iota) = "
           << p.rank_dphi << ", smallest principal angle = " << p.min_principal_angle;
        rep.problems.push_back(os.str());
      }
      ++tangential;
    }
    rep.points.push_back(std::move(p));
  }
  if (tangential > 5) rep.problems.push_back(std::to_string(tangential - 5) + " further tangential points");
  if (non_free) rep.problems.push_back("orbit not locally free at " + std::to_string(non_free) + " points");
  rep.ok = tangential == 0 && non_free == 0;
  rep.estimated_dim = found.empty() ? -1 : d - min_rank;
  return rep;
}

}  // namespace szl
