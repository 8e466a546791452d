#include "szl/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace szl {

cplx LeadingTermPrediction::coefficient(long k) const {
  cplx s = 0.0;
  for (const ReturnTerm& r : per_return_terms)
    s += std::polar(1.0, phase_sign * std::fmod(static_cast<double>(k) * r.h, 2.0 * kPi)) * r.amplitude;
  return s;
}

cplx LeadingTermPrediction::value(long k) const {
  return std::pow(static_cast<double>(k), exponent) * coefficient(k);
}

cplx LeadingTermPrediction::phase_sum(long k) const {
  cplx s = 0.0;
  for (const ReturnTerm& r : per_return_terms)
    s += std::polar(1.0, phase_sign * std::fmod(static_cast<double>(k) * r.h, 2.0 * kPi)) * r.chi;
  return s;
}

namespace {

double wrap(double a) {
  a = std::fmod(a, 2.0 * kPi);
  return a < 0.0 ? a + 2.0 * kPi : a;
}

void for_each_index(int dims, int N, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> idx(dims, 0);
  long total = 1;
  for (int j = 0; j < dims; ++j) total *= N;
  for (long c = 0; c < total; ++c) {
    long r = c;
    for (int j = 0; j < dims; ++j) {
      idx[j] = static_cast<int>(r % N);
      r /= N;
    }
    fn(idx);
  }
}

long flat_index(const std::vector<int>& idx, int N) {
  long c = 0, mul = 1;
  for (int v : idx) {
    c += mul * v;
    mul *= N;
  }
  return c;
}

double torus_gap(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    double d = std::fabs(wrap(a(i)) - wrap(b(i)));
    d = std::min(d, 2.0 * kPi - d);
    s = std::max(s, d);
  }
  return s;
}

// Levenberg-Marquardt on a real residual; returns the final residual norm.
template <class F>
double levenberg_marquardt(Vec& y, F&& residual, int max_iter, double target) {
  Vec r;
  Mat J;
  residual(y, &r, &J);
  double mu = 1e-3;
  for (int it = 0; it < max_iter && r.norm() > target; ++it) {
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
  return r.norm();
}

struct Assembly {
  int n = 0, g = 0;
  double prefactor = 0.0;
};

LeadingTermPrediction assemble(const BundlePoint& x, const LegendrianImmersion& L,
                               const std::optional<TorusAction>& action, const Eigen::VectorXi& varpi,
                               const CVec& w, const std::optional<HeisenbergChart>& chart) {
  const int n = L.n();
  const int g = action ? action->g() : 0;
  if (x.n() != n) throw Error("prediction: dimension mismatch");
  if (w.size() != 0 && w.size() != n) throw Error("prediction: w must have n complex entries");
  if (g > 0 && varpi.size() != g) throw Error("prediction: varpi must have one entry per circle factor");

  const HeisenbergChart cx = chart ? *chart : heisenberg_chart(x);
  const CVec V = w.size() == 0 ? CVec(CVec::Zero(n + 1)) : cx.vector_of(w);

  std::optional<TorusAction> act = g > 0 ? action : std::nullopt;
  if (act) {
    if (moment_map(*act, x).norm() > default_tolerances().legendrian)
      throw GeometryError("prediction: x is off the zero level of the moment map (rapid decay expected)");
    TransversalityReport tr = transversality_check(L, *act);
    if (!tr.ok) {
      std::ostringstream os;
      os << "prediction: transversality check failed";
      for (const std::string& p : tr.problems) os << "; " << p;
      throw GeometryError(os.str());
    }
  }
  const std::vector<ReturnElement> ret = find_return_elements(x, L, act);
  if (ret.empty()) throw GeometryError("prediction: no return elements (x is off the orbit saturation)");

  LeadingTermPrediction out;
  out.exponent = 0.5 * (n - g);
  out.constant = std::pow(kPi, -n) * std::sqrt(std::pow(2.0 * kPi, n + g) / std::pow(2.0, g));
  out.phase_sign = -1;
  const Vec wv = g > 0 ? Vec(varpi.cast<double>()) : Vec();
  for (const ReturnElement& e : ret) {
    FrameAt fa = frame_at(L, e.t_params, act);
    CVec pushed = std::polar(1.0, e.h) * (act ? act->act(e.g_params, V) : V);
    Vec wj = fa.chart.real_coords_of(pushed);
    const cplx Q = q_form(wj, fa.frame);
    double v_eff = 1.0;
    long stab = 1;
    if (act) {
      OrbitData od = effective_potential(*act, hopf_project(e.target));
      v_eff = od.v_eff;
      stab = od.stabilizer_order;
    }
    ReturnTerm term;
    term.h = e.h;
    term.s = e.g_params;
    term.t = e.t_params;
    term.chi = act ? std::polar(1.0, wv.dot(e.g_params)) : cplx(1.0);
    const cplx xi = act ? xi_lambda(fa.frame.rt, v_eff) : cplx(1.0);
    term.amplitude = out.constant / static_cast<double>(stab) * term.chi * xi * std::exp(-Q) * L.f_lambda(e.t_params);
    out.per_return_terms.push_back(term);
  }
  return out;
}

}  // namespace

LeadingTermPrediction predict_theorem_main(const BundlePoint& x, const LegendrianImmersion& L,
                                           const TorusAction& action, const Eigen::VectorXi& varpi,
                                           const CVec& w, const std::optional<HeisenbergChart>& chart) {
  return assemble(x, L, action, varpi, w, chart);
}

LeadingTermPrediction predict_action_free(const BundlePoint& x, const LegendrianImmersion& L, const CVec& w,
                                          const std::optional<HeisenbergChart>& chart) {
  return assemble(x, L, std::nullopt, Eigen::VectorXi(), w, chart);
}

namespace {

Mat horizontal_real(const HeisenbergChart& chart, const CMat& vectors) {
  Mat out(2 * chart.n(), vectors.cols());
  for (Eigen::Index j = 0; j < vectors.cols(); ++j)
    out.col(j) = chart.real_coords_of(horizontal_part(chart.center(), vectors.col(j)));
  return out;
}

}  // namespace

std::vector<Crossing> find_crossings(const LegendrianImmersion& L, const LegendrianImmersion& Sigma,
                                     int seeds_per_circle) {
  if (L.n() != Sigma.n() || L.dim() != Sigma.dim()) throw Error("find_crossings: dimension mismatch");
  const Tolerances& tol = default_tolerances();
  const int d = L.dim();
  const int m = 2 * d;
  const int N = m <= 2 ? seeds_per_circle : std::max(12, seeds_per_circle / 4);
  const double step = 2.0 * kPi / N;

  std::vector<CVec> lp, sp;
  for_each_index(d, N, [&](const std::vector<int>& idx) {
    Vec t(d);
    for (int j = 0; j < d; ++j) t(j) = step * idx[j];
    lp.push_back(L.map(t));
    sp.push_back(Sigma.map(t));
  });
  const long nl = static_cast<long>(lp.size());
  std::vector<double> F(nl * nl);
  for (long a = 0; a < nl; ++a)
    for (long b = 0; b < nl; ++b) F[a + nl * b] = 1.0 - std::abs(hermitian(lp[a], sp[b]));

  auto residual = [&](const Vec& y, Vec* r, Mat* J) {
    const cplx eh = std::polar(1.0, y(0));
    const Vec t = y.segment(1, d), s = y.tail(d);
    const CVec lv = L.map(t);
    CVec res = eh * lv - Sigma.map(s);
    r->resize(2 * res.size());
    *r << res.real(), res.imag();
    if (J) {
      CMat Jc(res.size(), 1 + m);
      Jc.col(0) = cplx(0, 1) * eh * lv;
      Jc.middleCols(1, d) = eh * L.jacobian(t);
      Jc.rightCols(d) = -Sigma.jacobian(s);
      J->resize(2 * res.size(), 1 + m);
      *J << Jc.real(), Jc.imag();
    }
  };

  std::vector<Vec> found;
  for_each_index(m, N, [&](const std::vector<int>& idx) {
    const long c = flat_index(idx, N);
    const double f0 = F[c];
    if (f0 > 0.5) return;
    std::vector<int> nb = idx;
    for (int j = 0; j < m; ++j)
      for (int dl : {-1, 1}) {
        nb[j] = (idx[j] + dl + N) % N;
        if (F[flat_index(nb, N)] < f0) return;
        nb[j] = idx[j];
      }
    Vec y(1 + m);
    for (int j = 0; j < m; ++j) y(1 + j) = step * idx[j];
    y(0) = std::arg(hermitian(sp[c / nl], lp[c % nl]));
    if (levenberg_marquardt(y, residual, 100, tol.newton) > tol.accept_root) return;
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = wrap(y(i));
    for (const Vec& f : found)
      if (torus_gap(f, y) < tol.dedup) return;
    Vec r;
    Mat J;
    residual(y, &r, &J);
    if (numerical_rank(J, 1e-7 * std::max(1.0, J.norm())) < 1 + m)
      throw UnsupportedCase("find_crossings: clean (non-transverse) intersection is not supported");
    found.push_back(y);
  });
  std::sort(found.begin(), found.end(), [](const Vec& a, const Vec& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i)
      if (std::fabs(a(i) - b(i)) > 1e-9) return a(i) < b(i);
    return false;
  });

  const int n = L.n();
  std::vector<Crossing> out;
  for (const Vec& y : found) {
    Crossing c;
    c.h = y(0);
    c.t = y.segment(1, d);
    c.s = y.tail(d);
    HeisenbergChart chart = adapted_chart(Sigma, c.s);
    Mat B = horizontal_real(chart, std::polar(1.0, c.h) * L.jacobian(c.t));
    Mat sigma_basis = Mat::Zero(2 * n, n);
    sigma_basis.bottomRows(n) = Mat::Identity(n, n);
    c.iota_j = iota_invariant({RealSubspace::span(B), RealSubspace::span(sigma_basis)});
    const Mat P = B.topRows(n), Qm = B.bottomRows(n);
    Eigen::JacobiSVD<Mat> svd(P);
    if (svd.singularValues().minCoeff() < 1e-8 * std::max(1.0, svd.singularValues().maxCoeff()))
      throw UnsupportedCase("find_crossings: tangent spaces meet nontrivially");
    Mat Z = Qm * P.inverse();
    Z = 0.5 * (Z + Z.transpose());
    c.Z = Z.cast<cplx>();
    out.push_back(c);
  }
  return out;
}

LeadingTermPrediction predict_pairing_transverse(const LegendrianImmersion& L, const LegendrianImmersion& Sigma,
                                                 const std::optional<TorusAction>& action,
                                                 const Eigen::VectorXi& varpi) {
  (void)varpi;
  if (action && action->g() > 0)
    throw UnsupportedCase("predict_pairing_transverse: equivariant pairings are not supported");
  const int n = L.n();
  LeadingTermPrediction out;
  out.exponent = 0.0;
  out.phase_sign = 1;
  out.constant = std::pow(2.0 * kPi, 0.5 * n) / std::pow(kPi, n);
  for (const Crossing& c : find_crossings(L, Sigma)) {
    ReturnTerm term;
    term.h = c.h;
    term.t = c.t;
    term.s = c.s;
    const CMat A = CMat::Identity(n, n) - cplx(0, 1) * c.Z;
    term.amplitude = out.constant * L.f_lambda(c.t) * std::conj(Sigma.f_lambda(c.s)) / c.iota_j *
                     gaussian_fourier(A, Vec::Zero(n));
    out.per_return_terms.push_back(term);
  }
  return out;
}

StationaryPhaseResult stationary_phase_oracle(const PhaseFunction& phase,
                                              const std::function<cplx(const Vec&)>& amplitude, double k,
                                              const StationaryPhaseOptions& opt) {
  const int d = phase.dim;
  const int N = opt.grid_per_dim;
  const double step = 2.0 * kPi / N;
  std::vector<double> G;
  long total = 1;
  for (int j = 0; j < d; ++j) total *= N;
  G.resize(total);
  for_each_index(d, N, [&](const std::vector<int>& idx) {
    Vec t(d);
    for (int j = 0; j < d; ++j) t(j) = step * idx[j];
    const double im = phase.value(t).imag();
    G[flat_index(idx, N)] = phase.gradient(t).squaredNorm() + im * im;
  });

  auto residual = [&](const Vec& t, Vec* r, Mat* J) {
    CVec gr = phase.gradient(t);
    r->resize(2 * d);
    *r << gr.real(), gr.imag();
    if (J) {
      CMat H = phase.hessian(t);
      J->resize(2 * d, d);
      *J << H.real(), H.imag();
    }
  };

  StationaryPhaseResult res;
  std::vector<Vec> found;
  for_each_index(d, N, [&](const std::vector<int>& idx) {
    const double g0 = G[flat_index(idx, N)];
    std::vector<int> nb = idx;
    for (int j = 0; j < d; ++j)
      for (int dl : {-1, 1}) {
        nb[j] = (idx[j] + dl + N) % N;
        if (G[flat_index(nb, N)] < g0) return;
        nb[j] = idx[j];
      }
    Vec t(d);
    for (int j = 0; j < d; ++j) t(j) = step * idx[j];
    if (levenberg_marquardt(t, residual, 100, 1e-14) > opt.root_tol) return;
    if (std::fabs(phase.value(t).imag()) > opt.im_tol) return;
    for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = wrap(t(i));
    for (const Vec& f : found)
      if (torus_gap(f, t) < default_tolerances().dedup) return;
    found.push_back(t);
  });
  std::sort(found.begin(), found.end(), [](const Vec& a, const Vec& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i)
      if (std::fabs(a(i) - b(i)) > 1e-9) return a(i) < b(i);
    return false;
  });

  for (const Vec& t : found) {
    StationaryPointReport p;
    p.location = t;
    p.phase_value = phase.value(t);
    p.hessian = phase.hessian(t);
    const cplx det = p.hessian.determinant();
    p.nondegenerate = std::abs(det) > 1e-10 * std::max(1.0, std::pow(p.hessian.norm(), d));
    if (!p.nondegenerate) throw GeometryError("stationary_phase_oracle: degenerate critical point");
    const CMat A = (k / (2.0 * kPi)) * (cplx(0, -1) * p.hessian);
    CMat As = 0.5 * (A + A.transpose());
    res.value += std::exp(cplx(0, k) * p.phase_value) * amplitude(t) * inv_sqrt_det(As);
    res.points.push_back(p);
  }
  res.rapid_decay = res.points.empty();
  return res;
}

namespace {

// Derivative of the Jacobian of L in direction j, five-point stencil.
CMat jacobian_derivative(const LegendrianImmersion& L, const Vec& t, int j) {
  const double h = 1e-3;
  auto J = [&](double s) {
    Vec tt = t;
    tt(j) += s;
    return L.jacobian(tt);
  };
  return (-J(2 * h) + 8.0 * J(h) - 8.0 * J(-h) + J(-2 * h)) / (12.0 * h);
}

}  // namespace

PhaseFunction model_phase(const BundlePoint& x, const LegendrianImmersion& L) {
  if (x.n() != L.n()) throw Error("model_phase: dimension mismatch");
  const CVec xc = x.coords();
  PhaseFunction ph;
  ph.dim = L.dim();
  ph.value = [xc, L](const Vec& t) { return cplx(0, -1) * std::log(hermitian(xc, L.map(t))); };
  ph.gradient = [xc, L](const Vec& t) {
    const cplx f = hermitian(xc, L.map(t));
    const CMat J = L.jacobian(t);
    CVec g(J.cols());
    for (Eigen::Index j = 0; j < J.cols(); ++j) g(j) = cplx(0, -1) * hermitian(xc, J.col(j)) / f;
    return g;
  };
  ph.hessian = [xc, L](const Vec& t) {
    const cplx f = hermitian(xc, L.map(t));
    const CMat J = L.jacobian(t);
    const int d = static_cast<int>(J.cols());
    CVec fp(d);
    for (int j = 0; j < d; ++j) fp(j) = hermitian(xc, J.col(j));
    CMat H(d, d);
    for (int j = 0; j < d; ++j) {
      const CMat dJ = jacobian_derivative(L, t, j);
      for (int i = 0; i < d; ++i) {
        const cplx fpp = hermitian(xc, dJ.col(i));
        H(i, j) = cplx(0, -1) * (fpp / f - fp(i) * fp(j) / (f * f));
      }
    }
    return CMat(0.5 * (H + H.transpose()));
  };
  return ph;
}

namespace {

struct LineFit {
  double slope = 0.0, intercept = 0.0, rms = 0.0;
  std::vector<double> res;
};

LineFit line_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  double ss = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    f.res.push_back(r);
    ss += r * r;
  }
  f.rms = std::sqrt(ss / n);
  return f;
}

constexpr double kFitRms = 0.05;
constexpr size_t kMinPoints = 8;

struct Candidate {
  std::vector<long> ks;
  std::vector<double> mags;
};

AsymptoticFit fit_candidate(const Candidate& c) {
  std::vector<double> lk, kk, lv;
  for (size_t i = 0; i < c.ks.size(); ++i) {
    lk.push_back(std::log(static_cast<double>(c.ks[i])));
    kk.push_back(static_cast<double>(c.ks[i]));
    lv.push_back(std::log(c.mags[i]));
  }
  LineFit pw = line_fit(lk, lv), geo = line_fit(kk, lv);
  AsymptoticFit f;
  f.subsequence = c.ks;
  if (geo.slope < 0.0 && geo.rms < 0.5 * pw.rms) {
    f.kind = FitKind::Decay;
    f.decay_rate = -geo.slope;
    f.exponent = pw.slope;
    f.coefficient_modulus = std::exp(geo.intercept);
    for (double r : geo.res) f.residuals.push_back(std::expm1(-r));
    f.message = "decay, not power law";
  } else {
    f.kind = pw.rms < kFitRms ? FitKind::PowerLaw : FitKind::Unresolved;
    f.exponent = pw.slope;
    f.coefficient_modulus = std::exp(pw.intercept);
    for (double r : pw.res) f.residuals.push_back(std::expm1(-r));
  }
  const size_t half = f.residuals.size() / 2;
  f.tail_monotone = true;
  for (size_t i = half + 1; i < f.residuals.size(); ++i)
    if (std::fabs(f.residuals[i]) > std::fabs(f.residuals[i - 1]) + 1e-12) f.tail_monotone = false;
  return f;
}

double fit_rms(const AsymptoticFit& f) {
  double s = 0.0;
  for (double r : f.residuals) s += std::log1p(r) * std::log1p(r);
  return f.residuals.empty() ? std::numeric_limits<double>::infinity() : std::sqrt(s / f.residuals.size());
}

}  // namespace

AsymptoticFit fit_power_law(const StateSequence& seq, const std::function<cplx(long)>& phase_pattern) {
  std::vector<long> ks;
  std::vector<cplx> vals;
  double pmax = 0.0;
  std::vector<cplx> pats;
  for (const auto& [k, v] : seq.values) {
    if (k <= 0) continue;
    ks.push_back(k);
    vals.push_back(v);
    pats.push_back(phase_pattern ? phase_pattern(k) : cplx(1.0));
    pmax = std::max(pmax, std::abs(pats.back()));
  }
  Candidate all;
  double vmax = 0.0;
  for (const cplx& v : vals) vmax = std::max(vmax, std::abs(v));
  for (size_t i = 0; i < ks.size(); ++i) {
    if (std::abs(pats[i]) < 1e-3 * pmax) continue;
    const double m = std::abs(vals[i] / pats[i]);
    if (!std::isfinite(m) || m <= 1e-300 || std::abs(vals[i]) < 1e-10 * vmax) continue;
    all.ks.push_back(ks[i]);
    all.mags.push_back(m);
  }
  AsymptoticFit best;
  best.message = vmax == 0.0 || all.ks.empty() ? "sequence vanishes" : "fewer than 8 usable k values";
  if (all.ks.size() < kMinPoints) return best;

  AsymptoticFit f = fit_candidate(all);
  if (f.kind != FitKind::Unresolved || phase_pattern) {
    if (f.kind == FitKind::Unresolved) f.message = "oscillation not resolved by the supplied phase pattern";
    return f;
  }
  // Search constant-phase subsequences k = r mod p.
  double best_rms = fit_rms(f);
  best = f;
  for (int p : {2, 3, 4, 5, 6, 8, 12}) {
    std::map<long, Candidate> classes;
    for (size_t i = 0; i < all.ks.size(); ++i) {
      Candidate& c = classes[all.ks[i] % p];
      c.ks.push_back(all.ks[i]);
      c.mags.push_back(all.mags[i]);
    }
    std::optional<AsymptoticFit> pick;
    for (const auto& [r, c] : classes) {
      if (c.ks.size() < kMinPoints) continue;
      AsymptoticFit cf = fit_candidate(c);
      cf.dominant_period = p;
      const double rms = fit_rms(cf);
      if (rms < best_rms) {
        best_rms = rms;
        best = cf;
      }
      if (cf.kind == FitKind::PowerLaw && (!pick || cf.coefficient_modulus > pick->coefficient_modulus)) pick = cf;
    }
    if (pick) return *pick;
  }
  std::ostringstream os;
  os << "oscillation not resolved; dominant period " << best.dominant_period;
  best.kind = FitKind::Unresolved;
  best.message = os.str();
  return best;
}

RapidDecayReport rapid_decay_test(const StateSequence& seq, int n_max, double drop_factor, double noise_floor) {
  RapidDecayReport rep;
  std::vector<long> ks;
  std::vector<double> mags;
  for (const auto& [k, v] : seq.values) {
    if (k <= 0) continue;
    ks.push_back(k);
    mags.push_back(std::abs(v));
  }
  if (ks.size() < kMinPoints) {
    rep.message = "fewer than 8 k values";
    return rep;
  }
  const size_t start = ks.size() >= 2 * kMinPoints ? ks.size() / 2 : 0;
  const size_t len = ks.size() - start;
  constexpr int kBlocks = 4;
  const double ninf = -std::numeric_limits<double>::infinity();
  for (int N = 0; N <= n_max; ++N) {
    std::vector<double> bm(kBlocks, ninf);
    for (size_t i = start; i < ks.size(); ++i) {
      const size_t b = std::min<size_t>(kBlocks - 1, (i - start) * kBlocks / len);
      if (mags[i] > noise_floor) bm[b] = std::max(bm[b], std::log(mags[i]) + N * std::log(static_cast<double>(ks[i])));
    }
    rep.block_maxima = bm;
    bool ok = true;
    for (int b = 1; b < kBlocks; ++b)
      if (!(bm[b] < bm[b - 1] || (bm[b] == ninf && bm[b - 1] == ninf))) ok = false;
    if (ok && bm[kBlocks - 1] != ninf && bm[kBlocks - 1] > bm[0] - std::log(drop_factor)) ok = false;
    if (!ok) {
      rep.failed_at_power = N;
      std::ostringstream os;
      os << "|v_k| k^" << N << " is not decreasing to zero over the tail";
      rep.message = os.str();
      return rep;
    }
  }
  rep.passed = true;
  rep.message = "rapid decay";
  return rep;
}

}  // namespace szl
