#include "szl/symplectic.hpp"

#include <cmath>

namespace szl {

namespace {

constexpr double kContainTol = 1e-8;

Mat pinv(const Mat& A) { return A.completeOrthogonalDecomposition().pseudoInverse(); }

}  // namespace

RealSubspace::RealSubspace(int ambient_dim, Mat basis, double tol)
    : ambient_(ambient_dim), basis_(std::move(basis)) {
  if (basis_.rows() != ambient_dim) throw Error("subspace basis has wrong ambient dimension");
  if (basis_.cols() > ambient_dim) throw Error("too many basis vectors");
  if (numerical_rank(basis_, tol) != basis_.cols())
    throw Error("subspace basis vectors are linearly dependent");
}

RealSubspace RealSubspace::span(const Mat& vectors, double tol) {
  return RealSubspace(static_cast<int>(vectors.rows()), orth(vectors, tol), tol);
}

RealSubspace RealSubspace::zero(int ambient_dim) {
  return RealSubspace(ambient_dim, Mat(ambient_dim, 0));
}

Mat RealSubspace::orthonormal_basis(double tol) const { return orth(basis_, tol); }

Mat RealSubspace::projector(double tol) const {
  Mat q = orthonormal_basis(tol);
  return q * q.transpose();
}

bool RealSubspace::contains(const Vec& v, double tol) const {
  return (v - projector() * v).norm() <= tol * std::max(1.0, v.norm());
}

CMat RTData::gram() const {
  CMat G(g, g);
  G.real() = R.transpose() * R;
  G.imag() = R.transpose() * T * R;
  return G;
}

bool is_lagrangian(const RealSubspace& S, double tol) {
  if (S.ambient_dim() % 2 != 0) throw Error("is_lagrangian: ambient dimension must be even");
  const int n = S.ambient_dim() / 2;
  if (S.dim() != n) return false;
  Mat q = S.orthonormal_basis();
  Mat w = q.transpose() * omega_matrix(n) * q;
  return w.cwiseAbs().maxCoeff() <= tol;
}

std::array<Mat, 4> decomposition_projectors(const RealSubspace& lambda_tangent,
                                            const RealSubspace& lambda_prime_tangent,
                                            const RealSubspace& orbit_tangent, double tol) {
  const int m = lambda_tangent.ambient_dim();
  if (lambda_prime_tangent.ambient_dim() != m || orbit_tangent.ambient_dim() != m)
    throw Error("decompose_tangent: ambient dimensions differ");
  Mat bl = lambda_tangent.orthonormal_basis(tol);
  Mat blp = lambda_prime_tangent.orthonormal_basis(tol);
  Mat bo = orbit_tangent.orthonormal_basis(tol);
  const Mat pl = bl * bl.transpose();
  if (blp.cols() > 0 && ((Mat::Identity(m, m) - pl) * blp).norm() > kContainTol)
    throw GeometryError("decompose_tangent: T Lambda' is not contained in T Lambda");

  Mat M(m, bl.cols() + bo.cols());
  M << bl, bo;
  if (numerical_rank(M, tol) != M.cols())
    throw GeometryError("decompose_tangent: T Lambda meets the orbit tangent space");
  Mat qm = orth(M, tol);
  Mat psum = qm * qm.transpose();
  Mat coeff = pinv(M) * psum;
  Mat pi_l = bl * coeff.topRows(bl.cols());
  Mat pi_d = bo * coeff.bottomRows(bo.cols());
  Mat pi_c = blp * blp.transpose() * pi_l;
  Mat pi_b = pi_l - pi_c;
  Mat pi_a = Mat::Identity(m, m) - psum;
  return {pi_a, pi_b, pi_c, pi_d};
}

TangentDecomposition decompose_tangent(const Vec& w, const RealSubspace& lambda_tangent,
                                       const RealSubspace& lambda_prime_tangent,
                                       const RealSubspace& orbit_tangent, double tol) {
  if (w.size() != lambda_tangent.ambient_dim()) throw Error("decompose_tangent: vector size");
  auto pr = decomposition_projectors(lambda_tangent, lambda_prime_tangent, orbit_tangent, tol);
  return {pr[0] * w, pr[1] * w, pr[2] * w, pr[3] * w};
}

RTData compute_rt(const RealSubspace& orbit_tangent, double tol) {
  const Mat& B = orbit_tangent.basis();
  const int g = orbit_tangent.dim();
  const int n = orbit_tangent.ambient_dim() / 2;
  if ((B.transpose() * B - Mat::Identity(g, g)).norm() > kContainTol)
    throw Error("compute_rt: orbit basis must be orthonormal");
  RTData rt;
  rt.g = g;
  rt.R = B.topRows(n);
  const Mat Q = B.bottomRows(n);
  if (numerical_rank(rt.R, tol) < g)
    throw GeometryError("compute_rt: rank(R) < g, orbit not transverse to Lambda");
  rt.T = g == 0 ? Mat::Zero(n, n) : Mat(Q * pinv(rt.R));
  return rt;
}

cplx xi_lambda(const RTData& rt, double v_eff) {
  if (!(v_eff > 0.0)) throw Error("xi_lambda: v_eff must be positive");
  if (rt.g == 0) return 1.0 / v_eff;
  return inv_sqrt_det(rt.gram()) / v_eff;
}

double iota_invariant(const LagrangianPair& pair, double tol) {
  if (pair.L.ambient_dim() != pair.Lp.ambient_dim())
    throw Error("iota_invariant: ambient dimensions differ");
  if (!is_lagrangian(pair.L) || !is_lagrangian(pair.Lp))
    throw GeometryError("iota_invariant: input subspaces must be Lagrangian");
  const int n = pair.L.ambient_dim() / 2;
  Mat bl = pair.L.orthonormal_basis(tol);
  Mat blp = pair.Lp.orthonormal_basis(tol);
  Mat k = intersect(bl, blp, 1e-8);
  const int c = static_cast<int>(k.cols());
  if (c == n) return 1.0;
  const Mat pk = k * k.transpose();
  const Mat I = Mat::Identity(2 * n, 2 * n);
  Mat a1 = orth((I - pk) * bl, 1e-8);
  Mat a2 = orth((I - pk) * blp, 1e-8);
  if (a1.cols() != n - c || a2.cols() != n - c)
    throw Error("iota_invariant: inconsistent intersection dimension");
  CMat u1(n, n - c), u2(n, n - c);
  for (int j = 0; j < n - c; ++j) {
    u1.col(j) = to_complex(a1.col(j));
    u2.col(j) = to_complex(a2.col(j));
  }
  CMat w = u1.adjoint() * u2;
  return std::abs(Mat(w.imag()).determinant());
}

cplx gaussian_fourier(const CMat& A, const Vec& b) {
  const Eigen::Index g = A.rows();
  if (b.size() != g) throw Error("gaussian_fourier: dimension mismatch");
  if (g == 0) return 1.0;
  const cplx d = inv_sqrt_det(A);
  CVec bc = b.cast<cplx>();
  CVec sol = A.partialPivLu().solve(bc);
  const cplx quad = bc.dot(sol);  // b real, so conjugation is harmless
  return std::pow(kPi, 0.5 * static_cast<double>(g)) * d * std::exp(-0.25 * quad);
}

namespace {

struct SPParts {
  Mat F, G;
  Mat V;  // g x 2n, w -> R^t (q_b - 3 T^t p_a)
  std::array<Mat, 4> pr;
};

SPParts sp_parts(const RTData& rt, const FrameData& frame, double tol) {
  const int m = frame.lambda_tangent.ambient_dim();
  const int n = m / 2;
  SPParts s;
  s.pr = decomposition_projectors(frame.lambda_tangent, frame.lambda_prime_tangent,
                                  frame.orbit_tangent, tol);
  Mat take_p = Mat::Zero(n, m), take_q = Mat::Zero(n, m);
  take_p.leftCols(n) = Mat::Identity(n, n);
  take_q.rightCols(n) = Mat::Identity(n, n);
  if (rt.g > 0) {
    CMat inv = rt.gram().inverse();
    s.F = inv.real();
    s.G = inv.imag();
    s.V = rt.R.transpose() * (take_q * s.pr[1] - 3.0 * rt.T.transpose() * take_p * s.pr[0]);
  } else {
    s.F = s.G = Mat(0, 0);
    s.V = Mat(0, m);
  }
  return s;
}

}  // namespace

QuadraticFormsSP quadratic_forms_sp(const RTData& rt, const FrameData& frame, double tol) {
  const int m = frame.lambda_tangent.ambient_dim();
  const int n = m / 2;
  SPParts s = sp_parts(rt, frame, tol);
  Mat take_p = Mat::Zero(n, m);
  take_p.leftCols(n) = Mat::Identity(n, n);
  const Mat pa = take_p * s.pr[0];
  QuadraticFormsSP out;
  out.S = pa.transpose() * pa;
  out.P = Mat::Zero(m, m);
  if (rt.g > 0) {
    out.S += 0.25 * s.V.transpose() * s.F * s.V;
    out.P += 0.25 * s.V.transpose() * s.G * s.V;
  }
  // C(w) = Omega(w - w_d, w_a) + 2 Omega(w, w_d)
  const Mat J = omega_matrix(n);
  const Mat I = Mat::Identity(m, m);
  Mat C = (I - s.pr[3]).transpose() * J * s.pr[0] + 2.0 * J * s.pr[3];
  out.P -= 0.5 * (C + C.transpose());
  out.S = 0.5 * (out.S + out.S.transpose());
  out.P = 0.5 * (out.P + out.P.transpose());
  return out;
}

cplx q_form(const Vec& w, const FrameData& frame, double tol) {
  const int n = frame.lambda_tangent.ambient_dim() / 2;
  TangentDecomposition d = decompose_tangent(w, frame.lambda_tangent, frame.lambda_prime_tangent,
                                             frame.orbit_tangent, tol);
  const Vec pa = d.w_a.head(n);
  const Vec qb = d.w_b.tail(n);
  const double c = omega(w - d.w_d, d.w_a) + 2.0 * omega(w, d.w_d);
  cplx q = cplx(pa.squaredNorm(), -c);
  const RTData& rt = frame.rt;
  if (rt.g > 0) {
    Vec v = rt.R.transpose() * (qb - 3.0 * rt.T.transpose() * pa);
    CVec vc = v.cast<cplx>();
    CVec sol = rt.gram().partialPivLu().solve(vc);
    q += 0.25 * vc.dot(sol);
  }
  return q;
}

}  // namespace szl
