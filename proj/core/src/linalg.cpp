#include "szl/linalg.hpp"

#include <algorithm>

namespace szl {

const Tolerances& default_tolerances() {
  static const Tolerances t{};
  return t;
}

namespace {

Eigen::ComplexEigenSolver<CMat> checked_eigs(const CMat& A) {
  if (A.rows() != A.cols()) throw Error("matrix must be square");
  if ((A - A.transpose()).norm() > 1e-10 * std::max(1.0, A.norm()))
    throw Error("matrix must be complex symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> re(A.real());
  if (A.rows() > 0 && re.eigenvalues().minCoeff() <= 0.0)
    throw Error("real part must be positive definite");
  Eigen::ComplexEigenSolver<CMat> es(A, false);
  if (es.info() != Eigen::Success) throw Error("eigenvalue computation failed");
  return es;
}

}  // namespace

cplx sqrt_det(const CMat& A) {
  auto es = checked_eigs(A);
  cplx r = 1.0;
  for (Eigen::Index i = 0; i < A.rows(); ++i) r *= std::sqrt(es.eigenvalues()(i));
  return r;
}

cplx inv_sqrt_det(const CMat& A) {
  const cplx s = sqrt_det(A);
  if (std::abs(s) == 0.0) throw Error("singular matrix in det^{-1/2}");
  return 1.0 / s;
}

cplx ipow(cplx z, long k) {
  if (k < 0) return 1.0 / ipow(z, -k);
  cplx r = 1.0;
  while (k) {
    if (k & 1) r *= z;
    z *= z;
    k >>= 1;
  }
  return r;
}

int numerical_rank(const Mat& A, double tol) {
  if (A.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(A);
  int r = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > tol) ++r;
  return r;
}

Mat orth(const Mat& A, double tol) {
  if (A.cols() == 0) return Mat(A.rows(), 0);
  Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullU);
  int r = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > tol) ++r;
  return svd.matrixU().leftCols(r);
}

Mat orth_complement(const Mat& A, double tol) {
  const Eigen::Index m = A.rows();
  if (A.cols() == 0) return Mat::Identity(m, m);
  Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullU);
  int r = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > tol) ++r;
  return svd.matrixU().rightCols(m - r);
}

Mat intersect(const Mat& A, const Mat& B, double tol) {
  const Eigen::Index m = A.rows();
  Mat qa = orth(A, tol), qb = orth(B, tol);
  if (qa.cols() == 0 || qb.cols() == 0) return Mat(m, 0);
  Mat nb = Mat::Identity(m, m) - qb * qb.transpose();
  // Coefficient vectors c with qa*c annihilated by the projector off span(B).
  Eigen::JacobiSVD<Mat> svd(nb * qa, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > tol) ++r;
  Mat coeffs = svd.matrixV().rightCols(qa.cols() - r);
  return orth(qa * coeffs, tol);
}

Vec principal_angles(const Mat& A, const Mat& B, double tol) {
  Mat qa = orth(A, tol), qb = orth(B, tol);
  Eigen::JacobiSVD<Mat> svd(qa.transpose() * qb);
  Vec s = svd.singularValues();
  Vec ang(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) ang(i) = std::acos(std::clamp(s(i), -1.0, 1.0));
  std::sort(ang.data(), ang.data() + ang.size());
  return ang;
}

double omega(const Vec& u, const Vec& v) {
  const Eigen::Index n = u.size() / 2;
  return u.head(n).dot(v.tail(n)) - u.tail(n).dot(v.head(n));
}

Mat omega_matrix(int n) {
  Mat J = Mat::Zero(2 * n, 2 * n);
  J.topRightCorner(n, n) = Mat::Identity(n, n);
  J.bottomLeftCorner(n, n) = -Mat::Identity(n, n);
  return J;
}

Vec to_real(const CVec& z) {
  Vec r(2 * z.size());
  r << z.real(), z.imag();
  return r;
}

CVec to_complex(const Vec& pq) {
  const Eigen::Index n = pq.size() / 2;
  CVec z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = cplx(pq(i), pq(n + i));
  return z;
}

}  // namespace szl
