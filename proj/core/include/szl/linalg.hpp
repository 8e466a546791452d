#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace szl {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline constexpr double kPi = 3.14159265358979323846;

// Tolerances shared by all modules. Call sites take them from here or from an
// explicit argument, never from literals.
struct Tolerances {
  double rank = 1e-10;          // singular-value cutoff for subspace arithmetic
  double lagrangian = 1e-10;    // |Omega(u,v)| on basis pairs
  double legendrian = 1e-8;     // |alpha| pulled back on sample grids
  double newton = 1e-12;        // residual target of root polishing
  double accept_root = 1e-9;    // residual accepted as a genuine root
  double dedup = 1e-6;          // parameter-space merge radius
  double quadrature = 1e-8;     // node-doubling agreement (relative)
  double min_principal_angle = 1e-3;
};

const Tolerances& default_tolerances();

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised for geometric preconditions that the asymptotic formulas rely on
// (transversality, Lagrangian input, locally free orbits).
class GeometryError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// det(A)^{-1/2} for complex symmetric A with positive definite real part.
// The branch is the one continuous along the segment from the identity,
// obtained as the product of principal square roots of the eigenvalues, which
// all lie in the open right half plane.
cplx inv_sqrt_det(const CMat& A);

// sqrt(det A) on the same branch.
cplx sqrt_det(const CMat& A);

// z^k by repeated squaring; exact sign/phase handling for integer k.
cplx ipow(cplx z, long k);

// Orthonormal basis of the column span (rank decided by tol on singular values).
Mat orth(const Mat& A, double tol);

// Orthonormal basis of the orthogonal complement of the column span in R^rows.
Mat orth_complement(const Mat& A, double tol);

// Orthonormal basis of the intersection of two column spans.
Mat intersect(const Mat& A, const Mat& B, double tol);

int numerical_rank(const Mat& A, double tol);

// Principal angles between column spans (radians, ascending).
Vec principal_angles(const Mat& A, const Mat& B, double tol);

// Symplectic form on R^{2n} with coordinates (p_1..p_n, q_1..q_n):
// Omega(u,v) = p_u.q_v - q_u.p_v.
double omega(const Vec& u, const Vec& v);
Mat omega_matrix(int n);

// Identification C^n <-> R^{2n}, z = p + i q.
Vec to_real(const CVec& z);
CVec to_complex(const Vec& pq);

}  // namespace szl
