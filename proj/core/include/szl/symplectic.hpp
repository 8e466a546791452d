#pragma once

#include <array>

#include "szl/linalg.hpp"

namespace szl {

// Linear subspace of R^{2n}, coordinates (p, q) with z = p + i q.
class RealSubspace {
 public:
  RealSubspace() = default;
  // Columns of `basis` must be linearly independent.
  RealSubspace(int ambient_dim, Mat basis, double tol = default_tolerances().rank);

  static RealSubspace span(const Mat& vectors, double tol = default_tolerances().rank);
  static RealSubspace zero(int ambient_dim);

  int ambient_dim() const { return ambient_; }
  int dim() const { return static_cast<int>(basis_.cols()); }
  const Mat& basis() const { return basis_; }
  Mat orthonormal_basis(double tol = default_tolerances().rank) const;
  Mat projector(double tol = default_tolerances().rank) const;
  bool contains(const Vec& v, double tol) const;

 private:
  int ambient_ = 0;
  Mat basis_;
};

struct TangentDecomposition {
  Vec w_a, w_b, w_c, w_d;
  Vec sum() const { return w_a + w_b + w_c + w_d; }
};

// Orbit inclusion r -> R r + i T R r in adapted coordinates (T_x Lambda = {p = 0}).
struct RTData {
  Mat R;  // n x g
  Mat T;  // n x n
  int g = 0;
  // R^t R + i R^t T R
  CMat gram() const;
};

struct QuadraticFormsSP {
  Mat S;  // 2n x 2n, symmetric, depends on w only through w' = w_a + w_b
  Mat P;  // 2n x 2n, symmetric
  double s(const Vec& w) const { return w.dot(S * w); }
  double p(const Vec& w) const { return w.dot(P * w); }
};

struct LagrangianPair {
  RealSubspace L, Lp;
};

// Tangent data at a point of Lambda', all in the adapted Heisenberg frame.
struct FrameData {
  RealSubspace lambda_tangent;        // {p = 0}
  RealSubspace lambda_prime_tangent;  // subspace of lambda_tangent
  RealSubspace orbit_tangent;         // orthonormal basis, isotropic
  RTData rt;
};

bool is_lagrangian(const RealSubspace& S, double tol = default_tolerances().lagrangian);

// Linear projectors onto the four components; rows/cols indexed by R^{2n}.
std::array<Mat, 4> decomposition_projectors(const RealSubspace& lambda_tangent,
                                            const RealSubspace& lambda_prime_tangent,
                                            const RealSubspace& orbit_tangent,
                                            double tol = default_tolerances().rank);

TangentDecomposition decompose_tangent(const Vec& w, const RealSubspace& lambda_tangent,
                                       const RealSubspace& lambda_prime_tangent,
                                       const RealSubspace& orbit_tangent,
                                       double tol = default_tolerances().rank);

// T is normalized to vanish on the orthocomplement of range(R).
RTData compute_rt(const RealSubspace& orbit_tangent, double tol = default_tolerances().rank);

cplx xi_lambda(const RTData& rt, double v_eff);

double iota_invariant(const LagrangianPair& pair, double tol = default_tolerances().rank);

// pi^{g/2} det(A)^{-1/2} exp(-b^t A^{-1} b / 4), integral of exp(-u^t A u - i u^t b) over R^g.
cplx gaussian_fourier(const CMat& A, const Vec& b);

QuadraticFormsSP quadratic_forms_sp(const RTData& rt, const FrameData& frame,
                                    double tol = default_tolerances().rank);

// Q(w) = S(w') + i P(w), evaluated directly from the decomposition of w.
cplx q_form(const Vec& w, const FrameData& frame, double tol = default_tolerances().rank);

}  // namespace szl
