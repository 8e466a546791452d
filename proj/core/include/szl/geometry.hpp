#pragma once

#include <optional>
#include <vector>

#include "szl/linalg.hpp"
#include "szl/symplectic.hpp"

namespace szl {

// Point of X = S^{2n+1} in C^{n+1}.
class BundlePoint {
 public:
  BundlePoint() = default;
  explicit BundlePoint(CVec coords, double tol = 1e-12);
  static BundlePoint normalized(const CVec& v);

  const CVec& coords() const { return c_; }
  int n() const { return static_cast<int>(c_.size()) - 1; }
  cplx operator()(Eigen::Index i) const { return c_(i); }
  BundlePoint rotated(double theta) const;  // e^{i theta} x

 private:
  CVec c_;
};

// Point of CP^n, stored as a unit representative whose largest coordinate is
// real and positive.
struct ProjectivePoint {
  CVec rep;
  bool same_as(const ProjectivePoint& other, double tol = 1e-10) const;
};

ProjectivePoint hopf_project(const BundlePoint& x);
BundlePoint lift(const ProjectivePoint& m);

// Hermitian product <x,y> = sum x_i conj(y_i).
cplx hermitian(const CVec& x, const CVec& y);

// Horizontal part of a tangent vector v at x (removes the complex line of x).
CVec horizontal_part(const BundlePoint& x, const CVec& v);

// rho(theta, z) = e^{i theta} U^H (1, R z) / sqrt(1 + |z|^2), z = p + i q.
class HeisenbergChart {
 public:
  HeisenbergChart() = default;
  HeisenbergChart(BundlePoint center, CMat unitary_frame, CMat rotation);

  const BundlePoint& center() const { return center_; }
  const CMat& unitary_frame() const { return U_; }
  const CMat& rotation() const { return R_; }
  int n() const { return center_.n(); }

  BundlePoint point(double theta, const CVec& z) const;
  // Columns: images of d/dz_j at the center, unit horizontal vectors in C^{n+1}.
  CMat horizontal_frame() const;
  // Chart coordinates of a horizontal tangent vector at the center.
  CVec coords_of(const CVec& horizontal) const;
  Vec real_coords_of(const CVec& horizontal) const { return to_real(coords_of(horizontal)); }
  CVec vector_of(const CVec& z) const { return horizontal_frame() * z; }

  // Coefficients (a_theta, a_p[0..n), a_q[0..n)) of rho^* alpha at (theta, z).
  Vec alpha_pullback(const CVec& z) const;

  static constexpr double kRadius = 1.0;

 private:
  BundlePoint center_;
  CMat U_, R_;
};

// adapt_to: Lagrangian subspace of R^{2n} in the coordinates of the unrotated
// chart at x0; after adaptation {p = 0} at the origin is mapped onto it.
HeisenbergChart heisenberg_chart(const BundlePoint& x0,
                                 const std::optional<RealSubspace>& adapt_to = std::nullopt);

// rho(0, w / sqrt(k)).
BundlePoint displace(const HeisenbergChart& chart, const CVec& w, double k);

class TorusAction {
 public:
  TorusAction() = default;
  TorusAction(Eigen::MatrixXi weights, Vec shift);

  int g() const { return static_cast<int>(W_.rows()); }
  int n() const { return static_cast<int>(W_.cols()) - 1; }
  const Eigen::MatrixXi& weights() const { return W_; }
  const Vec& shift() const { return shift_; }

  // e^{-i <shift, s>} diag(e^{i (W^t s)_l}) applied to coordinates.
  CVec diagonal(const Vec& s) const;
  BundlePoint act(const Vec& s, const BundlePoint& x) const;
  CVec act(const Vec& s, const CVec& v) const;
  // Infinitesimal generator of the j-th circle factor at x.
  CVec generator(int j, const BundlePoint& x) const;

 private:
  Eigen::MatrixXi W_;
  Vec shift_;
};

Vec moment_map(const TorusAction& action, const BundlePoint& x);

struct OrbitData {
  ProjectivePoint base_point;
  double v_eff = 0.0;
  long stabilizer_order = 0;
  RealSubspace orbit_tangent;  // in the unrotated Heisenberg chart at lift(base_point)
};

// Order of the stabilizer of m in the torus; 0 if it is infinite.
long stabilizer_order(const TorusAction& action, const ProjectivePoint& m, double tol = 1e-12);

// Orbit tangent vectors (columns, real chart coordinates, horizontal projection).
Mat orbit_tangent_vectors(const TorusAction& action, const HeisenbergChart& chart);

OrbitData effective_potential(const TorusAction& action, const ProjectivePoint& m,
                              int nodes_per_dim = 256);

// gcd of all maximal minors of an integer matrix with at least as many rows as
// columns; 0 when the rank is deficient.
long gcd_of_maximal_minors(const Eigen::MatrixXi& D);

}  // namespace szl
