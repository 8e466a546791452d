#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "szl/geometry.hpp"

namespace szl {

// Immersion of the parameter torus [0, 2 pi)^d into X.
class LegendrianImmersion {
 public:
  using MapFn = std::function<CVec(const Vec&)>;
  using JacFn = std::function<CMat(const Vec&)>;
  using WeightFn = std::function<cplx(const Vec&)>;

  LegendrianImmersion() = default;
  // A missing Jacobian is replaced by central differences.
  LegendrianImmersion(std::string name, int dim, int n, MapFn map, JacFn jacobian = nullptr,
                      WeightFn f_lambda = nullptr);

  const std::string& name() const { return name_; }
  int dim() const { return dim_; }
  int n() const { return n_; }

  CVec map(const Vec& t) const { return map_(t); }
  BundlePoint point(const Vec& t) const { return BundlePoint(map_(t), 1e-9); }
  CMat jacobian(const Vec& t) const;
  cplx f_lambda(const Vec& t) const { return f_ ? f_(t) : cplx(1.0); }
  bool has_analytic_jacobian() const { return static_cast<bool>(jac_); }

  // Clears the weight degree; set it again with with_trig_degree when known.
  LegendrianImmersion with_weight(WeightFn f) const;
  // Coordinates are trigonometric polynomials of this degree in each parameter
  // (0: unknown); weight_degree likewise for f_lambda (-1: unknown).
  LegendrianImmersion with_trig_degree(int degree, int weight_degree = 0) const;
  int trig_degree() const { return trig_degree_; }
  int weight_degree() const { return weight_degree_; }
  // Composition with a unitary map of C^{n+1} (still Legendrian).
  LegendrianImmersion transformed(const CMat& unitary, const std::string& name) const;

 private:
  std::string name_;
  int dim_ = 0, n_ = 0;
  int trig_degree_ = 0, weight_degree_ = 0;
  MapFn map_;
  JacFn jac_;
  WeightFn f_;
};

LegendrianImmersion builtin_knot(double a);
LegendrianImmersion builtin_torus_product(int n, const Vec& a);
// (r0 e^{i m0 t}, r1 e^{i m1 t}) with r0^2 m0 + r1^2 m1 = 0; requires m0 m1 < 0.
LegendrianImmersion builtin_torus_knot(int m0, int m1);

// Build a built-in family from its name and parameter vector.
LegendrianImmersion make_builtin(const std::string& family, const Vec& params);
std::vector<std::string> builtin_names();

double riemannian_density(const LegendrianImmersion& L, const Vec& t);

// max |iota^* alpha| and min singular value of the real Jacobian over a grid.
double legendrian_defect(const LegendrianImmersion& L, int samples_per_dim);
double immersion_margin(const LegendrianImmersion& L, int samples_per_dim);

struct ReturnElement {
  double h = 0.0;  // circle element e^{i h}
  Vec g_params;    // torus element
  Vec t_params;    // parameter of the target on Lambda
  BundlePoint target;
  double residual = 0.0;
};

struct ReturnSearchOptions {
  int seeds_per_circle = 64;
  int max_iterations = 100;
};

struct ReturnSearchReport {
  std::vector<ReturnElement> elements;
  int seeds_tried = 0;
  int seeds_not_converged = 0;  // seeds whose polish stalled above the root tolerance
};

// All (h, g, t) with e^{ih} (g . x) = iota(t). Without an action only h and t vary.
ReturnSearchReport find_return_elements_report(const BundlePoint& x, const LegendrianImmersion& L,
                                               const std::optional<TorusAction>& action,
                                               const ReturnSearchOptions& opt = {});
std::vector<ReturnElement> find_return_elements(const BundlePoint& x, const LegendrianImmersion& L,
                                                const std::optional<TorusAction>& action = std::nullopt,
                                                const ReturnSearchOptions& opt = {});

// Heisenberg chart at iota(t) adapted to Lambda.
HeisenbergChart adapted_chart(const LegendrianImmersion& L, const Vec& t);

struct FrameAt {
  HeisenbergChart chart;  // adapted at iota(t)
  FrameData frame;        // in the chart's real coordinates
};

// Adapted frame data at a point of Lambda'. Without an action the orbit is trivial.
FrameAt frame_at(const LegendrianImmersion& L, const Vec& t, const std::optional<TorusAction>& action);

struct LambdaPrimePoint {
  Vec t;
  BundlePoint x;
  double min_principal_angle = 0.0;  // between T Lambda and the orbit tangent, radians
  int rank_dphi = 0;                 // rank of d(Phi o iota)
  double moment_residual = 0.0;
};

struct TransversalityReport {
  bool ok = true;
  int expected_dim = 0;   // dim Lambda - g
  int estimated_dim = 0;  // dim Lambda - min rank found
  std::vector<LambdaPrimePoint> points;
  std::vector<std::string> problems;
};

TransversalityReport transversality_check(const LegendrianImmersion& L, const TorusAction& action,
                                          int seeds_per_circle = 64);

}  // namespace szl
