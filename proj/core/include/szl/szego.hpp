#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "szl/legendrian.hpp"

namespace szl {

// Pi_k(x, y) = c_{k,n} <x, y>^k with respect to the measure d sigma / (2 pi)
// on S^{2n+1}; c_{k,n} = (k+n)! / (k! pi^n), so c_{k,1} = (k+1)/pi.
class SzegoKernel {
 public:
  explicit SzegoKernel(int n) : n_(n) {}
  int n() const { return n_; }
  double constant(long k) const;
  cplx eval(long k, const CVec& x, const CVec& y) const;
  // Total mass of the measure the kernel reproduces against: vol(S^{2n+1}) / (2 pi).
  double measure_total() const;

 private:
  int n_;
};

cplx kernel_eval(long k, const BundlePoint& x, const BundlePoint& y);

struct QuadratureOptions {
  int min_nodes = 256;
  int nodes_per_sqrt_k = 8;
  bool check_convergence = false;  // compare against doubled node count
  double tolerance = 1e-8;
  int threads = 1;
  int node_override = 0;  // fixed node count per dimension when positive
  // Raise the node count above the trigonometric degree of the integrand when
  // it is known, so that the periodic rule is exact and does not alias.
  bool alias_guard = true;
};

// max(min_nodes, nodes_per_sqrt_k * ceil(sqrt k) * dims, exact_degree + 1)
// unless overridden; exact_degree <= 0 means unknown.
int quadrature_nodes(long k, int dims, const QuadratureOptions& opt, long exact_degree = 0);

// Trigonometric degree of t -> f_lambda(t) <x, iota(t)>^k per parameter, 0 if unknown.
long integrand_degree(const LegendrianImmersion& L, long k);
// Same for s -> chi_varpi(g_s) <g_s x, y>^k over the torus.
long group_integrand_degree(const TorusAction& action, const Eigen::VectorXi& varpi, long k);

// Nodes of the periodic trapezoidal rule on Lambda with weights f_lambda * D_Lambda * cell volume.
struct LegendrianGrid {
  std::vector<CVec> points;
  std::vector<cplx> weights;
  int nodes_per_dim = 0;
};
LegendrianGrid legendrian_grid(const LegendrianImmersion& L, int nodes_per_dim);

cplx compute_u_k(const LegendrianImmersion& L, long k, const BundlePoint& x,
                 const QuadratureOptions& opt = {});

// Isotypic component: integral over G of chi_varpi(g) u_k(g . x) for unit-mass Haar measure.
cplx compute_u_k_varpi(const LegendrianImmersion& L, const TorusAction& action, const Eigen::VectorXi& varpi,
                       long k, const BundlePoint& x, const QuadratureOptions& opt = {});

// (u_k, v_k) = integral over Lambda of f_lambda conj(v_k) dens_Lambda, v_k the state of Sigma.
cplx hermitian_product(const LegendrianImmersion& L, const LegendrianImmersion& Sigma, long k,
                       const std::optional<TorusAction>& action = std::nullopt,
                       const Eigen::VectorXi& varpi = Eigen::VectorXi(),
                       const QuadratureOptions& opt = {});

struct StateSequence {
  std::map<long, cplx> values;
  std::string meta;

  std::vector<long> ks() const;
  std::vector<double> moduli() const;
};

// u_k (or u_{k,varpi} when an action is given) at x for every k in ks.
StateSequence compute_sequence(const LegendrianImmersion& L, const BundlePoint& x, const std::vector<long>& ks,
                               const std::optional<TorusAction>& action = std::nullopt,
                               const Eigen::VectorXi& varpi = Eigen::VectorXi(),
                               const QuadratureOptions& opt = {});

}  // namespace szl
