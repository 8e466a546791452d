#include "szl/szego.hpp"

#include <cmath>
#include <sstream>

#include "szl/parallel.hpp"

namespace szl {

namespace {

constexpr int kBlocks = 64;

template <class F>
cplx block_sum(long count, int threads, F&& term) {
  std::vector<cplx> partial(kBlocks, 0.0);
  parallel_blocks(kBlocks, threads, [&](int b) {
    const long lo = count * b / kBlocks, hi = count * (b + 1) / kBlocks;
    cplx s = 0.0;
    for (long i = lo; i < hi; ++i) s += term(i);
    partial[b] = s;
  });
  cplx total = 0.0;
  for (const cplx& p : partial) total += p;
  return total;
}

// Power sum over the grid of <y, iota>^k times weights; y fixed.
cplx kernel_sum(const LegendrianGrid& grid, long k, const CVec& y, int threads) {
  return block_sum(static_cast<long>(grid.points.size()), threads, [&](long i) {
    return ipow(hermitian(y, grid.points[i]), k) * grid.weights[i];
  });
}

}  // namespace

double SzegoKernel::constant(long k) const {
  if (k < 0) throw Error("SzegoKernel: k must be nonnegative");
  return std::exp(std::lgamma(static_cast<double>(k + n_ + 1)) - std::lgamma(static_cast<double>(k + 1)) -
                  n_ * std::log(kPi));
}

cplx SzegoKernel::eval(long k, const CVec& x, const CVec& y) const {
  return constant(k) * ipow(hermitian(x, y), k);
}

double SzegoKernel::measure_total() const {
  return std::pow(kPi, n_) / std::tgamma(static_cast<double>(n_ + 1));
}

cplx kernel_eval(long k, const BundlePoint& x, const BundlePoint& y) {
  if (x.n() != y.n()) throw Error("kernel_eval: dimension mismatch");
  return SzegoKernel(x.n()).eval(k, x.coords(), y.coords());
}

int quadrature_nodes(long k, int dims, const QuadratureOptions& opt, long exact_degree) {
  if (opt.node_override > 0) return opt.node_override;
  const int sq = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(std::max(0L, k)))));
  int n = std::max(opt.min_nodes, opt.nodes_per_sqrt_k * sq * dims);
  if (opt.alias_guard && exact_degree > 0) n = std::max<long>(n, exact_degree + 1);
  return n;
}

long integrand_degree(const LegendrianImmersion& L, long k) {
  if (L.trig_degree() <= 0 || L.weight_degree() < 0) return 0;
  return L.trig_degree() * k + L.weight_degree();
}

long group_integrand_degree(const TorusAction& action, const Eigen::VectorXi& varpi, long k) {
  double freq = 0.0;
  for (int j = 0; j < action.g(); ++j)
    for (int l = 0; l <= action.n(); ++l)
      freq = std::max(freq, std::fabs(action.weights()(j, l) - action.shift()(j)));
  const long vmax = varpi.size() ? static_cast<long>(varpi.cwiseAbs().maxCoeff()) : 0;
  return static_cast<long>(std::ceil(freq)) * k + vmax;
}

LegendrianGrid legendrian_grid(const LegendrianImmersion& L, int N) {
  const int d = L.dim();
  LegendrianGrid g;
  g.nodes_per_dim = N;
  long total = 1;
  for (int j = 0; j < d; ++j) total *= N;
  g.points.resize(total);
  g.weights.resize(total);
  const double h = 2.0 * kPi / N;
  const double cell = std::pow(h, d);
  Vec t(d);
  for (long c = 0; c < total; ++c) {
    long r = c;
    for (int j = 0; j < d; ++j) {
      t(j) = h * static_cast<double>(r % N);
      r /= N;
    }
    g.points[c] = L.map(t);
    g.weights[c] = L.f_lambda(t) * riemannian_density(L, t) * cell;
  }
  return g;
}

namespace {

void check_agreement(cplx a, cplx b, double scale, double tol, const char* what) {
  const double ref = std::max(std::abs(b), 1e-12 * scale);
  if (std::abs(a - b) > tol * ref) {
    std::ostringstream os;
    os << what << ": node doubling changed the result from " << a << " to " << b;
    throw ConvergenceError(os.str());
  }
}

cplx u_k_on_grid(const LegendrianGrid& grid, double c, long k, const CVec& x, int threads) {
  return c * kernel_sum(grid, k, x, threads);
}

double l1_scale(const LegendrianGrid& grid, double c) {
  double s = 0.0;
  for (const cplx& w : grid.weights) s += std::abs(w);
  return c * s;
}

}  // namespace

cplx compute_u_k(const LegendrianImmersion& L, long k, const BundlePoint& x, const QuadratureOptions& opt) {
  if (x.n() != L.n()) throw Error("compute_u_k: dimension mismatch");
  const double c = SzegoKernel(L.n()).constant(k);
  const int N = quadrature_nodes(k, L.dim(), opt, integrand_degree(L, k));
  LegendrianGrid grid = legendrian_grid(L, N);
  const cplx v = u_k_on_grid(grid, c, k, x.coords(), opt.threads);
  if (opt.check_convergence) {
    LegendrianGrid fine = legendrian_grid(L, 2 * N);
    const cplx v2 = u_k_on_grid(fine, c, k, x.coords(), opt.threads);
    check_agreement(v, v2, l1_scale(grid, c), opt.tolerance, "compute_u_k");
  }
  return v;
}

namespace {

cplx varpi_average(const LegendrianGrid& grid, double c, const TorusAction& action, const Eigen::VectorXi& varpi,
                   long k, const CVec& x, int NG, int threads) {
  const int g = action.g();
  long total = 1;
  for (int j = 0; j < g; ++j) total *= NG;
  const double h = 2.0 * kPi / NG;
  const Vec wv = varpi.cast<double>();
  // One block sum per group node keeps the reduction order fixed.
  std::vector<cplx> per_node(total);
  parallel_blocks(static_cast<int>(std::min<long>(total, kBlocks)), threads, [&](int b) {
    const int nb = static_cast<int>(std::min<long>(total, kBlocks));
    for (long gi = total * b / nb; gi < total * (b + 1) / nb; ++gi) {
      Vec sv(g);
      long r = gi;
      for (int j = 0; j < g; ++j) {
        sv(j) = h * static_cast<double>(r % NG);
        r /= NG;
      }
      const CVec gx = action.act(sv, x);
      per_node[gi] = std::polar(1.0, wv.dot(sv)) * kernel_sum(grid, k, gx, 1);
    }
  });
  cplx s = 0.0;
  for (const cplx& v : per_node) s += v;
  return c * s / static_cast<double>(total);
}

}  // namespace

cplx compute_u_k_varpi(const LegendrianImmersion& L, const TorusAction& action, const Eigen::VectorXi& varpi,
                       long k, const BundlePoint& x, const QuadratureOptions& opt) {
  if (x.n() != L.n() || action.n() != L.n()) throw Error("compute_u_k_varpi: dimension mismatch");
  if (varpi.size() != action.g()) throw Error("compute_u_k_varpi: varpi must have one entry per circle factor");
  if ((action.shift().array() - action.shift().array().round()).abs().maxCoeff() > 1e-12)
    throw Error("compute_u_k_varpi: the shift must be integral for the group average");
  const double c = SzegoKernel(L.n()).constant(k);
  const int N = quadrature_nodes(k, L.dim(), opt, integrand_degree(L, k));
  const int NG = quadrature_nodes(k, action.g(), opt, group_integrand_degree(action, varpi, k));
  LegendrianGrid grid = legendrian_grid(L, N);
  const cplx v = varpi_average(grid, c, action, varpi, k, x.coords(), NG, opt.threads);
  if (opt.check_convergence) {
    LegendrianGrid fine = legendrian_grid(L, 2 * N);
    const cplx v2 = varpi_average(fine, c, action, varpi, k, x.coords(), 2 * NG, opt.threads);
    check_agreement(v, v2, l1_scale(grid, c), opt.tolerance, "compute_u_k_varpi");
  }
  return v;
}

namespace {

cplx pairing_on_grids(const LegendrianGrid& gl, const LegendrianGrid& gs, double c, long k,
                      const std::optional<TorusAction>& action, const Eigen::VectorXi& varpi, int NG,
                      int threads) {
  const long nl = static_cast<long>(gl.points.size());
  if (!action || action->g() == 0) {
    cplx s = block_sum(nl, threads, [&](long i) {
      // conj(v_k(y)) = conj(c sum <y, sigma>^k w) ; c is real
      return gl.weights[i] * std::conj(kernel_sum(gs, k, gl.points[i], 1));
    });
    return c * s;
  }
  const int g = action->g();
  long total = 1;
  for (int j = 0; j < g; ++j) total *= NG;
  const double h = 2.0 * kPi / NG;
  const Vec wv = varpi.cast<double>();
  cplx s = block_sum(nl, threads, [&](long i) {
    cplx vk = 0.0;
    Vec sv(g);
    for (long gi = 0; gi < total; ++gi) {
      long r = gi;
      for (int j = 0; j < g; ++j) {
        sv(j) = h * static_cast<double>(r % NG);
        r /= NG;
      }
      CVec gy = action->act(sv, gl.points[i]);
      vk += std::polar(1.0, wv.dot(sv)) * kernel_sum(gs, k, gy, 1);
    }
    vk /= static_cast<double>(total);
    return gl.weights[i] * std::conj(vk);
  });
  return c * s;
}

}  // namespace

cplx hermitian_product(const LegendrianImmersion& L, const LegendrianImmersion& Sigma, long k,
                       const std::optional<TorusAction>& action, const Eigen::VectorXi& varpi,
                       const QuadratureOptions& opt) {
  if (L.n() != Sigma.n()) throw Error("hermitian_product: dimension mismatch");
  if (action && varpi.size() != action->g()) throw Error("hermitian_product: varpi dimension");
  const double c = SzegoKernel(L.n()).constant(k);
  const int NL = quadrature_nodes(k, L.dim(), opt, integrand_degree(L, k));
  const int NS = quadrature_nodes(k, Sigma.dim(), opt, integrand_degree(Sigma, k));
  const int NG = action ? quadrature_nodes(k, action->g(), opt, group_integrand_degree(*action, varpi, k)) : 1;
  LegendrianGrid gl = legendrian_grid(L, NL), gs = legendrian_grid(Sigma, NS);
  const cplx v = pairing_on_grids(gl, gs, c, k, action, varpi, NG, opt.threads);
  if (opt.check_convergence) {
    LegendrianGrid gl2 = legendrian_grid(L, 2 * NL), gs2 = legendrian_grid(Sigma, 2 * NS);
    const cplx v2 = pairing_on_grids(gl2, gs2, c, k, action, varpi, 2 * NG, opt.threads);
    check_agreement(v, v2, c * l1_scale(gl, 1.0) * l1_scale(gs, 1.0), opt.tolerance, "hermitian_product");
  }
  return v;
}

std::vector<long> StateSequence::ks() const {
  std::vector<long> out;
  for (const auto& [k, v] : values) out.push_back(k);
  return out;
}

std::vector<double> StateSequence::moduli() const {
  std::vector<double> out;
  for (const auto& [k, v] : values) out.push_back(std::abs(v));
  return out;
}

StateSequence compute_sequence(const LegendrianImmersion& L, const BundlePoint& x, const std::vector<long>& ks,
                               const std::optional<TorusAction>& action, const Eigen::VectorXi& varpi,
                               const QuadratureOptions& opt) {
  StateSequence seq;
  std::ostringstream meta;
  meta << L.name() << " at x = (" << x.coords().transpose() << ")";
  if (action) meta << ", varpi = (" << varpi.transpose() << ")";
  seq.meta = meta.str();
  std::vector<cplx> vals(ks.size());
  QuadratureOptions inner = opt;
  inner.threads = 1;
  parallel_blocks(static_cast<int>(ks.size()), opt.threads, [&](int i) {
    vals[i] = action ? compute_u_k_varpi(L, *action, varpi, ks[i], x, inner) : compute_u_k(L, ks[i], x, inner);
  });
  for (size_t i = 0; i < ks.size(); ++i) seq.values[ks[i]] = vals[i];
  return seq;
}

}  // namespace szl
