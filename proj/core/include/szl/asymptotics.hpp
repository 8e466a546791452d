#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "szl/legendrian.hpp"
#include "szl/szego.hpp"

namespace szl {

struct ReturnTerm {
  double h = 0.0;  // contributes e^{-i k h}
  Vec s;           // torus parameters of g_j
  Vec t;           // parameter of x_j on Lambda
  cplx amplitude;  // everything except e^{-ikh} and the k-power
  cplx chi = 1.0;  // chi_varpi(g_j)
};

// value(k) = k^exponent * coefficient(k), coefficient(k) = sum_j e^{-ikh_j} amplitude_j.
// Pairing predictions use e^{+ikh_j} (sign = +1).
struct LeadingTermPrediction {
  double exponent = 0.0;
  double constant = 1.0;  // k-independent prefactor, already folded into amplitudes
  int phase_sign = -1;
  std::vector<ReturnTerm> per_return_terms;

  cplx coefficient(long k) const;
  cplx value(long k) const;
  // sum_j e^{-ikh_j} chi_j, the interference pattern without amplitudes.
  cplx phase_sum(long k) const;
};

// Leading term of u_{k,varpi}(x + w / sqrt k); w in complex chart coordinates
// of the Heisenberg chart at x (unrotated unless supplied).
LeadingTermPrediction predict_theorem_main(const BundlePoint& x, const LegendrianImmersion& L,
                                           const TorusAction& action, const Eigen::VectorXi& varpi,
                                           const CVec& w,
                                           const std::optional<HeisenbergChart>& chart = std::nullopt);

LeadingTermPrediction predict_action_free(const BundlePoint& x, const LegendrianImmersion& L, const CVec& w,
                                          const std::optional<HeisenbergChart>& chart = std::nullopt);

struct Crossing {
  double h = 0.0;  // e^{ih} L(t) = Sigma(s)
  Vec t, s;
  double iota_j = 0.0;
  CMat Z;
};

// Transverse crossings of the circle saturation of L with Sigma.
std::vector<Crossing> find_crossings(const LegendrianImmersion& L, const LegendrianImmersion& Sigma,
                                     int seeds_per_circle = 64);

// Leading term of (u_k, v_k); only the action-free case is supported.
LeadingTermPrediction predict_pairing_transverse(const LegendrianImmersion& L, const LegendrianImmersion& Sigma,
                                                 const std::optional<TorusAction>& action = std::nullopt,
                                                 const Eigen::VectorXi& varpi = Eigen::VectorXi());

class UnsupportedCase : public Error {
 public:
  using Error::Error;
};

// Phase on the d-torus with analytic derivatives.
struct PhaseFunction {
  int dim = 1;
  std::function<cplx(const Vec&)> value;
  std::function<CVec(const Vec&)> gradient;
  std::function<CMat(const Vec&)> hessian;
};

struct StationaryPointReport {
  Vec location;
  cplx phase_value;
  CMat hessian;
  bool nondegenerate = true;
};

struct StationaryPhaseResult {
  cplx value = 0.0;
  std::vector<StationaryPointReport> points;
  bool rapid_decay = false;  // no real critical point: the integral is O(k^{-inf})
};

struct StationaryPhaseOptions {
  int grid_per_dim = 64;
  double root_tol = 1e-10;
  double im_tol = 1e-8;
};

StationaryPhaseResult stationary_phase_oracle(const PhaseFunction& phase,
                                              const std::function<cplx(const Vec&)>& amplitude, double k,
                                              const StationaryPhaseOptions& opt = {});

// S(t) = -i log <x, iota(t)> for a curve or torus in the model, so that <x,iota>^k = e^{ikS}.
PhaseFunction model_phase(const BundlePoint& x, const LegendrianImmersion& L);

enum class FitKind { PowerLaw, Decay, Unresolved };

struct AsymptoticFit {
  FitKind kind = FitKind::Unresolved;
  double exponent = 0.0;
  double coefficient_modulus = 0.0;
  std::vector<long> subsequence;
  std::vector<double> residuals;  // relative deviation of the fit per k of the subsequence
  bool tail_monotone = false;     // |residuals| non-increasing over the last half
  int dominant_period = 1;
  double decay_rate = 0.0;  // for Decay: |v| ~ e^{-rate k}
  std::string message;
};

AsymptoticFit fit_power_law(const StateSequence& seq,
                            const std::function<cplx(long)>& phase_pattern = nullptr);

struct RapidDecayReport {
  bool passed = false;
  int failed_at_power = -1;
  std::vector<double> block_maxima;  // log scale, for the last N tested
  std::string message;
};

// |v_k| k^N must decrease over the tail and drop by drop_factor for every N <= n_max.
// Values at or below noise_floor count as exact zeros.
RapidDecayReport rapid_decay_test(const StateSequence& seq, int n_max, double drop_factor = 1e3,
                                  double noise_floor = 1e-12);

}  // namespace szl
