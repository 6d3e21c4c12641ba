#pragma once

// Convergence certificates for value iteration and the inequality checkers
// behind them. All error quantities are taken on e_t = V_t - V*, which is
// the same on an MDP and on its normalization, so certificates can be built
// from traces of either.

#include <cstddef>
#include <limits>
#include <optional>
#include <string>

#include "mdpgeo/core.hpp"
#include "mdpgeo/solvers.hpp"

namespace mdpgeo {

/// n^2 - 2n + 2, the largest primitivity exponent of an n x n matrix.
std::size_t wielandt_bound(std::size_t n);

struct Primitivity {
  /// Smallest N with P^N entrywise positive.
  std::size_t exponent = 0;
  /// Minimum entry of P^N.
  double omega = 0.0;
};

/// Exponent decided on the boolean support, omega from the numeric power.
/// Empty when the matrix is not primitive. Throws Error(precondition) when p
/// is not square row-stochastic.
std::optional<Primitivity> primitivity(const Eigen::MatrixXd& p);

/// Smallest k in [1, max(1, n-1)] with (support(p) + I)^k positive; empty
/// when p is reducible.
std::optional<std::size_t> lazy_exponent(const Eigen::MatrixXd& p);

struct AlphaCertificate {
  double alpha = 1.0;
  std::size_t exponent = 0;  // N_alpha
  double delta_prime = 0.0;
  double delta_prime_alpha = 0.0;
  double tau = 0.0;
  /// gamma^N_alpha * tau_alpha; always below 1.
  double contraction = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  bool holds = false;
  /// delta' = delta / (gamma max_t span(e_t)) without the P* entry factor.
  double delta_prime_plain = 0.0;
  double tau_plain = 0.0;
  bool plain_holds = false;
};

struct ConvergenceCertificate {
  std::size_t n = 0;
  std::size_t n_actions = 0;
  double gamma = 0.0;
  std::size_t exponent = 0;  // N
  double omega = 0.0;
  double delta = 0.0;
  /// omega * prod_{t<N} min(1, delta / (gamma span(e_t))).
  double phi = 0.0;
  double tau = 0.0;
  /// omega delta^N / (gamma^N prod_{t=1..N} span(e_t)); may be infinite.
  double phi_printed = 0.0;
  double tau_printed = 0.0;
  bool printed_holds = false;
  /// span(e_N) <= gamma^N tau span(e_0).
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  bool holds = false;
  double epsilon = 0.0;
  double predicted_vi_iters = 0.0;
  double gamma_eff = 0.0;
  double predicted_pi_iters = 0.0;
  std::string trace_digest;
  std::optional<AlphaCertificate> alpha;
};

struct CertifyOptions {
  /// Accuracy used for the iteration-count prediction.
  double epsilon = 1e-6;
};

/// Certificate for a standard (sync, alpha = 1, unfiltered) trace. Throws
/// Error(assumption_violated) when P* is not primitive or pi* is not unique,
/// Error(precondition) when the trace is too short or not standard.
ConvergenceCertificate certify(const Mdp& mdp, const RunTrace& trace, const CertifyOptions& opts = {});

/// Learning-rate variant; the trace must be synchronous with the given alpha.
ConvergenceCertificate certify_alpha(const Mdp& mdp, const RunTrace& trace, double alpha,
                                     const CertifyOptions& opts = {});

/// (log(1/eps) + log(1/(1-gamma))) / (log(1/gamma) + log(1/tau)/N).
double predicted_vi_iterations(double gamma, double epsilon, double tau, std::size_t exponent);

struct LemmaReport {
  double lhs = 0.0;
  double bound = 0.0;
  bool same_state = false;
  bool holds = false;
};

/// |(adv(a1,v) - adv(a2,v)) - (r1 - r2)| against gamma span(v) (same state)
/// or (1 + gamma) span(v).
LemmaReport check_lemma_adv_span(const Mdp& mdp, ActionId a1, ActionId a2, const ValueVector& v);

/// Geometric mean of span(x_{t+1}) / span(x_t) after `burn_in`, with
/// x_t = V_t - reference (or V_t). Stops at the first span <= 1e-13. Throws
/// Error(precondition) when fewer than two ratios remain.
double empirical_rate(const RunTrace& trace, std::size_t burn_in = 5,
                      const std::optional<ValueVector>& reference = std::nullopt);

struct RecursionReport {
  std::size_t checks = 0;
  std::size_t violations = 0;
  std::size_t equality_checks = 0;
  std::size_t equality_violations = 0;
  /// max of e_{t+1}(s) - gamma (P_t e_t)(s).
  double max_excess = -std::numeric_limits<double>::infinity();
};

/// e_{t+1}(s) <= gamma (P_t e_t)(s) + tol at every state and step of a
/// standard trace, with equality where pi_t(s) = pi*(s).
RecursionReport check_error_recursion(const Mdp& mdp, const RunTrace& trace, const ExactSolution& opt,
                                      double tol = 1e-9);

struct MixingReport {
  std::size_t checks = 0;
  std::size_t skipped = 0;
  std::size_t violations = 0;
  /// min of d - delta / (gamma span(e_t)).
  double min_slack = std::numeric_limits<double>::infinity();
};

/// For every step where pi_t(s) != pi*(s), the weight d with
/// e_{t+1}(s) = gamma [d (P* e_t)(s) + (1-d) (P_t e_t)(s)] is at least
/// delta / (gamma span(e_t)). Cases with (P* e_t)(s) = (P_t e_t)(s) are skipped.
MixingReport check_mixing_bound(const Mdp& mdp, const RunTrace& trace, const ExactSolution& opt,
                                double tol = 1e-9);

/// Componentwise gamma P* V_t <= V_{t+1} <= gamma P_t V_t on a standard trace
/// of a normalized MDP. Returns the number of violated entries.
std::size_t check_sandwich(const Mdp& normalized, const RunTrace& trace, const Policy& optimal,
                           double tol = 1e-9);

}  // namespace mdpgeo
