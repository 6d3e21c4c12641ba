#include "mdpgeo/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mdpgeo/io.hpp"
#include "mdpgeo/transforms.hpp"

namespace mdpgeo {

std::size_t wielandt_bound(std::size_t n) { return n == 0 ? 0 : n * n - 2 * n + 2; }

namespace {

using BoolMatrix = Eigen::Matrix<unsigned char, Eigen::Dynamic, Eigen::Dynamic>;

void check_stochastic(const Eigen::MatrixXd& p) {
  if (p.rows() != p.cols() || p.rows() == 0) {
    throw Error(ErrorKind::precondition, "transition matrix must be square and nonempty");
  }
  if (!p.allFinite() || (p.array() < 0.0).any()) {
    throw Error(ErrorKind::precondition, "transition matrix has negative or non-finite entries");
  }
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if (std::abs(p.row(i).sum() - 1.0) > 1e-9) {
      throw Error(ErrorKind::precondition, "transition matrix row " + std::to_string(i) + " does not sum to 1");
    }
  }
}

BoolMatrix support(const Eigen::MatrixXd& p) { return (p.array() > 0.0).cast<unsigned char>(); }

BoolMatrix bool_product(const BoolMatrix& a, const BoolMatrix& b) {
  const Eigen::Index n = a.rows();
  BoolMatrix out = BoolMatrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) {
      if (!a(i, k)) continue;
      for (Eigen::Index j = 0; j < n; ++j) out(i, j) |= b(k, j);
    }
  }
  return out;
}

bool all_set(const BoolMatrix& m) { return (m.array() != 0).all(); }

double error_span(const IterationRecord& rec, const ValueVector& optimum) { return span(rec.values - optimum); }

// Relative floating-point slack for the block inequalities.
double rounding_slack(const RunTrace& trace, const ValueVector& optimum) {
  double scale = optimum.cwiseAbs().maxCoeff();
  for (const auto& rec : trace.records) scale = std::max(scale, rec.values.cwiseAbs().maxCoeff());
  return 1e-12 * std::max(1.0, scale);
}

struct OptimumFacts {
  ExactSolution opt;
  Eigen::MatrixXd p_star;
  Primitivity prim;
};

OptimumFacts assumption_oracle(const Mdp& mdp) {
  OptimumFacts o{solve_exact(mdp), {}, {}};
  if (!o.opt.unique) {
    throw Error(ErrorKind::assumption_violated, "optimal policy is not unique (delta = " +
                                                    std::to_string(o.opt.delta) + ")");
  }
  o.p_star = transition_matrix(mdp, o.opt.policy);
  const auto prim = primitivity(o.p_star);
  if (!prim) throw Error(ErrorKind::assumption_violated, "optimal chain is not irreducible and aperiodic");
  o.prim = *prim;
  return o;
}

void fill_common(ConvergenceCertificate& cert, const Mdp& mdp, const RunTrace& trace, const OptimumFacts& o,
                 const CertifyOptions& opts) {
  cert.n = mdp.n_states();
  cert.n_actions = mdp.n_actions();
  cert.gamma = mdp.gamma();
  cert.exponent = o.prim.exponent;
  cert.omega = o.prim.omega;
  cert.delta = o.opt.delta;
  cert.epsilon = opts.epsilon;
  cert.gamma_eff = effective_gamma(mdp).gamma_eff;
  cert.predicted_pi_iters = static_cast<double>(mdp.n_actions()) / (1.0 - cert.gamma_eff);
  cert.trace_digest = trace_digest(trace);
}

double mixing_weight(double delta, double gamma, double error_span) {
  if (error_span <= 0.0) return 1.0;
  return std::min(1.0, delta / (gamma * error_span));
}

}  // namespace

std::optional<Primitivity> primitivity(const Eigen::MatrixXd& p) {
  check_stochastic(p);
  const auto n = static_cast<std::size_t>(p.rows());
  const BoolMatrix base = support(p);
  BoolMatrix power = base;
  for (std::size_t k = 1; k <= wielandt_bound(n); ++k) {
    if (all_set(power)) {
      Eigen::MatrixXd numeric = p;
      for (std::size_t i = 1; i < k; ++i) numeric = numeric * p;
      return Primitivity{k, numeric.minCoeff()};
    }
    power = bool_product(power, base);
  }
  return std::nullopt;
}

std::optional<std::size_t> lazy_exponent(const Eigen::MatrixXd& p) {
  check_stochastic(p);
  const auto n = static_cast<std::size_t>(p.rows());
  BoolMatrix base = support(p);
  base.diagonal().setOnes();
  BoolMatrix power = base;
  for (std::size_t k = 1; k <= std::max<std::size_t>(1, n - 1); ++k) {
    if (all_set(power)) return k;
    power = bool_product(power, base);
  }
  return std::nullopt;
}

double predicted_vi_iterations(double gamma, double epsilon, double tau, std::size_t exponent) {
  const double numerator = std::log(1.0 / epsilon) + std::log(1.0 / (1.0 - gamma));
  const double extra = tau > 0.0 ? std::log(1.0 / tau) / static_cast<double>(exponent)
                                 : std::numeric_limits<double>::infinity();
  const double denominator = std::log(1.0 / gamma) + extra;
  if (!(denominator > 0.0)) return std::numeric_limits<double>::infinity();
  return std::max(0.0, numerator) / denominator;
}

ConvergenceCertificate certify(const Mdp& mdp, const RunTrace& trace, const CertifyOptions& opts) {
  if (!trace.standard()) {
    throw Error(ErrorKind::precondition, "certify needs a synchronous, alpha = 1, unfiltered trace");
  }
  const OptimumFacts o = assumption_oracle(mdp);
  const std::size_t big_n = o.prim.exponent;
  if (trace.records.size() < big_n + 1) {
    throw Error(ErrorKind::precondition, "trace has " + std::to_string(trace.iterations()) +
                                             " iterations, certificate needs " + std::to_string(big_n));
  }
  ConvergenceCertificate cert;
  fill_common(cert, mdp, trace, o, opts);

  const double g = mdp.gamma();
  const auto n = static_cast<double>(mdp.n_states());
  const ValueVector& vstar = o.opt.values;

  double weights = 1.0;
  for (std::size_t t = 0; t < big_n; ++t) weights *= mixing_weight(o.opt.delta, g, error_span(trace.records[t], vstar));
  cert.phi = o.prim.omega * weights;
  cert.tau = 1.0 - n * cert.phi;

  double log_printed = std::log(o.prim.omega) + static_cast<double>(big_n) * (std::log(o.opt.delta) - std::log(g));
  for (std::size_t t = 1; t <= big_n; ++t) log_printed -= std::log(error_span(trace.records[t], vstar));
  cert.phi_printed = std::exp(log_printed);
  cert.tau_printed = 1.0 - n * cert.phi_printed;

  const double gamma_n = std::pow(g, static_cast<double>(big_n));
  const double span0 = error_span(trace.records.front(), vstar);
  const double slack = rounding_slack(trace, vstar);
  cert.lhs = error_span(trace.records[big_n], vstar);
  cert.rhs = gamma_n * cert.tau * span0;
  cert.margin = cert.rhs - cert.lhs;
  cert.holds = cert.lhs <= cert.rhs + slack;
  cert.printed_holds = cert.lhs <= gamma_n * cert.tau_printed * span0 + slack;
  cert.predicted_vi_iters = predicted_vi_iterations(g, opts.epsilon, cert.tau, big_n);
  return cert;
}

ConvergenceCertificate certify_alpha(const Mdp& mdp, const RunTrace& trace, double alpha,
                                     const CertifyOptions& opts) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::domain, "learning rate must lie in (0,1)");
  if (!trace.synchronous || trace.filtered || trace.alpha != alpha) {
    throw Error(ErrorKind::precondition, "certify_alpha needs an unfiltered synchronous trace with the same alpha");
  }
  const OptimumFacts o = assumption_oracle(mdp);
  const std::size_t big_n = *lazy_exponent(o.p_star);
  if (trace.records.size() < big_n + 1) {
    throw Error(ErrorKind::precondition, "trace has " + std::to_string(trace.iterations()) +
                                             " iterations, certificate needs " + std::to_string(big_n));
  }
  ConvergenceCertificate cert;
  fill_common(cert, mdp, trace, o, opts);

  const double g = mdp.gamma();
  const auto n = static_cast<double>(mdp.n_states());
  const auto nn = static_cast<double>(big_n);
  const ValueVector& vstar = o.opt.values;

  AlphaCertificate ac;
  ac.alpha = alpha;
  ac.exponent = big_n;

  double min_weight = 1.0;
  double max_span = 0.0;
  for (std::size_t t = 0; t < big_n; ++t) {
    const double sp = error_span(trace.records[t], vstar);
    min_weight = std::min(min_weight, mixing_weight(o.opt.delta, g, sp));
    max_span = std::max(max_span, sp);
  }
  double min_positive = 1.0;
  for (Eigen::Index i = 0; i < o.p_star.size(); ++i) {
    const double x = o.p_star.data()[i];
    if (x > 0.0) min_positive = std::min(min_positive, x);
  }
  const double row_sum = (1.0 - alpha) / g + alpha;
  const double diagonal_floor = (1.0 - alpha) * g;

  ac.delta_prime = min_weight * min_positive;
  ac.delta_prime_alpha = std::min(alpha * ac.delta_prime, diagonal_floor);
  ac.tau = std::pow(row_sum, nn) - n * std::pow(ac.delta_prime_alpha, nn);
  ac.contraction = std::pow(g, nn) * ac.tau;

  ac.delta_prime_plain = max_span > 0.0 ? o.opt.delta / (g * max_span) : std::numeric_limits<double>::infinity();
  ac.tau_plain = std::pow(row_sum, nn) - n * std::pow(std::min(alpha * ac.delta_prime_plain, diagonal_floor), nn);

  const double span0 = error_span(trace.records.front(), vstar);
  const double slack = rounding_slack(trace, vstar);
  ac.lhs = error_span(trace.records[big_n], vstar);
  ac.rhs = ac.contraction * span0;
  ac.margin = ac.rhs - ac.lhs;
  ac.holds = ac.lhs <= ac.rhs + slack;
  ac.plain_holds = ac.lhs <= std::pow(g, nn) * ac.tau_plain * span0 + slack;

  cert.tau = ac.tau;
  cert.lhs = ac.lhs;
  cert.rhs = ac.rhs;
  cert.margin = ac.margin;
  cert.holds = ac.holds;
  cert.phi = std::nan("");
  cert.phi_printed = std::nan("");
  cert.tau_printed = std::nan("");
  cert.printed_holds = ac.plain_holds;
  cert.predicted_vi_iters = predicted_vi_iterations(g, opts.epsilon, ac.tau, big_n);
  cert.alpha = ac;
  return cert;
}

LemmaReport check_lemma_adv_span(const Mdp& mdp, ActionId a1, ActionId a2, const ValueVector& v) {
  LemmaReport out;
  const double g = mdp.gamma();
  const double shifted = (advantage(mdp, a1, v) - advantage(mdp, a2, v)) -
                         (mdp.action(a1).reward - mdp.action(a2).reward);
  out.lhs = std::abs(shifted);
  out.same_state = mdp.action(a1).state == mdp.action(a2).state;
  out.bound = (out.same_state ? g : 1.0 + g) * span(v);
  out.holds = out.lhs <= out.bound + 1e-12 * std::max(1.0, v.cwiseAbs().maxCoeff());
  return out;
}

double empirical_rate(const RunTrace& trace, std::size_t burn_in, const std::optional<ValueVector>& reference) {
  constexpr double kFloor = 1e-13;
  std::vector<double> spans;
  spans.reserve(trace.records.size());
  for (const auto& rec : trace.records) spans.push_back(reference ? span(rec.values - *reference) : rec.span_v);

  double log_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t t = burn_in; t + 1 < spans.size(); ++t) {
    if (spans[t] <= kFloor || spans[t + 1] <= kFloor) break;
    log_sum += std::log(spans[t + 1] / spans[t]);
    ++count;
  }
  if (count < 2) {
    throw Error(ErrorKind::precondition, "trace too short or span underflow: " + std::to_string(count) +
                                             " usable ratios after burn-in " + std::to_string(burn_in));
  }
  return std::exp(log_sum / static_cast<double>(count));
}

RecursionReport check_error_recursion(const Mdp& mdp, const RunTrace& trace, const ExactSolution& opt, double tol) {
  if (!trace.standard()) throw Error(ErrorKind::precondition, "error recursion needs a standard trace");
  RecursionReport out;
  const double g = mdp.gamma();
  for (std::size_t t = 0; t + 1 < trace.records.size(); ++t) {
    const ValueVector e_now = trace.records[t].values - opt.values;
    const ValueVector e_next = trace.records[t + 1].values - opt.values;
    const Policy& pi_t = trace.records[t].greedy;
    for (StateId s = 0; s < mdp.n_states(); ++s) {
      const double rhs = g * mdp.action(pi_t.choice[s]).probs.dot(e_now);
      const double excess = e_next[static_cast<Eigen::Index>(s)] - rhs;
      ++out.checks;
      out.max_excess = std::max(out.max_excess, excess);
      if (excess > tol) ++out.violations;
      if (pi_t.choice[s] == opt.policy.choice[s]) {
        ++out.equality_checks;
        if (std::abs(excess) > tol) ++out.equality_violations;
      }
    }
  }
  return out;
}

MixingReport check_mixing_bound(const Mdp& mdp, const RunTrace& trace, const ExactSolution& opt, double tol) {
  if (!trace.standard()) throw Error(ErrorKind::precondition, "mixing bound needs a standard trace");
  MixingReport out;
  const double g = mdp.gamma();
  for (std::size_t t = 0; t + 1 < trace.records.size(); ++t) {
    const ValueVector e_now = trace.records[t].values - opt.values;
    const ValueVector e_next = trace.records[t + 1].values - opt.values;
    const double sp = span(e_now);
    const Policy& pi_t = trace.records[t].greedy;
    for (StateId s = 0; s < mdp.n_states(); ++s) {
      const ActionId chosen = pi_t.choice[s];
      const ActionId best = opt.policy.choice[s];
      if (chosen == best) continue;
      const double optimal_mix = g * mdp.action(best).probs.dot(e_now);
      const double greedy_mix = g * mdp.action(chosen).probs.dot(e_now);
      if (std::abs(optimal_mix - greedy_mix) <= 1e-12 * std::max(1.0, e_now.cwiseAbs().maxCoeff())) {
        ++out.skipped;
        continue;
      }
      const double d = (e_next[static_cast<Eigen::Index>(s)] - greedy_mix) / (optimal_mix - greedy_mix);
      const double slack = d - opt.delta / (g * sp);
      ++out.checks;
      out.min_slack = std::min(out.min_slack, slack);
      if (slack < -tol) ++out.violations;
    }
  }
  return out;
}

std::size_t check_sandwich(const Mdp& normalized, const RunTrace& trace, const Policy& optimal, double tol) {
  if (!trace.standard()) throw Error(ErrorKind::precondition, "sandwich check needs a standard trace");
  const double g = normalized.gamma();
  const Eigen::MatrixXd p_star = transition_matrix(normalized, optimal);
  std::size_t violations = 0;
  for (std::size_t t = 0; t + 1 < trace.records.size(); ++t) {
    const ValueVector& v = trace.records[t].values;
    const ValueVector lower = g * p_star * v;
    const ValueVector upper = g * transition_matrix(normalized, trace.records[t].greedy) * v;
    const ValueVector& next = trace.records[t + 1].values;
    for (Eigen::Index s = 0; s < next.size(); ++s) {
      if (next[s] < lower[s] - tol || next[s] > upper[s] + tol) ++violations;
    }
  }
  return violations;
}

}  // namespace mdpgeo
