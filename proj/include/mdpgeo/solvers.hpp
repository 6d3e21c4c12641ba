#pragma once

// Generalized value iteration, Howard policy iteration and the exact oracle.

#include <cstddef>
#include <string_view>
#include <vector>

#include "mdpgeo/core.hpp"

namespace mdpgeo {

enum class StopKind {
  /// t == max_iterations.
  time,
  /// span(V_t - V_{t-1}) <= eps (1 - gamma) / gamma.
  span,
  /// span(V_t) < eps (1 - gamma) / (gamma (1 + gamma)); meant for normalized MDPs.
  span_values,
  /// |A_t| == n; requires action filtering.
  action_count,
};

struct StopRule {
  StopKind kind = StopKind::span;
  std::size_t max_iterations = 0;
  double epsilon = 1e-6;

  static StopRule time(std::size_t t_max) { return {StopKind::time, t_max, 0.0}; }
  static StopRule span(double eps) { return {StopKind::span, 0, eps}; }
  static StopRule span_values(double eps) { return {StopKind::span_values, 0, eps}; }
  static StopRule action_count() { return {StopKind::action_count, 0, 0.0}; }
};

enum class FilterRule {
  none,
  /// Removes a when adv(a, V_t) + (1 - gamma p^a_s) gamma^t / (1 - gamma) < 0.
  appendix,
  /// Same test with (1 - p^a_s) in place of (1 - gamma p^a_s). Kept for
  /// comparison only: it can discard optimal actions.
  appendix_literal,
};

class Schedule {
 public:
  static Schedule sync() { return Schedule(Kind::sync, 0, {}); }
  /// k states per iteration, cycling through states in index order.
  static Schedule round_robin(std::size_t k);
  /// Cycles through the given state sets.
  static Schedule sets(std::vector<std::vector<StateId>> sets);

  bool synchronous() const noexcept { return kind_ == Kind::sync; }
  /// States updated at iteration t (0-based).
  std::vector<StateId> states_at(std::size_t t, std::size_t n_states) const;
  /// Iterations needed to touch every state once.
  std::size_t sweep_length(std::size_t n_states) const;

 private:
  enum class Kind { sync, round_robin, sets };
  Schedule(Kind kind, std::size_t k, std::vector<std::vector<StateId>> sets)
      : kind_(kind), k_(k), sets_(std::move(sets)) {}

  Kind kind_;
  std::size_t k_;
  std::vector<std::vector<StateId>> sets_;
};

enum class InitKind { zeros, upper_bound, given };

struct ViConfig {
  double alpha = 1.0;
  StopRule stop = StopRule::span(1e-6);
  FilterRule filter = FilterRule::none;
  Schedule schedule = Schedule::sync();
  InitKind init = InitKind::zeros;
  ValueVector v0;  // used when init == given

  /// Synchronous, alpha = 1, no filtering.
  static ViConfig standard(StopRule stop, InitKind init = InitKind::zeros) {
    ViConfig cfg;
    cfg.stop = stop;
    cfg.init = init;
    return cfg;
  }
};

enum class StopReason { time_limit, span, span_values, action_count, iteration_cap };

std::string_view to_string(StopReason reason) noexcept;

struct IterationRecord {
  std::size_t t = 0;
  ValueVector values;
  double span_v = 0.0;
  /// span(V_t - V_{t-1}); zero on the first record.
  double span_dv = 0.0;
  /// Greedy policy over the active set at V_t; it produces V_{t+1}.
  Policy greedy;
  std::size_t active_count = 0;
  std::vector<ActionId> filtered;
  double elapsed_seconds = 0.0;
};

struct RunTrace {
  std::vector<IterationRecord> records;
  Policy final_policy;
  StopReason stop_reason = StopReason::time_limit;
  double alpha = 1.0;
  bool synchronous = true;
  bool filtered = false;

  bool converged() const noexcept { return stop_reason != StopReason::iteration_cap; }
  std::size_t iterations() const noexcept { return records.empty() ? 0 : records.size() - 1; }
  /// True for synchronous, alpha = 1, unfiltered runs.
  bool standard() const noexcept { return alpha == 1.0 && synchronous && !filtered; }
};

/// Throws Error(precondition) on an inconsistent configuration.
void check_config(const Mdp& mdp, const ViConfig& cfg);

/// Iteration cap applied to span and action-count stops.
std::size_t iteration_cap(const Mdp& mdp, const ViConfig& cfg);

/// Runs value iteration. Hitting the iteration cap is
/// reported through RunTrace::stop_reason rather than thrown.
RunTrace value_iteration(const Mdp& mdp, const ViConfig& cfg);

/// One filtering pass at iteration t over value vector v. Never empties a
/// state: if every remaining action of a state fails, the one with the
/// largest bound survives.
ActionSet filter_appendix(const Mdp& mdp, std::size_t t, const ValueVector& v, const ActionSet& active,
                          FilterRule rule = FilterRule::appendix);

/// Smallest t at which the sound filter is guaranteed to discard a
/// non-optimal action with adv(a, V*) = -gap, given rewards in [0,1] and the
/// upper-bound start. Uses (1 + gamma - 2 gamma p_s) gamma^t / (1 - gamma) < gap.
std::size_t filter_deadline(double gamma, double self_prob, double gap);

/// The printed termination estimate 2 gamma^t (1 - p_s) / (1 - gamma) < gap
/// (read with a positive gap). Informational only.
std::size_t filter_deadline_printed(double gamma, double self_prob, double gap);

struct PolicyIterationResult {
  Policy policy;
  /// Every evaluated policy in order; steps.back() equals policy.
  std::vector<Policy> steps;

  std::size_t iterations() const noexcept { return steps.size(); }
};

/// Howard policy iteration from pi0. An incumbent action whose advantage is
/// within kAdvantageTolerance of the best is kept.
PolicyIterationResult policy_iteration(const Mdp& mdp, const Policy& pi0);

/// Picks the highest-reward action at every state (lowest id on ties).
Policy max_reward_policy(const Mdp& mdp);

enum class Oracle {
  howard,
  brute_force,
  /// Howard, cross-checked by brute force when n <= 3 and |A| <= 12.
  cross_checked,
};

struct ExactSolution {
  Policy policy;
  ValueVector values;
  /// -max over non-optimal actions of adv(a, V*); +inf when there are none.
  double delta = 0.0;
  bool unique = true;
};

ExactSolution solve_exact(const Mdp& mdp, Oracle oracle = Oracle::howard);

}  // namespace mdpgeo
