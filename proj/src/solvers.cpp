#include "mdpgeo/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>

namespace mdpgeo {

std::string_view to_string(StopReason reason) noexcept {
  switch (reason) {
    case StopReason::time_limit: return "time";
    case StopReason::span: return "span";
    case StopReason::span_values: return "span_values";
    case StopReason::action_count: return "actions";
    case StopReason::iteration_cap: return "iteration_cap";
  }
  return "unknown";
}

Schedule Schedule::round_robin(std::size_t k) {
  if (k == 0) throw Error(ErrorKind::precondition, "round-robin schedule needs k >= 1");
  return Schedule(Kind::round_robin, k, {});
}

Schedule Schedule::sets(std::vector<std::vector<StateId>> sets) {
  if (sets.empty()) throw Error(ErrorKind::precondition, "explicit schedule needs at least one state set");
  for (const auto& set : sets) {
    if (set.empty()) throw Error(ErrorKind::precondition, "explicit schedule contains an empty state set");
  }
  return Schedule(Kind::sets, 0, std::move(sets));
}

std::vector<StateId> Schedule::states_at(std::size_t t, std::size_t n_states) const {
  std::vector<StateId> out;
  switch (kind_) {
    case Kind::sync:
      out.resize(n_states);
      for (StateId s = 0; s < n_states; ++s) out[s] = s;
      break;
    case Kind::round_robin: {
      const std::size_t k = std::min(k_, n_states);
      const std::size_t first = (t * k) % n_states;
      for (std::size_t i = 0; i < k; ++i) out.push_back((first + i) % n_states);
      std::sort(out.begin(), out.end());
      break;
    }
    case Kind::sets:
      out = sets_[t % sets_.size()];
      break;
  }
  return out;
}

std::size_t Schedule::sweep_length(std::size_t n_states) const {
  switch (kind_) {
    case Kind::sync: return 1;
    case Kind::round_robin: {
      const std::size_t k = std::min(k_, n_states);
      return (n_states + k - 1) / k;
    }
    case Kind::sets: return sets_.size();
  }
  return 1;
}

void check_config(const Mdp& mdp, const ViConfig& cfg) {
  validate_geometry(mdp);
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) {
    throw Error(ErrorKind::precondition, "learning rate must lie in (0,1]");
  }
  const StopKind stop = cfg.stop.kind;
  if ((stop == StopKind::span || stop == StopKind::span_values) && !(cfg.stop.epsilon > 0.0)) {
    throw Error(ErrorKind::precondition, "span stop needs epsilon > 0");
  }
  if (stop == StopKind::action_count && cfg.filter == FilterRule::none) {
    throw Error(ErrorKind::precondition, "action-count stop needs action filtering");
  }
  if (cfg.filter != FilterRule::none) {
    for (const Action& a : mdp.actions()) {
      if (a.reward < 0.0 || a.reward > 1.0) {
        throw Error(ErrorKind::precondition, "action filtering needs rewards in [0,1]; action '" + a.id +
                                                 "' has " + std::to_string(a.reward));
      }
    }
    if (cfg.init != InitKind::upper_bound) {
      throw Error(ErrorKind::precondition, "action filtering needs the upper-bound start 1/(1-gamma)");
    }
    if (cfg.alpha != 1.0 || !cfg.schedule.synchronous()) {
      throw Error(ErrorKind::precondition, "action filtering needs synchronous updates with alpha = 1");
    }
  }
  if (cfg.init == InitKind::given) {
    if (static_cast<std::size_t>(cfg.v0.size()) != mdp.n_states() || !cfg.v0.allFinite()) {
      throw Error(ErrorKind::precondition, "initial value vector must have one finite entry per state");
    }
  }
  for (std::size_t t = 0; t < cfg.schedule.sweep_length(mdp.n_states()); ++t) {
    for (StateId s : cfg.schedule.states_at(t, mdp.n_states())) {
      if (s >= mdp.n_states()) throw Error(ErrorKind::precondition, "schedule names state out of range");
    }
  }
}

std::size_t iteration_cap(const Mdp& mdp, const ViConfig& cfg) {
  const double contraction = 1.0 - cfg.alpha * (1.0 - mdp.gamma());
  const double per_sweep = std::log(1.0 / std::numeric_limits<double>::epsilon()) / std::log(1.0 / contraction);
  return 10 * static_cast<std::size_t>(std::ceil(per_sweep)) * cfg.schedule.sweep_length(mdp.n_states());
}

namespace {

ValueVector initial_values(const Mdp& mdp, const ViConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(mdp.n_states());
  switch (cfg.init) {
    case InitKind::zeros: return ValueVector::Zero(n);
    case InitKind::upper_bound: return ValueVector::Constant(n, 1.0 / (1.0 - mdp.gamma()));
    case InitKind::given: return cfg.v0;
  }
  return ValueVector::Zero(n);
}

std::optional<StopReason> stop_reached(const Mdp& mdp, const StopRule& stop, const IterationRecord& rec) {
  const double g = mdp.gamma();
  switch (stop.kind) {
    case StopKind::time:
      if (rec.t >= stop.max_iterations) return StopReason::time_limit;
      break;
    case StopKind::span:
      if (rec.t >= 1 && rec.span_dv <= stop.epsilon * (1.0 - g) / g) return StopReason::span;
      break;
    case StopKind::span_values:
      if (rec.span_v < stop.epsilon * (1.0 - g) / (g * (1.0 + g))) return StopReason::span_values;
      break;
    case StopKind::action_count:
      if (rec.active_count == mdp.n_states()) return StopReason::action_count;
      break;
  }
  return std::nullopt;
}

double filter_coefficient(const Mdp& mdp, const Action& a, FilterRule rule) {
  const double self = a.probs[static_cast<Eigen::Index>(a.state)];
  return rule == FilterRule::appendix_literal ? 1.0 - self : 1.0 - mdp.gamma() * self;
}

}  // namespace

ActionSet filter_appendix(const Mdp& mdp, std::size_t t, const ValueVector& v, const ActionSet& active,
                          FilterRule rule) {
  if (rule == FilterRule::none) return active;
  const double g = mdp.gamma();
  const double slack = std::pow(g, static_cast<double>(t)) / (1.0 - g);
  ActionSet out = active;
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    std::size_t survivors = 0;
    std::optional<ActionId> best;
    double best_bound = -std::numeric_limits<double>::infinity();
    for (ActionId a : mdp.actions_of(s)) {
      if (!active.contains(a)) continue;
      const double bound = advantage(mdp, a, v) + filter_coefficient(mdp, mdp.action(a), rule) * slack;
      if (bound < 0.0) {
        out.erase(a);
      } else {
        ++survivors;
      }
      if (bound > best_bound) {
        best_bound = bound;
        best = a;
      }
    }
    if (survivors == 0 && best) out.insert(*best);
  }
  return out;
}

namespace {

std::size_t first_t_below(double scale, double gamma, double gap) {
  if (!(gap > 0.0)) return std::numeric_limits<std::size_t>::max();
  if (scale < gap) return 0;
  auto t = static_cast<std::size_t>(std::floor(std::log(gap / scale) / std::log(gamma)));
  while (scale * std::pow(gamma, static_cast<double>(t)) >= gap) ++t;
  while (t > 0 && scale * std::pow(gamma, static_cast<double>(t - 1)) < gap) --t;
  return t;
}

}  // namespace

std::size_t filter_deadline(double gamma, double self_prob, double gap) {
  return first_t_below((1.0 + gamma - 2.0 * gamma * self_prob) / (1.0 - gamma), gamma, gap);
}

std::size_t filter_deadline_printed(double gamma, double self_prob, double gap) {
  return first_t_below(2.0 * (1.0 - self_prob) / (1.0 - gamma), gamma, gap);
}

RunTrace value_iteration(const Mdp& mdp, const ViConfig& cfg) {
  check_config(mdp, cfg);
  using clock = std::chrono::steady_clock;
  const auto started = clock::now();
  const std::size_t n = mdp.n_states();
  const std::size_t cap = iteration_cap(mdp, cfg);

  RunTrace trace;
  trace.alpha = cfg.alpha;
  trace.synchronous = cfg.schedule.synchronous();
  trace.filtered = cfg.filter != FilterRule::none;

  ActionSet active = ActionSet::all(mdp);
  ValueVector values = initial_values(mdp, cfg);
  GreedyStep step = bellman_optimal(mdp, values, active);

  IterationRecord first;
  first.values = values;
  first.span_v = span(values);
  first.greedy = step.policy;
  first.active_count = active.size();
  trace.records.push_back(std::move(first));

  for (;;) {
    const IterationRecord& last = trace.records.back();
    if (auto reason = stop_reached(mdp, cfg.stop, last)) {
      trace.stop_reason = *reason;
      break;
    }
    if (cfg.stop.kind != StopKind::time && last.t >= cap) {
      trace.stop_reason = StopReason::iteration_cap;
      break;
    }
    const std::size_t t = last.t;
    ValueVector next = values;
    for (StateId s : cfg.schedule.states_at(t, n)) {
      const auto i = static_cast<Eigen::Index>(s);
      next[i] = (1.0 - cfg.alpha) * values[i] + cfg.alpha * step.values[i];
    }

    IterationRecord rec;
    rec.t = t + 1;
    if (cfg.filter != FilterRule::none) {
      ActionSet kept = filter_appendix(mdp, t + 1, next, active, cfg.filter);
      for (ActionId a : active.ids()) {
        if (!kept.contains(a)) rec.filtered.push_back(a);
      }
      active = std::move(kept);
    }
    step = bellman_optimal(mdp, next, active);
    rec.span_v = span(next);
    rec.span_dv = span(next - values);
    rec.greedy = step.policy;
    rec.active_count = active.size();
    rec.elapsed_seconds = std::chrono::duration<double>(clock::now() - started).count();
    values = next;
    rec.values = std::move(next);
    trace.records.push_back(std::move(rec));
  }
  trace.final_policy = trace.records.back().greedy;
  return trace;
}

Policy max_reward_policy(const Mdp& mdp) {
  Policy pi;
  pi.choice.reserve(mdp.n_states());
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    const auto acts = mdp.actions_of(s);
    if (acts.empty()) throw Error(ErrorKind::invalid_mdp, "state " + std::to_string(s) + " has no action");
    ActionId best = acts.front();
    for (ActionId a : acts) {
      if (mdp.action(a).reward > mdp.action(best).reward) best = a;
    }
    pi.choice.push_back(best);
  }
  return pi;
}

PolicyIterationResult policy_iteration(const Mdp& mdp, const Policy& pi0) {
  validate_geometry(mdp);
  check_policy(mdp, pi0);
  constexpr std::size_t kMaxIterations = 100000;

  PolicyIterationResult out;
  Policy current{pi0.choice, std::nullopt};
  while (out.steps.size() < kMaxIterations) {
    current.values = evaluate_policy(mdp, current);
    out.steps.push_back(current);
    const ValueVector& v = *current.values;

    Policy next{current.choice, std::nullopt};
    for (StateId s = 0; s < mdp.n_states(); ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (ActionId a : mdp.actions_of(s)) best = std::max(best, advantage(mdp, a, v));
      if (advantage(mdp, current.choice[s], v) >= best - kAdvantageTolerance) continue;
      for (ActionId a : mdp.actions_of(s)) {
        if (advantage(mdp, a, v) >= best - kAdvantageTolerance) {
          next.choice[s] = a;
          break;
        }
      }
    }
    if (next.same_actions(current)) {
      out.policy = current;
      return out;
    }
    current = std::move(next);
  }
  throw Error(ErrorKind::no_convergence, "policy iteration did not settle");
}

namespace {

void fill_gap(const Mdp& mdp, ExactSolution& sol) {
  double worst = -std::numeric_limits<double>::infinity();
  for (ActionId a = 0; a < mdp.n_actions(); ++a) {
    if (sol.policy.choice[mdp.action(a).state] == a) continue;
    worst = std::max(worst, advantage(mdp, a, sol.values));
  }
  sol.delta = -worst;
  sol.unique = sol.delta > kAdvantageTolerance;
}

ExactSolution solve_howard(const Mdp& mdp) {
  PolicyIterationResult pi = policy_iteration(mdp, max_reward_policy(mdp));
  ExactSolution sol{pi.policy, *pi.policy.values, 0.0, true};
  fill_gap(mdp, sol);
  return sol;
}

ExactSolution solve_brute_force(const Mdp& mdp) {
  validate_geometry(mdp);
  constexpr double kMaxPolicies = 1e6;
  double count = 1.0;
  for (StateId s = 0; s < mdp.n_states(); ++s) count *= static_cast<double>(mdp.actions_of(s).size());
  if (count > kMaxPolicies) throw Error(ErrorKind::precondition, "too many policies to enumerate");

  std::vector<std::size_t> digit(mdp.n_states(), 0);
  Policy pi = first_action_policy(mdp);
  std::vector<ValueVector> all_values;
  std::optional<ExactSolution> best;
  double best_sum = -std::numeric_limits<double>::infinity();
  for (;;) {
    ValueVector v = evaluate_policy(mdp, pi);
    if (v.sum() > best_sum) {
      best_sum = v.sum();
      best = ExactSolution{Policy{pi.choice, v}, v, 0.0, true};
    }
    all_values.push_back(std::move(v));

    StateId s = 0;
    for (; s < mdp.n_states(); ++s) {
      const auto acts = mdp.actions_of(s);
      if (++digit[s] < acts.size()) {
        pi.choice[s] = acts[digit[s]];
        break;
      }
      digit[s] = 0;
      pi.choice[s] = acts[0];
    }
    if (s == mdp.n_states()) break;
  }
  for (const ValueVector& v : all_values) {
    if (((v - best->values).array() > 1e-8).any()) {
      throw Error(ErrorKind::consistency, "no policy dominates all others; enumeration is inconsistent");
    }
  }
  fill_gap(mdp, *best);
  return *best;
}

}  // namespace

ExactSolution solve_exact(const Mdp& mdp, Oracle oracle) {
  switch (oracle) {
    case Oracle::howard: return solve_howard(mdp);
    case Oracle::brute_force: return solve_brute_force(mdp);
    case Oracle::cross_checked: {
      ExactSolution sol = solve_howard(mdp);
      if (mdp.n_states() <= 3 && mdp.n_actions() <= 12) {
        const ExactSolution check = solve_brute_force(mdp);
        const double diff = (sol.values - check.values).cwiseAbs().maxCoeff();
        if (diff > 1e-8) {
          throw Error(ErrorKind::consistency,
                      "policy iteration and enumeration disagree by " + std::to_string(diff));
        }
      }
      return sol;
    }
  }
  return solve_howard(mdp);
}

}  // namespace mdpgeo
