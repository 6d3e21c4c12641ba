#include "mdpgeo/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mdpgeo {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_mdp: return "invalid_mdp";
    case ErrorKind::domain: return "domain";
    case ErrorKind::unknown_action: return "unknown_action";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::unsafe_transform: return "unsafe_transform";
    case ErrorKind::no_convergence: return "no_convergence";
    case ErrorKind::assumption_violated: return "assumption_violated";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::consistency: return "consistency";
    case ErrorKind::parse: return "parse";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

namespace {

std::string describe(const Action& a) { return "action '" + a.id + "'"; }

}  // namespace

Mdp::Mdp(std::size_t n_states, double gamma, std::vector<Action> actions)
    : n_states_(n_states), gamma_(gamma), actions_(std::move(actions)), by_state_(n_states) {
  if (n_states_ == 0) throw Error(ErrorKind::invalid_mdp, "an MDP needs at least one state");
  for (ActionId a = 0; a < actions_.size(); ++a) {
    const Action& act = actions_[a];
    if (act.state >= n_states_) {
      throw Error(ErrorKind::dimension, describe(act) + " refers to state " +
                                            std::to_string(act.state) + " of " +
                                            std::to_string(n_states_));
    }
    if (static_cast<std::size_t>(act.probs.size()) != n_states_) {
      throw Error(ErrorKind::dimension, describe(act) + " has " + std::to_string(act.probs.size()) +
                                            " probabilities, expected " + std::to_string(n_states_));
    }
    if (!by_id_.emplace(act.id, a).second) {
      throw Error(ErrorKind::invalid_mdp, "duplicate action id '" + act.id + "'");
    }
    by_state_[act.state].push_back(a);
  }
}

const Action& Mdp::action(ActionId a) const {
  if (a >= actions_.size()) {
    throw Error(ErrorKind::unknown_action, "action index " + std::to_string(a) + " out of range");
  }
  return actions_[a];
}

std::span<const ActionId> Mdp::actions_of(StateId s) const {
  if (s >= n_states_) throw Error(ErrorKind::dimension, "state " + std::to_string(s) + " out of range");
  return by_state_[s];
}

std::optional<ActionId> Mdp::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

ActionId Mdp::id_of(std::string_view id) const {
  if (auto a = find(id)) return *a;
  throw Error(ErrorKind::unknown_action, "unknown action id '" + std::string(id) + "'");
}

bool operator==(const Mdp& lhs, const Mdp& rhs) {
  if (lhs.n_states_ != rhs.n_states_ || lhs.gamma_ != rhs.gamma_ ||
      lhs.actions_.size() != rhs.actions_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < lhs.actions_.size(); ++i) {
    const Action& a = lhs.actions_[i];
    const Action& b = rhs.actions_[i];
    if (a.id != b.id || a.state != b.state || a.reward != b.reward) return false;
    if ((a.probs.array() != b.probs.array()).any()) return false;
  }
  return true;
}

ActionSet::ActionSet(std::size_t universe, bool filled)
    : members_(universe, filled), count_(filled ? universe : 0) {}

void ActionSet::insert(ActionId a) {
  if (a >= members_.size()) throw Error(ErrorKind::unknown_action, "action index out of range");
  if (!members_[a]) {
    members_[a] = true;
    ++count_;
  }
}

void ActionSet::erase(ActionId a) {
  if (contains(a)) {
    members_[a] = false;
    --count_;
  }
}

std::vector<ActionId> ActionSet::ids() const {
  std::vector<ActionId> out;
  out.reserve(count_);
  for (ActionId a = 0; a < members_.size(); ++a) {
    if (members_[a]) out.push_back(a);
  }
  return out;
}

namespace {

void check_common(const Mdp& mdp) {
  const double g = mdp.gamma();
  if (!(g > 0.0 && g < 1.0)) {
    throw Error(ErrorKind::domain, "gamma must lie in (0,1), got " + std::to_string(g));
  }
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    if (mdp.actions_of(s).empty()) {
      throw Error(ErrorKind::invalid_mdp, "state " + std::to_string(s) + " has no action");
    }
  }
  for (const Action& a : mdp.actions()) {
    if (!std::isfinite(a.reward) || !a.probs.allFinite()) {
      throw Error(ErrorKind::invalid_mdp, describe(a) + " has non-finite data");
    }
  }
}

}  // namespace

void validate(const Mdp& mdp) {
  check_common(mdp);
  for (const Action& a : mdp.actions()) {
    for (Eigen::Index i = 0; i < a.probs.size(); ++i) {
      if (a.probs[i] < 0.0) {
        std::ostringstream msg;
        msg << describe(a) << " has negative probability " << a.probs[i] << " at state " << i;
        throw Error(ErrorKind::invalid_mdp, msg.str());
      }
    }
    const double sum = a.probs.sum();
    if (std::abs(sum - 1.0) > kProbabilityTolerance) {
      std::ostringstream msg;
      msg.precision(17);
      msg << describe(a) << " probabilities sum to " << sum;
      throw Error(ErrorKind::invalid_mdp, msg.str());
    }
  }
}

void validate_geometry(const Mdp& mdp) {
  check_common(mdp);
  for (ActionId a = 0; a < mdp.n_actions(); ++a) {
    const ActionVector av = action_vector(mdp, a);
    const Action& act = mdp.action(a);
    if (std::abs(av.coeffs.sum() - (mdp.gamma() - 1.0)) > kCoefficientTolerance) {
      throw Error(ErrorKind::invalid_mdp, describe(act) + " coefficients do not sum to gamma - 1");
    }
    for (Eigen::Index i = 0; i < av.coeffs.size(); ++i) {
      if (static_cast<StateId>(i) != act.state && av.coeffs[i] < -kProbabilityTolerance) {
        throw Error(ErrorKind::invalid_mdp,
                    describe(act) + " has a negative cross-state coefficient at state " + std::to_string(i));
      }
    }
  }
}

void check_policy(const Mdp& mdp, const Policy& pi) {
  if (pi.choice.size() != mdp.n_states()) {
    throw Error(ErrorKind::invalid_mdp, "policy covers " + std::to_string(pi.choice.size()) +
                                            " states, MDP has " + std::to_string(mdp.n_states()));
  }
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    if (mdp.action(pi.choice[s]).state != s) {
      throw Error(ErrorKind::invalid_mdp, "policy picks " + describe(mdp.action(pi.choice[s])) +
                                              " at foreign state " + std::to_string(s));
    }
  }
}

ActionVector action_vector(const Mdp& mdp, ActionId a) {
  const Action& act = mdp.action(a);
  ActionVector out{act.reward, mdp.gamma() * act.probs};
  out.coeffs[static_cast<Eigen::Index>(act.state)] -= 1.0;
  return out;
}

namespace {

void check_dim(const Mdp& mdp, const ValueVector& v) {
  if (static_cast<std::size_t>(v.size()) != mdp.n_states()) {
    throw Error(ErrorKind::dimension, "value vector has " + std::to_string(v.size()) +
                                          " entries, MDP has " + std::to_string(mdp.n_states()) +
                                          " states");
  }
}

}  // namespace

double q_value(const Mdp& mdp, ActionId a, const ValueVector& v) {
  check_dim(mdp, v);
  const Action& act = mdp.action(a);
  return act.reward + mdp.gamma() * act.probs.dot(v);
}

double advantage(const Mdp& mdp, ActionId a, const ValueVector& v) {
  check_dim(mdp, v);
  const Action& act = mdp.action(a);
  return act.reward + mdp.gamma() * act.probs.dot(v) - v[static_cast<Eigen::Index>(act.state)];
}

ValueVector bellman_policy(const Mdp& mdp, const Policy& pi, const ValueVector& v) {
  check_policy(mdp, pi);
  ValueVector out(v.size());
  for (StateId s = 0; s < mdp.n_states(); ++s) out[static_cast<Eigen::Index>(s)] = q_value(mdp, pi.choice[s], v);
  return out;
}

ActionId greedy_action(const Mdp& mdp, StateId s, const ValueVector& v, const ActionSet& active) {
  double best = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (ActionId a : mdp.actions_of(s)) {
    if (!active.contains(a)) continue;
    best = std::max(best, q_value(mdp, a, v));
    any = true;
  }
  if (!any) throw Error(ErrorKind::precondition, "state " + std::to_string(s) + " has no active action");
  for (ActionId a : mdp.actions_of(s)) {
    if (active.contains(a) && q_value(mdp, a, v) >= best - kAdvantageTolerance) return a;
  }
  throw Error(ErrorKind::consistency, "greedy selection lost its maximizer");
}

GreedyStep bellman_optimal(const Mdp& mdp, const ValueVector& v, const ActionSet& active) {
  check_dim(mdp, v);
  GreedyStep out{ValueVector(v.size()), Policy{std::vector<ActionId>(mdp.n_states()), std::nullopt}};
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (ActionId a : mdp.actions_of(s)) {
      if (active.contains(a)) best = std::max(best, q_value(mdp, a, v));
    }
    out.policy.choice[s] = greedy_action(mdp, s, v, active);
    out.values[static_cast<Eigen::Index>(s)] = best;
  }
  return out;
}

double span(const ValueVector& v) {
  if (v.size() == 0) return 0.0;
  return v.maxCoeff() - v.minCoeff();
}

Eigen::MatrixXd transition_matrix(const Mdp& mdp, const Policy& pi) {
  check_policy(mdp, pi);
  const auto n = static_cast<Eigen::Index>(mdp.n_states());
  Eigen::MatrixXd p(n, n);
  for (Eigen::Index s = 0; s < n; ++s) p.row(s) = mdp.action(pi.choice[static_cast<std::size_t>(s)]).probs.transpose();
  return p;
}

Eigen::VectorXd reward_vector(const Mdp& mdp, const Policy& pi) {
  check_policy(mdp, pi);
  Eigen::VectorXd r(static_cast<Eigen::Index>(mdp.n_states()));
  for (StateId s = 0; s < mdp.n_states(); ++s) r[static_cast<Eigen::Index>(s)] = mdp.action(pi.choice[s]).reward;
  return r;
}

ValueVector evaluate_policy(const Mdp& mdp, const Policy& pi) {
  const Eigen::MatrixXd p = transition_matrix(mdp, pi);
  const Eigen::VectorXd r = reward_vector(mdp, pi);
  const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(p.rows(), p.cols()) - mdp.gamma() * p;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  if (!lu.isInvertible()) throw Error(ErrorKind::no_convergence, "policy evaluation system is singular");
  ValueVector v = lu.solve(r);
  if (!v.allFinite()) throw Error(ErrorKind::no_convergence, "policy evaluation produced non-finite values");
  return v;
}

Policy first_action_policy(const Mdp& mdp) {
  Policy pi;
  pi.choice.reserve(mdp.n_states());
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    const auto acts = mdp.actions_of(s);
    if (acts.empty()) throw Error(ErrorKind::invalid_mdp, "state " + std::to_string(s) + " has no action");
    pi.choice.push_back(acts.front());
  }
  return pi;
}

}  // namespace mdpgeo
