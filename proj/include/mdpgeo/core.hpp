#pragma once

// MDP data model with state-unique actions, the action-vector embedding and
// the Bellman machinery built on top of it.
//
// An action a at state s = st(a) with next-state distribution p and reward r
// is embedded as the (n+1)-vector (r, c_1, ..., c_n) where c_i = gamma * p_i
// for i != s and c_s = gamma * p_s - 1. The advantage of a with respect to a
// value vector V is the inner product r + sum_i c_i V(i).

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "mdpgeo/error.hpp"

namespace mdpgeo {

using StateId = std::size_t;
/// Position of an action in Mdp::actions(). Lower ids win argmax ties.
using ActionId = std::size_t;
/// State values without the bias coordinate.
using ValueVector = Eigen::VectorXd;

inline constexpr double kProbabilityTolerance = 1e-12;
inline constexpr double kCoefficientTolerance = 1e-10;
/// Two advantages closer than this are considered tied.
inline constexpr double kAdvantageTolerance = 1e-9;

struct Action {
  std::string id;
  StateId state = 0;
  Eigen::VectorXd probs;
  double reward = 0.0;
};

struct ActionVector {
  double reward = 0.0;
  Eigen::VectorXd coeffs;
};

class Mdp {
 public:
  /// Builds the state index. Throws Error(dimension | invalid_mdp) for
  /// structural problems (state out of range, wrong row length, duplicate
  /// ids). Stochastic invariants are checked by validate().
  Mdp(std::size_t n_states, double gamma, std::vector<Action> actions);

  std::size_t n_states() const noexcept { return n_states_; }
  std::size_t n_actions() const noexcept { return actions_.size(); }
  double gamma() const noexcept { return gamma_; }

  const std::vector<Action>& actions() const noexcept { return actions_; }
  const Action& action(ActionId a) const;
  std::span<const ActionId> actions_of(StateId s) const;
  std::optional<ActionId> find(std::string_view id) const;
  /// Like find() but throws Error(unknown_action).
  ActionId id_of(std::string_view id) const;

  friend bool operator==(const Mdp& lhs, const Mdp& rhs);

 private:
  std::size_t n_states_;
  double gamma_;
  std::vector<Action> actions_;
  std::vector<std::vector<ActionId>> by_state_;
  std::unordered_map<std::string, ActionId> by_id_;
};

/// Bit-level equality of every field.
bool operator==(const Mdp& lhs, const Mdp& rhs);

class ActionSet {
 public:
  ActionSet() = default;
  explicit ActionSet(std::size_t universe, bool filled = false);
  static ActionSet all(const Mdp& mdp) { return ActionSet(mdp.n_actions(), true); }

  bool contains(ActionId a) const { return a < members_.size() && members_[a]; }
  void insert(ActionId a);
  void erase(ActionId a);
  std::size_t size() const noexcept { return count_; }
  std::size_t universe() const noexcept { return members_.size(); }
  std::vector<ActionId> ids() const;

  friend bool operator==(const ActionSet&, const ActionSet&) = default;

 private:
  std::vector<bool> members_;
  std::size_t count_ = 0;
};

struct Policy {
  /// choice[s] is the action taken at state s.
  std::vector<ActionId> choice;
  /// Filled when the policy has been evaluated.
  std::optional<ValueVector> values;

  bool same_actions(const Policy& other) const { return choice == other.choice; }
};

/// Checks every stochastic invariant; throws Error on the first violation
/// (gamma outside (0,1), empty state, negative probability, bad row sum,
/// non-finite data).
void validate(const Mdp& mdp);

/// Weaker check for MDPs produced by discount-changing transforms: gamma in
/// (0,1), every state has an action, coefficient rows sum to gamma - 1 and
/// every cross-state coefficient is nonnegative. Self-transition
/// probabilities may be negative here.
void validate_geometry(const Mdp& mdp);

/// Throws Error(invalid_mdp) if pi does not pick exactly one own action per
/// state.
void check_policy(const Mdp& mdp, const Policy& pi);

ActionVector action_vector(const Mdp& mdp, ActionId a);

/// r^a + sum_i c^a_i v(i).
double advantage(const Mdp& mdp, ActionId a, const ValueVector& v);

/// r^a + gamma * sum_i p^a_i v(i); equals v(st(a)) + advantage.
double q_value(const Mdp& mdp, ActionId a, const ValueVector& v);

ValueVector bellman_policy(const Mdp& mdp, const Policy& pi, const ValueVector& v);

struct GreedyStep {
  ValueVector values;
  Policy policy;
};

/// Max over active actions at every state. Ties within kAdvantageTolerance go
/// to the lowest action id; the returned value is the exact maximum.
GreedyStep bellman_optimal(const Mdp& mdp, const ValueVector& v, const ActionSet& active);

/// Greedy action at one state over the active set (same tie rule).
ActionId greedy_action(const Mdp& mdp, StateId s, const ValueVector& v, const ActionSet& active);

double span(const ValueVector& v);

/// Row-stacked transition matrix of a policy.
Eigen::MatrixXd transition_matrix(const Mdp& mdp, const Policy& pi);
Eigen::VectorXd reward_vector(const Mdp& mdp, const Policy& pi);

/// Solves (I - gamma P_pi) V = r_pi with a dense LU factorization.
ValueVector evaluate_policy(const Mdp& mdp, const Policy& pi);

/// Policy picking the lowest-id action at every state.
Policy first_action_policy(const Mdp& mdp);

}  // namespace mdpgeo
