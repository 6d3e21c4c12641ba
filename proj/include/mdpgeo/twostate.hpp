#pragma once

// Set dynamics of policy iteration on 2-state MDPs.
//
// A set of actions forms every policy built from it; a set of evaluated
// policies produces the actions that are greedy for at least one of them.
// Iterating A -> produced(formed(A)) loses at least one action per step
// until one action per state is left.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mdpgeo/core.hpp"

namespace mdpgeo {

/// All |A_1| x |A_2| policies of A, each evaluated. Throws
/// Error(precondition) unless the MDP has 2 states and A covers both.
std::vector<Policy> formed_policies(const Mdp& mdp, const ActionSet& set);

/// Every action of A that is greedy (within kAdvantageTolerance of the best
/// in A at its state) for some policy of U.
ActionSet produced_actions(const Mdp& mdp, const std::vector<Policy>& formed, const ActionSet& set);

/// Advantages along the chain adv(c) <= adv(e_weak) < adv(e_strong) <= adv(e)
/// on one formed policy, where e_weak and e_strong are auxiliary self-loops.
struct ChainLink {
  std::size_t policy = 0;  // index into formed_policies()
  double adv_inefficient = 0.0;
  double adv_weak = 0.0;
  double adv_strong = 0.0;
  double adv_dominating = 0.0;
  bool holds = false;
};

struct InefficiencyCertificate {
  /// All formed policies have the same slope V(1) - V(2) (within 1e-9), or
  /// the per-state gap is too small to separate the auxiliary actions.
  bool degenerate = false;
  /// Min-slope (right) and max-slope (left) policies, as indices into formed.
  std::size_t pi_r = 0;
  std::size_t pi_l = 0;
  double slope_r = 0.0;
  double slope_l = 0.0;
  /// V_l(1) - V_r(1) and V_r(2) - V_l(2); the state with the larger one is used.
  double gap_state1 = 0.0;
  double gap_state2 = 0.0;
  StateId state = 0;
  ActionId inefficient = 0;
  ActionId dominating = 0;
  /// Self-loop rewards (1 - gamma) V(state) of the weaker and stronger policy.
  double weak_reward = 0.0;
  double strong_reward = 0.0;
  std::vector<ChainLink> chain;
  double min_margin = 0.0;
  bool holds = false;
  std::string reading = "per-state gap between the extreme-slope policies";
};

/// Throws Error(precondition) when |A| < 3 or the MDP is not 2-state.
InefficiencyCertificate inefficiency_certificate(const Mdp& mdp, const ActionSet& set);

struct PiBoundReport {
  std::size_t n_actions = 0;
  std::size_t starts = 0;
  std::size_t max_iterations = 0;
  bool pi_ok = true;
  /// |A_t| along the set dynamics.
  std::vector<std::size_t> set_sizes;
  bool elimination_ok = true;
  bool containment_ok = true;
  bool fixpoint_ok = true;
  bool certificate_ok = true;
  bool degenerate = false;
  bool holds = true;
  std::string failure;
  /// The offending instance when holds is false.
  std::optional<Mdp> counterexample;
};

/// Runs PI from every policy and the set dynamics from the full action set.
PiBoundReport verify_pi_bound(const Mdp& mdp);

struct TwoStateSuite {
  std::size_t instances = 0;
  std::size_t violations = 0;
  std::size_t degenerate = 0;
  std::size_t max_iterations = 0;
  /// max over instances of (PI iterations) / |A|.
  double worst_ratio = 0.0;
  std::optional<Mdp> first_counterexample;
  std::string first_failure;
};

/// `count` random 2-state instances with |A| in [3, max_actions].
TwoStateSuite run_two_state_suite(std::size_t count, std::size_t max_actions, std::uint64_t seed);

}  // namespace mdpgeo
