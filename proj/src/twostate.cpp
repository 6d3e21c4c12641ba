#include "mdpgeo/twostate.hpp"

#include <algorithm>
#include <cmath>

#include "mdpgeo/gen.hpp"
#include "mdpgeo/solvers.hpp"

namespace mdpgeo {

namespace {

void require_two_states(const Mdp& mdp) {
  if (mdp.n_states() != 2) throw Error(ErrorKind::precondition, "set dynamics are defined for 2-state MDPs only");
}

std::vector<ActionId> members_at(const Mdp& mdp, const ActionSet& set, StateId s) {
  std::vector<ActionId> out;
  for (ActionId a : mdp.actions_of(s)) {
    if (set.contains(a)) out.push_back(a);
  }
  return out;
}

double slope(const Policy& pi) { return (*pi.values)[0] - (*pi.values)[1]; }

// Advantage of a self-loop at s with reward r, on values v.
double self_loop_advantage(const Mdp& mdp, StateId s, double r, const ValueVector& v) {
  return r + (mdp.gamma() - 1.0) * v[static_cast<Eigen::Index>(s)];
}

}  // namespace

std::vector<Policy> formed_policies(const Mdp& mdp, const ActionSet& set) {
  require_two_states(mdp);
  if (set.universe() != mdp.n_actions()) throw Error(ErrorKind::dimension, "action set does not match the MDP");
  const auto first = members_at(mdp, set, 0);
  const auto second = members_at(mdp, set, 1);
  if (first.empty() || second.empty()) throw Error(ErrorKind::precondition, "action set must cover both states");
  std::vector<Policy> out;
  out.reserve(first.size() * second.size());
  for (ActionId a : first) {
    for (ActionId b : second) {
      Policy pi{{a, b}, std::nullopt};
      pi.values = evaluate_policy(mdp, pi);
      out.push_back(std::move(pi));
    }
  }
  return out;
}

ActionSet produced_actions(const Mdp& mdp, const std::vector<Policy>& formed, const ActionSet& set) {
  require_two_states(mdp);
  ActionSet out(mdp.n_actions());
  for (const Policy& pi : formed) {
    const ValueVector& v = pi.values ? *pi.values : evaluate_policy(mdp, pi);
    for (StateId s = 0; s < 2; ++s) {
      const auto members = members_at(mdp, set, s);
      double best = -std::numeric_limits<double>::infinity();
      for (ActionId a : members) best = std::max(best, advantage(mdp, a, v));
      for (ActionId a : members) {
        if (advantage(mdp, a, v) >= best - kAdvantageTolerance) out.insert(a);
      }
    }
  }
  return out;
}

InefficiencyCertificate inefficiency_certificate(const Mdp& mdp, const ActionSet& set) {
  require_two_states(mdp);
  if (set.size() < 3) throw Error(ErrorKind::precondition, "inefficiency certificate needs at least 3 actions");
  const std::vector<Policy> formed = formed_policies(mdp, set);

  InefficiencyCertificate cert;
  for (std::size_t i = 1; i < formed.size(); ++i) {
    if (slope(formed[i]) < slope(formed[cert.pi_r])) cert.pi_r = i;
    if (slope(formed[i]) > slope(formed[cert.pi_l])) cert.pi_l = i;
  }
  const Policy& right = formed[cert.pi_r];
  const Policy& left = formed[cert.pi_l];
  cert.slope_r = slope(right);
  cert.slope_l = slope(left);
  cert.gap_state1 = (*left.values)[0] - (*right.values)[0];
  cert.gap_state2 = (*right.values)[1] - (*left.values)[1];

  const double g = mdp.gamma();
  if (cert.slope_l - cert.slope_r <= kAdvantageTolerance ||
      (1.0 - g) * std::max(cert.gap_state1, cert.gap_state2) <= kAdvantageTolerance) {
    cert.degenerate = true;
    cert.holds = true;
    return cert;
  }

  // At state 1 the min-slope policy's action is beaten by the max-slope one;
  // at state 2 the roles swap.
  const bool first = cert.gap_state1 >= cert.gap_state2;
  cert.state = first ? 0 : 1;
  const Policy& weak = first ? right : left;
  const Policy& strong = first ? left : right;
  const auto s = static_cast<Eigen::Index>(cert.state);
  cert.inefficient = weak.choice[cert.state];
  cert.dominating = strong.choice[cert.state];
  cert.weak_reward = (1.0 - g) * (*weak.values)[s];
  cert.strong_reward = (1.0 - g) * (*strong.values)[s];

  cert.min_margin = std::numeric_limits<double>::infinity();
  cert.holds = true;
  for (std::size_t i = 0; i < formed.size(); ++i) {
    const ValueVector& v = *formed[i].values;
    ChainLink link;
    link.policy = i;
    link.adv_inefficient = advantage(mdp, cert.inefficient, v);
    link.adv_weak = self_loop_advantage(mdp, cert.state, cert.weak_reward, v);
    link.adv_strong = self_loop_advantage(mdp, cert.state, cert.strong_reward, v);
    link.adv_dominating = advantage(mdp, cert.dominating, v);
    link.holds = link.adv_inefficient <= link.adv_weak + kAdvantageTolerance && link.adv_weak < link.adv_strong &&
                 link.adv_strong <= link.adv_dominating + kAdvantageTolerance;
    cert.min_margin = std::min(cert.min_margin, link.adv_dominating - link.adv_inefficient);
    cert.holds = cert.holds && link.holds;
    cert.chain.push_back(link);
  }
  cert.holds = cert.holds && cert.min_margin > kAdvantageTolerance;
  return cert;
}

PiBoundReport verify_pi_bound(const Mdp& mdp) {
  require_two_states(mdp);
  PiBoundReport report;
  report.n_actions = mdp.n_actions();
  const auto fail = [&](bool& flag, const std::string& why) {
    if (report.failure.empty()) report.failure = why;
    flag = false;
    report.holds = false;
  };

  // Set dynamics first; PI runs are checked against the resulting chain.
  std::vector<ActionSet> sets{ActionSet::all(mdp)};
  report.set_sizes.push_back(sets.back().size());
  while (sets.back().size() > 2) {
    const ActionSet& current = sets.back();
    const std::vector<Policy> formed = formed_policies(mdp, current);
    ActionSet next = produced_actions(mdp, formed, current);
    const InefficiencyCertificate cert = inefficiency_certificate(mdp, current);
    if (cert.degenerate) {
      report.degenerate = true;
    } else {
      if (!cert.holds) fail(report.certificate_ok, "inefficiency chain fails");
      if (next.contains(cert.inefficient)) fail(report.certificate_ok, "certified action was produced");
      if (next.size() + 1 > current.size()) fail(report.elimination_ok, "set dynamics did not shrink");
    }
    const bool stuck = next == current;
    sets.push_back(std::move(next));
    report.set_sizes.push_back(sets.back().size());
    if (stuck) break;
  }

  const ExactSolution opt = solve_exact(mdp);
  if (opt.unique) {
    ActionSet expected(mdp.n_actions());
    for (ActionId a : opt.policy.choice) expected.insert(a);
    if (!(sets.back() == expected)) fail(report.fixpoint_ok, "set dynamics fixpoint differs from the optimal policy");
  }

  const auto first = mdp.actions_of(0);
  const auto second = mdp.actions_of(1);
  for (ActionId a : first) {
    for (ActionId b : second) {
      const PolicyIterationResult run = policy_iteration(mdp, Policy{{a, b}, std::nullopt});
      ++report.starts;
      report.max_iterations = std::max(report.max_iterations, run.iterations());
      if (run.iterations() > mdp.n_actions()) fail(report.pi_ok, "policy iteration exceeded |A| iterations");
      for (std::size_t k = 1; k < run.steps.size(); ++k) {
        const ActionSet& bound = sets[std::min(k, sets.size() - 1)];
        for (ActionId x : run.steps[k].choice) {
          if (!bound.contains(x)) fail(report.containment_ok, "policy iteration left the set dynamics");
        }
      }
    }
  }
  if (!report.holds) report.counterexample = mdp;
  return report;
}

TwoStateSuite run_two_state_suite(std::size_t count, std::size_t max_actions, std::uint64_t seed) {
  TwoStateSuite suite;
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const Mdp mdp = random_two_state(rng, max_actions);
    const PiBoundReport report = verify_pi_bound(mdp);
    ++suite.instances;
    if (report.degenerate) ++suite.degenerate;
    suite.max_iterations = std::max(suite.max_iterations, report.max_iterations);
    suite.worst_ratio = std::max(suite.worst_ratio, static_cast<double>(report.max_iterations) /
                                                        static_cast<double>(report.n_actions));
    if (!report.holds) {
      ++suite.violations;
      if (!suite.first_counterexample) {
        suite.first_counterexample = mdp;
        suite.first_failure = report.failure;
      }
    }
  }
  return suite;
}

}  // namespace mdpgeo
