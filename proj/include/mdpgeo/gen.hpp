#pragma once

// Seeded random MDP generators. Same spec, same bytes.
//
// Families with a planted policy (planted_optimal, periodic_optimal,
// wielandt) put it at the first action of every state ("s<i>a0").

#include <cstdint>
#include <random>
#include <string_view>

#include "mdpgeo/core.hpp"

namespace mdpgeo {

enum class Structure { dense, sparse, planted_optimal, periodic_optimal, wielandt };

std::string_view to_string(Structure s) noexcept;
/// Throws Error(parse) on an unknown name.
Structure parse_structure(std::string_view name);

struct GenSpec {
  std::size_t n_states = 4;
  std::size_t min_actions = 1;
  std::size_t max_actions = 3;
  double gamma = 0.9;
  std::uint64_t seed = 0;
  Structure structure = Structure::dense;
  /// Support size of sparse rows. For planted_optimal a nonzero value also
  /// makes the planted chain a ring with self-loops and the other rows sparse.
  std::size_t sparse_k = 0;
  /// Minimum advantage gap of non-planted actions, in (0, 0.25].
  double beta = 0.05;
};

/// Throws Error(domain) for an unusable spec.
void check_spec(const GenSpec& spec);

/// Thin wrapper over mt19937_64 with platform-independent conversions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }
  std::size_t between(std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(below(hi - lo + 1)); }

 private:
  std::mt19937_64 engine_;
};

/// Rewards are drawn in [0,1] and rounded to 1e-6. Planted families are
/// checked against the exact oracle; the gap is doubled on failure, up to
/// 10 attempts, then Error(consistency).
Mdp generate(const GenSpec& spec);

/// Random 2-state instance with total action count in [3, max_actions],
/// at least one action per state, gamma in [0.5, 0.99].
Mdp random_two_state(Rng& rng, std::size_t max_actions);

/// The planted policy (first action of every state).
Policy planted_policy(const Mdp& mdp);

}  // namespace mdpgeo
