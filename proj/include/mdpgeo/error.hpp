#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mdpgeo {

enum class ErrorKind {
  invalid_mdp,
  domain,
  unknown_action,
  dimension,
  unsafe_transform,
  no_convergence,
  assumption_violated,
  precondition,
  consistency,
  parse,
  io,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Library-wide exception. `kind()` is stable and machine readable; the
/// message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mdpgeo
