#pragma once

#include <stdexcept>
#include <string>

namespace detdiff {

/// Input that violates a documented precondition: malformed maps, partitions
/// that are not consistent with a map, unknown JSON fields. CLI exit code 2.
class validation_error : public std::invalid_argument {
 public:
  explicit validation_error(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical procedure failed to deliver a result within its tolerances
/// (no admissible root, eigen-iteration stalled, unstable derivative).
/// CLI exit code 3.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace detdiff
