#pragma once

#include <stdexcept>
#include <string>

namespace qdet {

// Rejected input: the caller handed us something malformed (bad dimensions,
// non-normalized state, invalid parameter...). Maps to CLI exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// Invariant violated mid-run: something that should be impossible given valid
// inputs (norm lost, mixed graph component, unaccounted probability...).
// Maps to CLI exit code 2. These are surfaced, never silently repaired.
class IntegrityError : public std::runtime_error {
 public:
  explicit IntegrityError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qdet
