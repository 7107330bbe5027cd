#pragma once

#include <stdexcept>
#include <string>

namespace dimerlab {

// Malformed input: wrong dimensions, bad config keys, out-of-range knobs.
class StructuralError : public std::invalid_argument {
public:
  explicit StructuralError(const std::string& what) : std::invalid_argument(what) {}
};

// Numerical failure: step-size underflow, eigensolver breakdown, witness violation.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// A well-posed computation whose answer is "the requested object does not exist
// at these parameters" (e.g. an island too small to hold a quantized orbit).
// Callers are expected to treat this as a result, not a crash.
class PhysicsRejection : public std::runtime_error {
public:
  explicit PhysicsRejection(const std::string& what) : std::runtime_error(what) {}
};

} // namespace dimerlab
