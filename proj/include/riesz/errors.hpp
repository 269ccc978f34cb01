#pragma once

#include <stdexcept>
#include <string>

namespace riesz {

// Invalid arguments or violated preconditions of a pure evaluation (singular kernel, coincident points).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A geometric hypothesis does not hold (window outside support, separation too small, no feasible crenel).
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Quadrature or iteration failed to reach the requested accuracy.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The requested model / kernel combination is outside what this library handles.
class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed user input (config files, CLI flags).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace riesz
