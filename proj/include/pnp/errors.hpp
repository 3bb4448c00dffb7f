#pragma once

#include <stdexcept>
#include <string>

namespace pnp {

// Invalid user-facing configuration (bad geometry, parameters, unsupported combos).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// The discrete domain degenerated (no interior nodes, too few boundary points, ...).
class GeometryError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class SingularMatrixError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Non-finite or dimensionally inconsistent numerical input.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace pnp
