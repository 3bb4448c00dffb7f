#pragma once

#include <map>
#include <string>
#include <vector>

#include "pnp/analysis.hpp"

namespace pnp {

/// Flat run configuration. Keys in files and --set overrides match the field
/// names below one to one.
struct RunConfig {
  std::string formulation = "quasi_neutral";
  std::string scheme = "I2";
  double epsilon = 1e-4;
  int N = 100;
  bool obstacle = true;
  double circle_x = 0.5;
  double circle_y = 0.5;
  double circle_radius = 0.15;
  double dt_over_h = 1.0;
  double T = 0.1;
  double d_plus = 1.5;
  double d_minus = 0.5;
  double m_plus = 23.0;
  double m_minus = 265.0;
  double v0 = 1e-6;
  double sigma = 0.05;
  double x_plus_in = 0.4;
  double x_minus_in = 0.6;
  double y_in = 0.2;
  std::string output_dir = "out";
  int emit_fields_every = 10;

  bool operator==(const RunConfig&) const = default;

  Formulation form() const { return parse_formulation(formulation); }
  Scheme time_scheme() const { return parse_scheme(scheme); }
  double h() const { return 1.0 / N; }
  double dt() const { return dt_over_h * h(); }
  int steps() const { return step_count(T, dt()); }
  Problem problem() const;
};

/// Every recognised key, in the order they are echoed.
const std::vector<std::string>& config_keys();

/// Flat JSON object text; numbers keep full double precision.
std::string config_to_json(const RunConfig& c);

/// Parses a flat JSON object (possibly empty) on top of `base`, then applies
/// `overrides` (key -> JSON value text, or a bare string), then validates.
/// Throws ConfigError naming the offending key.
RunConfig parse_config(const std::string& json_text, const std::map<std::string, std::string>& overrides = {},
                       RunConfig base = {});
RunConfig load_config(const std::string& path, const std::map<std::string, std::string>& overrides = {});

/// Full validation; throws ConfigError on the first bad key.
void validate(const RunConfig& c);

}  // namespace pnp
