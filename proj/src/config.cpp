#include "pnp/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <sstream>

#include "pnp/errors.hpp"

namespace pnp {

using nlohmann::json;

namespace {

struct Field {
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&, const std::string&)> set;
};

void set_double(double& slot, const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(key + ": expected a number");
  slot = v.get<double>();
}

void set_int(int& slot, const json& v, const std::string& key) {
  if (v.is_number_integer()) {
    const auto x = v.get<long long>();
    if (x < INT32_MIN || x > INT32_MAX) throw ConfigError(key + ": out of range");
    slot = static_cast<int>(x);
    return;
  }
  throw ConfigError(key + ": expected an integer");
}

void set_string(std::string& slot, const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError(key + ": expected a string");
  slot = v.get<std::string>();
}

void set_bool(bool& slot, const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError(key + ": expected true or false");
  slot = v.get<bool>();
}

template <class T, class Setter>
Field field(T RunConfig::*member, Setter setter) {
  return {[member](const RunConfig& c) { return json(c.*member); },
          [member, setter](RunConfig& c, const json& v, const std::string& k) { setter(c.*member, v, k); }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"formulation", field(&RunConfig::formulation, set_string)},
      {"scheme", field(&RunConfig::scheme, set_string)},
      {"epsilon", field(&RunConfig::epsilon, set_double)},
      {"N", field(&RunConfig::N, set_int)},
      {"obstacle", field(&RunConfig::obstacle, set_bool)},
      {"circle_x", field(&RunConfig::circle_x, set_double)},
      {"circle_y", field(&RunConfig::circle_y, set_double)},
      {"circle_radius", field(&RunConfig::circle_radius, set_double)},
      {"dt_over_h", field(&RunConfig::dt_over_h, set_double)},
      {"T", field(&RunConfig::T, set_double)},
      {"d_plus", field(&RunConfig::d_plus, set_double)},
      {"d_minus", field(&RunConfig::d_minus, set_double)},
      {"m_plus", field(&RunConfig::m_plus, set_double)},
      {"m_minus", field(&RunConfig::m_minus, set_double)},
      {"v0", field(&RunConfig::v0, set_double)},
      {"sigma", field(&RunConfig::sigma, set_double)},
      {"x_plus_in", field(&RunConfig::x_plus_in, set_double)},
      {"x_minus_in", field(&RunConfig::x_minus_in, set_double)},
      {"y_in", field(&RunConfig::y_in, set_double)},
      {"output_dir", field(&RunConfig::output_dir, set_string)},
      {"emit_fields_every", field(&RunConfig::emit_fields_every, set_int)},
  };
  return table;
}

const Field* lookup(const std::string& key) {
  for (const auto& [k, f] : fields()) {
    if (k == key) return &f;
  }
  return nullptr;
}

void apply(RunConfig& c, const std::string& key, const json& v) {
  const Field* f = lookup(key);
  if (!f) throw ConfigError(key + ": unknown key");
  f->set(c, v, key);
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key + ": " + what);
}

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, f] : fields()) k.push_back(name);
    return k;
  }();
  return keys;
}

Problem RunConfig::problem() const {
  Problem p;
  p.n_cells = N;
  p.obstacle = obstacle;
  p.center = {circle_x, circle_y};
  p.radius = circle_radius;
  p.params = {epsilon, d_plus, d_minus, m_plus, m_minus};
  p.initial.v0 = v0;
  p.initial.sigma = sigma;
  p.initial.center_plus = {x_plus_in, y_in};
  p.initial.center_minus = {x_minus_in, y_in};
  return p;
}

std::string config_to_json(const RunConfig& c) {
  json j = json::object();
  for (const auto& [k, f] : fields()) j[k] = f.get(c);
  // Keep the declaration order rather than nlohmann's sorted keys.
  std::string out = "{\n";
  const auto& keys = config_keys();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    out += "  \"" + keys[i] + "\": " + j[keys[i]].dump() + (i + 1 < keys.size() ? ",\n" : "\n");
  }
  return out + "}\n";
}

void validate(const RunConfig& c) {
  const Formulation form = c.form();
  const Scheme scheme = c.time_scheme();

  require(std::isfinite(c.epsilon) && c.epsilon >= 0.0, "epsilon", "must be finite and >= 0");
  require(!(c.epsilon == 0.0 && form == Formulation::Primitive), "epsilon",
          "0 is only supported by the quasi_neutral formulation");
  require(!(scheme.split && form != Formulation::Primitive), "scheme",
          "split is only defined for the primitive formulation");
  require(c.N >= 4 && c.N <= 4096, "N", "must be an integer in [4, 4096]");
  require(finite_positive(c.dt_over_h), "dt_over_h", "must be a finite positive number");
  require(finite_positive(c.T), "T", "must be a finite positive number");
  step_count(c.T, c.dt());
  for (auto [v, k] : {std::pair{c.d_plus, "d_plus"}, {c.d_minus, "d_minus"}, {c.m_plus, "m_plus"},
                      {c.m_minus, "m_minus"}, {c.sigma, "sigma"}}) {
    require(finite_positive(v), k, "must be a finite positive number");
  }
  require(std::isfinite(c.v0) && c.v0 >= 0.0, "v0", "must be finite and >= 0");
  if (c.obstacle) {
    require(finite_positive(c.circle_radius), "circle_radius", "must be a finite positive number");
    const double clearance = 2.0 * c.h();
    for (auto [v, k] : {std::pair{c.circle_x, "circle_x"}, {c.circle_y, "circle_y"}}) {
      require(std::isfinite(v) && v - c.circle_radius >= clearance && v + c.circle_radius <= 1.0 - clearance, k,
              "circle must stay inside the unit square with a 2h margin");
    }
  }
  for (auto [v, k] : {std::pair{c.x_plus_in, "x_plus_in"}, {c.x_minus_in, "x_minus_in"}, {c.y_in, "y_in"}}) {
    require(std::isfinite(v) && v > 0.0 && v < 1.0, k, "must lie strictly inside the unit square");
  }
  if (c.obstacle) {
    for (auto [x, k] : {std::pair{c.x_plus_in, "x_plus_in"}, {c.x_minus_in, "x_minus_in"}}) {
      require(std::hypot(x - c.circle_x, c.y_in - c.circle_y) > c.circle_radius, k,
              "initial peak lies inside the obstacle");
    }
  }
  require(!c.output_dir.empty(), "output_dir", "must not be empty");
  require(c.emit_fields_every >= 0, "emit_fields_every", "must be >= 0");
}

RunConfig parse_config(const std::string& json_text, const std::map<std::string, std::string>& overrides,
                       RunConfig base) {
  RunConfig c = std::move(base);
  bool blank = true;
  for (char ch : json_text) {
    if (!std::isspace(static_cast<unsigned char>(ch))) blank = false;
  }
  if (!blank) {
    json j;
    try {
      j = json::parse(json_text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config: malformed JSON (") + e.what() + ")");
    }
    if (!j.is_object()) throw ConfigError("config: expected a flat JSON object");
    for (const auto& [k, v] : j.items()) apply(c, k, v);
  }
  for (const auto& [k, text] : overrides) {
    json v = json::parse(text, nullptr, false);
    if (v.is_discarded()) v = text;  // bare words are strings
    apply(c, k, v);
  }
  validate(c);
  return c;
}

RunConfig load_config(const std::string& path, const std::map<std::string, std::string>& overrides) {
  std::string text;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return parse_config(text, overrides);
}

}  // namespace pnp
