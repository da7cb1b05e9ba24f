#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "detdiff/error.hpp"
#include "detdiff/lift_map.hpp"
#include "detdiff/markov_partition.hpp"
#include "detdiff/surd.hpp"
#include "detdiff/transfer_operator.hpp"

namespace detdiff {

using json = nlohmann::ordered_json;

inline constexpr std::string_view kVersion = "0.1.0";

/// Number, or a string in a+b*sqrt(c) form.
inline double real_from_json(const json& v, const std::string& field) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_surd(v.get<std::string>()).value();
  throw validation_error("field '" + field + "' must be a number or a surd string");
}

namespace detail {

inline const json& require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw validation_error(where + ": missing field '" + key + "'");
  return obj.at(key);
}

inline json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw validation_error(what + ": invalid JSON (" + std::string(e.what()) + ")");
  }
}

}  // namespace detail

/// {"type":"linear","lambda":...} | {"type":"zigzag","p":..,"xi":..} |
/// {"type":"pieces","breakpoints":[..],"values":[[l,r],..]}
inline PiecewiseLinearLiftMap map_from_json(const json& spec) {
  const auto type = detail::require(spec, "type", "map spec");
  if (!type.is_string()) throw validation_error("map spec: 'type' must be a string");
  const auto t = type.get<std::string>();
  try {
    if (t == "linear") return PiecewiseLinearLiftMap::linear(real_from_json(detail::require(spec, "lambda", "linear map"), "lambda"));
    if (t == "zigzag") {
      const auto& p = detail::require(spec, "p", "zigzag map");
      if (!p.is_number_integer()) throw validation_error("zigzag map: 'p' must be an integer");
      return PiecewiseLinearLiftMap::zigzag(p.get<int>(), real_from_json(detail::require(spec, "xi", "zigzag map"), "xi"));
    }
    if (t == "pieces") {
      std::vector<double> bps;
      for (const auto& b : detail::require(spec, "breakpoints", "pieces map")) bps.push_back(real_from_json(b, "breakpoints"));
      std::vector<std::pair<double, double>> vals;
      for (const auto& v : detail::require(spec, "values", "pieces map")) {
        if (!v.is_array() || v.size() != 2) throw validation_error("pieces map: each value must be a [left, right] pair");
        vals.emplace_back(real_from_json(v[0], "values"), real_from_json(v[1], "values"));
      }
      return PiecewiseLinearLiftMap(std::move(bps), std::move(vals));
    }
  } catch (const json::exception& e) {
    throw validation_error(std::string("map spec: ") + e.what());
  }
  throw validation_error("map spec: unknown map type '" + t + "'");
}

/// Inline JSON (starts with '{'), a path to a JSON file, or shorthand such
/// as "linear lambda=2+sqrt(3)" / "zigzag p=1 xi=0.25".
inline json load_spec_argument(const std::string& arg, const std::string& what) {
  const auto first = arg.find_first_not_of(" \t\n");
  if (first != std::string::npos && arg[first] == '{') return detail::parse_json_text(arg, what);
  if (std::filesystem::is_regular_file(arg)) {
    std::ifstream in(arg);
    std::stringstream buf;
    buf << in.rdbuf();
    return detail::parse_json_text(buf.str(), what + " file '" + arg + "'");
  }
  std::istringstream words(arg);
  std::string type;
  words >> type;
  if (type.empty()) throw validation_error(what + ": empty specification");
  json out;
  out["type"] = type;
  std::string kv;
  while (words >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw validation_error(what + ": expected key=value, got '" + kv + "' (and no such file)");
    }
    const auto key = kv.substr(0, eq);
    const auto value = kv.substr(eq + 1);
    long long as_int = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), as_int);
    if (ec == std::errc() && ptr == value.data() + value.size()) {
      out[key] = as_int;
    } else {
      out[key] = value;
    }
  }
  return out;
}

inline PartitionEquationSystem partition_system_from_json(const json& spec) {
  PartitionEquationSystem sys;
  try {
    for (const auto& u : detail::require(spec, "unknowns", "partition system")) sys.unknowns.push_back(u.get<std::string>());
    for (const auto& e : detail::require(spec, "equations", "partition system")) {
      PartitionEquation eq;
      eq.lhs = detail::require(e, "lhs", "equation").get<std::string>();
      const auto& t = detail::require(e, "target", "equation");
      if (t.contains("const")) eq.target.constant = real_from_json(t.at("const"), "const");
      if (t.contains("coef")) {
        if (!t.at("coef").is_number_integer()) throw validation_error("equation target: 'coef' must be an integer");
        eq.target.coef = t.at("coef").get<int>();
      }
      if (t.contains("ref")) eq.target.ref = t.at("ref").get<std::string>();
      sys.equations.push_back(std::move(eq));
    }
    if (spec.contains("parity")) {
      const auto parity = spec.at("parity").get<std::string>();
      if (parity != "even" && parity != "odd") throw validation_error("partition system: parity must be 'even' or 'odd'");
      sys.even = parity == "even";
    }
  } catch (const json::exception& e) {
    throw validation_error(std::string("partition system: ") + e.what());
  }
  return sys;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct Provenance {
  std::string map_hash;  // FNV-1a of the canonical map JSON
  std::uint64_t seed = 0;
  bool has_seed = false;

  json to_json() const {
    json j;
    j["version"] = std::string(kVersion);
    j["map_hash"] = map_hash;
    if (has_seed) {
      j["seed"] = seed;
    } else {
      j["seed"] = nullptr;
    }
    return j;
  }

  /// '#'-prefixed lines written before a CSV header row.
  void write_csv_comments(std::ostream& os) const {
    os << "# detdiff " << kVersion << "\n# map_hash " << map_hash << "\n";
    if (has_seed) os << "# seed " << seed << "\n";
  }
};

inline Provenance provenance_for(const json& map_spec) {
  return {hex64(fnv1a(map_spec.dump())), 0, false};
}

/// Shortest round-trip decimal; "nan" / "inf" / "-inf" otherwise.
inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

/// NaN becomes null so that the output stays valid JSON.
inline json real_to_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json report_to_json(const DiffusionReport& r) {
  json j;
  j["method"] = std::string(method_name(r.method));
  j["D"] = real_to_json(r.D);
  j["drift"] = real_to_json(r.drift);
  j["alpha"] = json::array();
  for (double a : r.alpha) j["alpha"].push_back(real_to_json(a));
  j["diagnostics"] = json::object();
  for (const auto& [k, v] : r.diagnostics) j["diagnostics"][k] = real_to_json(v);
  return j;
}

/// shift -> row-major entries.
inline json matrices_to_json(const TransitionMatrixSet& set) {
  json j = json::object();
  for (const auto& sm : set.matrices()) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < sm.p.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < sm.p.cols(); ++c) row.push_back(sm.p(r, c));
      rows.push_back(std::move(row));
    }
    j[std::to_string(sm.shift)] = std::move(rows);
  }
  return j;
}

}  // namespace detdiff
