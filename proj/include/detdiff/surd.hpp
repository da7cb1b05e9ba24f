#pragma once

#include <cctype>
#include <cmath>
#include <regex>
#include <string>

#include "detdiff/error.hpp"

namespace detdiff {

/// a + b sqrt(c), e.g. "2+sqrt(3)", "3 - 2*sqrt(6)", "sqrt(2)", "4.5".
struct Surd {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  long double value_ld() const {
    return static_cast<long double>(a) + static_cast<long double>(b) * std::sqrt(static_cast<long double>(c));
  }
  double value() const { return static_cast<double>(value_ld()); }
};

inline Surd parse_surd(const std::string& text) {
  std::string s;
  for (char ch : text) {
    if (!std::isspace(static_cast<unsigned char>(ch))) s += ch;
  }
  static const std::regex number(R"([+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)");
  // [constant followed by a sign] [sign] [coefficient[*]] sqrt(radicand)
  static const std::regex with_root(
      R"(^(?:([+-]?(?:\d+\.?\d*|\.\d+))(?=[+-]))?([+-])?(?:(\d+\.?\d*|\.\d+)\*?)?sqrt\((\d+\.?\d*|\.\d+)\)$)");
  std::smatch m;
  Surd out;
  if (std::regex_match(s, number)) {
    out.a = std::stod(s);
    return out;
  }
  if (!std::regex_match(s, m, with_root)) {
    throw validation_error("cannot parse '" + text + "': expected a number or a+b*sqrt(c)");
  }
  out.a = m[1].matched ? std::stod(m[1].str()) : 0.0;
  out.b = m[3].matched ? std::stod(m[3].str()) : 1.0;
  if (m[2].matched && m[2].str() == "-") out.b = -out.b;
  out.c = std::stod(m[4].str());
  return out;
}

}  // namespace detdiff
