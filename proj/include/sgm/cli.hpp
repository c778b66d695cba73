#pragma once

#include "sgm/eval.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace sgm {

// Raised by flag-value parsers; the CLI maps it to the usage exit code.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<std::string> split_on_commas(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = text.find(',', start);
    parts.push_back(text.substr(
        start, (comma == std::string::npos ? text.size() : comma) - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return parts;
}

}  // namespace detail

// "0.2,0.8" -> {0.2, 0.8}
inline std::vector<double> parse_weight_list(const std::string& text) {
  std::vector<double> weights;
  for (const std::string& part : detail::split_on_commas(text)) {
    try {
      std::size_t used = 0;
      weights.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw UsageError("cannot parse '" + part + "' in weight list '" + text + "'");
    }
  }
  return weights;
}

// "5,10,15" and "2..20" (inclusive), also mixed: "2,4..6,9".
inline std::vector<Index> parse_k_list(const std::string& text) {
  std::vector<Index> ks;
  for (const std::string& part : detail::split_on_commas(text)) {
    const std::size_t dots = part.find("..");
    auto parse_int = [&](const std::string& s) -> Index {
      try {
        std::size_t used = 0;
        const long v = std::stol(s, &used);
        if (used != s.size() || v < 1) throw std::invalid_argument("bad");
        return static_cast<Index>(v);
      } catch (const std::exception&) {
        throw UsageError("cannot parse '" + s + "' in k list '" + text + "'");
      }
    };
    if (dots == std::string::npos) {
      ks.push_back(parse_int(part));
    } else {
      const Index lo = parse_int(part.substr(0, dots));
      const Index hi = parse_int(part.substr(dots + 2));
      if (lo > hi) {
        throw UsageError("empty range '" + part + "' in k list '" + text + "'");
      }
      for (Index k = lo; k <= hi; ++k) ks.push_back(k);
    }
  }
  if (ks.empty()) throw UsageError("k list '" + text + "' is empty");
  return ks;
}

// "mca01,sgm" or "all" (every method, canonical order).
inline std::vector<Method> parse_method_list(const std::string& text) {
  std::vector<Method> methods;
  if (text == "all") {
    for (const auto& [method, name] : method_names()) methods.push_back(method);
    return methods;
  }
  for (const std::string& part : detail::split_on_commas(text)) {
    try {
      methods.push_back(parse_method(part));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  return methods;
}

}  // namespace sgm
