#pragma once

// Path-tracking view of a scenario config.  Every accessor raises
// ConfigError naming the JSON path ($.model.grid.nodes[1]) of the offending field.

#include "bcrb/errors.hpp"
#include "bcrb/grid_fields.hpp"

#include <nlohmann/json.hpp>

#include <initializer_list>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace bcrb::cli {

using nlohmann::json;

class Node {
 public:
  Node(const json& value, std::string path) : value_(&value), path_(std::move(path)) {}

  const json& raw() const { return *value_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(const std::string& message) const { throw ConfigError(path_, message); }

  /// Object with only the listed keys.
  void expect_keys(std::initializer_list<const char*> allowed) const;
  bool has(const std::string& key) const;
  Node at(const std::string& key) const;
  std::optional<Node> get(const std::string& key) const;
  Node operator[](std::size_t i) const;
  std::size_t size() const;

  double number(double lo = -std::numeric_limits<double>::infinity(),
                double hi = std::numeric_limits<double>::infinity()) const;
  /// Strictly positive finite number.
  double positive() const;
  long long integer(long long lo, long long hi) const;
  bool boolean() const;
  std::string string() const;
  std::string choice(std::initializer_list<const char*> options) const;

  /// Array of numbers; `length` < 0 accepts any nonzero length.
  std::vector<double> numbers(int length = -1) const;
  Vec vector(int length = -1) const;
  /// Square matrix given as an array of rows.
  Mat matrix(int size = -1) const;

 private:
  const json* value_;
  std::string path_;
};

/// Helpers for optional fields with defaults.
double number_or(const Node& parent, const std::string& key, double fallback, double lo = -1e300,
                 double hi = 1e300);
long long integer_or(const Node& parent, const std::string& key, long long fallback, long long lo,
                     long long hi);
bool boolean_or(const Node& parent, const std::string& key, bool fallback);

}  // namespace bcrb::cli
