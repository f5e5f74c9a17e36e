#include "config.hpp"

#include <cmath>
#include <cstdio>

namespace bcrb::cli {

namespace {

const char* type_name(const json& j) {
  return j.type_name();
}

}  // namespace

void Node::expect_keys(std::initializer_list<const char*> allowed) const {
  if (!value_->is_object()) fail(std::string("expected an object, got ") + type_name(*value_));
  for (auto it = value_->begin(); it != value_->end(); ++it) {
    bool known = false;
    for (const char* k : allowed) known = known || it.key() == k;
    if (!known) throw ConfigError(path_ + "." + it.key(), "unknown field");
  }
}

bool Node::has(const std::string& key) const {
  return value_->is_object() && value_->contains(key);
}

Node Node::at(const std::string& key) const {
  if (!value_->is_object()) fail(std::string("expected an object, got ") + type_name(*value_));
  auto it = value_->find(key);
  if (it == value_->end()) throw ConfigError(path_ + "." + key, "missing required field");
  return Node(*it, path_ + "." + key);
}

std::optional<Node> Node::get(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return at(key);
}

Node Node::operator[](std::size_t i) const {
  if (!value_->is_array()) fail(std::string("expected an array, got ") + type_name(*value_));
  if (i >= value_->size()) fail("index " + std::to_string(i) + " out of range");
  return Node((*value_)[i], path_ + "[" + std::to_string(i) + "]");
}

std::size_t Node::size() const {
  if (!value_->is_array()) fail(std::string("expected an array, got ") + type_name(*value_));
  return value_->size();
}

double Node::number(double lo, double hi) const {
  if (!value_->is_number()) fail(std::string("expected a number, got ") + type_name(*value_));
  const double x = value_->get<double>();
  if (!std::isfinite(x) || x < lo || x > hi) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "value %g outside [%g, %g]", x, lo, hi);
    fail(buf);
  }
  return x;
}

double Node::positive() const {
  const double x = number();
  if (!(x > 0)) fail("must be positive");
  return x;
}

long long Node::integer(long long lo, long long hi) const {
  if (!value_->is_number_integer())
    fail(std::string("expected an integer, got ") + type_name(*value_));
  const long long x = value_->get<long long>();
  if (x < lo || x > hi)
    fail("value " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " +
         std::to_string(hi) + "]");
  return x;
}

bool Node::boolean() const {
  if (!value_->is_boolean()) fail(std::string("expected a boolean, got ") + type_name(*value_));
  return value_->get<bool>();
}

std::string Node::string() const {
  if (!value_->is_string()) fail(std::string("expected a string, got ") + type_name(*value_));
  return value_->get<std::string>();
}

std::string Node::choice(std::initializer_list<const char*> options) const {
  const std::string s = string();
  std::string list;
  for (const char* o : options) {
    if (s == o) return s;
    list += (list.empty() ? "" : ", ") + std::string(o);
  }
  fail("'" + s + "' is not one of " + list);
}

std::vector<double> Node::numbers(int length) const {
  const std::size_t n = size();
  if (length >= 0 && n != static_cast<std::size_t>(length))
    fail("expected " + std::to_string(length) + " entries, got " + std::to_string(n));
  if (n == 0) fail("must not be empty");
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back((*this)[i].number());
  return out;
}

Vec Node::vector(int length) const {
  const auto xs = numbers(length);
  return Eigen::Map<const Vec>(xs.data(), static_cast<Index>(xs.size()));
}

Mat Node::matrix(int size) const {
  const std::size_t rows = this->size();
  if (size >= 0 && rows != static_cast<std::size_t>(size))
    fail("expected a " + std::to_string(size) + "x" + std::to_string(size) + " matrix");
  if (rows == 0) fail("must not be empty");
  Mat m(rows, rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = (*this)[r].numbers(static_cast<int>(rows));
    for (std::size_t c = 0; c < rows; ++c) m(r, c) = row[c];
  }
  return m;
}

double number_or(const Node& parent, const std::string& key, double fallback, double lo, double hi) {
  auto n = parent.get(key);
  return n ? n->number(lo, hi) : fallback;
}

long long integer_or(const Node& parent, const std::string& key, long long fallback, long long lo,
                     long long hi) {
  auto n = parent.get(key);
  return n ? n->integer(lo, hi) : fallback;
}

bool boolean_or(const Node& parent, const std::string& key, bool fallback) {
  auto n = parent.get(key);
  return n ? n->boolean() : fallback;
}

}  // namespace bcrb::cli
