#include "fedsim/tensor.hpp"

#include <cmath>
#include <limits>

#include "fedsim/error.hpp"

namespace fedsim {

std::uint64_t element_count(std::span<const std::uint32_t> shape) {
  std::uint64_t n = 1;
  for (auto d : shape) {
    if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / d) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    n *= d;
  }
  return n;
}

Tensor make_tensor(std::vector<std::uint32_t> shape, std::vector<double> data) {
  if (shape.size() > 255) {
    fail(ErrorCode::kShapeMismatch,
         "tensor has " + std::to_string(shape.size()) + " dims, limit is 255");
  }
  const auto expected = element_count(shape);
  if (expected != data.size()) {
    fail(ErrorCode::kShapeMismatch, "shape holds " + std::to_string(expected) +
                                        " elements but " +
                                        std::to_string(data.size()) +
                                        " values were given");
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      fail(ErrorCode::kNonFiniteValue,
           "element " + std::to_string(i) + " is not finite");
    }
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  return t;
}

Tensor zeros(std::vector<std::uint32_t> shape) {
  const auto n = element_count(shape);
  return make_tensor(std::move(shape), std::vector<double>(n, 0.0));
}

bool shape_compatible(const Parameters& a, const Parameters& b) {
  if (a.tensors.size() != b.tensors.size()) return false;
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    if (a.tensors[i].shape() != b.tensors[i].shape()) return false;
  }
  return true;
}

const ConfigValue* ConfigMap::find(const std::string& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

namespace {

const ConfigValue& require(const ConfigMap& m, const std::string& key) {
  const auto* v = m.find(key);
  if (v == nullptr) fail(ErrorCode::kMissingConfigKey, "missing key '" + key + "'");
  return *v;
}

[[noreturn]] void wrong_kind(const std::string& key, const char* want) {
  fail(ErrorCode::kValidationError, "key '" + key + "' is not " + want);
}

}  // namespace

bool ConfigMap::get_bool(const std::string& key) const {
  const auto& v = require(*this, key);
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  wrong_kind(key, "a bool");
}

std::int64_t ConfigMap::get_int(const std::string& key) const {
  const auto& v = require(*this, key);
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  wrong_kind(key, "an int");
}

double ConfigMap::get_double(const std::string& key) const {
  const auto& v = require(*this, key);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  wrong_kind(key, "numeric");
}

const std::string& ConfigMap::get_string(const std::string& key) const {
  const auto& v = require(*this, key);
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  wrong_kind(key, "a string");
}

std::optional<double> ConfigMap::try_double(const std::string& key) const {
  if (!contains(key)) return std::nullopt;
  return get_double(key);
}

bool ConfigMap::flag(const std::string& key) const {
  const auto* v = find(key);
  if (v == nullptr) return false;
  const auto* b = std::get_if<bool>(v);
  return b != nullptr && *b;
}

}  // namespace fedsim
