#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace fedsim {

/// Dense row-major float64 tensor. Instances are always valid: the element
/// count matches the shape and every element is finite.
class Tensor {
 public:
  Tensor() : data_{0.0} {}  // scalar zero

  const std::vector<std::uint32_t>& shape() const noexcept { return shape_; }
  const std::vector<double>& data() const noexcept { return data_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t ndims() const noexcept { return shape_.size(); }

  bool operator==(const Tensor&) const = default;

 private:
  friend Tensor make_tensor(std::vector<std::uint32_t> shape,
                            std::vector<double> data);
  std::vector<std::uint32_t> shape_;
  std::vector<double> data_;
};

/// Throws kShapeMismatch when the element count disagrees with the shape
/// (or the shape has more than 255 dims), kNonFiniteValue on NaN/Inf.
Tensor make_tensor(std::vector<std::uint32_t> shape, std::vector<double> data);

Tensor zeros(std::vector<std::uint32_t> shape);

/// Product of dims; 1 for the empty shape.
std::uint64_t element_count(std::span<const std::uint32_t> shape);

/// Ordered list of tensors exchanged between server and clients.
struct Parameters {
  std::vector<Tensor> tensors;

  bool operator==(const Parameters&) const = default;
};

bool shape_compatible(const Parameters& a, const Parameters& b);

using ConfigValue = std::variant<bool, std::int64_t, double, std::string>;

/// String-keyed scalar map. std::map<std::string> orders keys by unsigned
/// byte comparison, which is the canonical wire order.
class ConfigMap {
 public:
  using Entries = std::map<std::string, ConfigValue>;

  ConfigMap() = default;
  ConfigMap(std::initializer_list<Entries::value_type> init) : entries_(init) {}

  void set(std::string key, ConfigValue value) {
    entries_.insert_or_assign(std::move(key), std::move(value));
  }
  bool contains(const std::string& key) const { return entries_.contains(key); }
  void erase(const std::string& key) { entries_.erase(key); }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const Entries& entries() const noexcept { return entries_; }

  const ConfigValue* find(const std::string& key) const;

  // Typed accessors throw kMissingConfigKey when the key is absent and
  // kValidationError when the stored kind is wrong. Ints widen to double.
  bool get_bool(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  const std::string& get_string(const std::string& key) const;

  std::optional<double> try_double(const std::string& key) const;
  bool flag(const std::string& key) const;  // false when absent

  bool operator==(const ConfigMap&) const = default;

 private:
  Entries entries_;
};

}  // namespace fedsim
