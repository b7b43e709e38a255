#include "xmd/tensor.hpp"

#include <cmath>
#include <numeric>

#include "xmd/error.hpp"

namespace xmd {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw ConfigError("tensor shape " + shape_string(shape_) + " does not match " +
                      std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

std::size_t Tensor::rows() const noexcept {
  if (shape_.size() == 2) return shape_[0];
  return 1;
}

std::size_t Tensor::cols() const noexcept {
  if (shape_.size() == 2) return shape_[1];
  if (shape_.size() == 1) return shape_[0];
  return 1;
}

double Tensor::item() const {
  if (data_.size() != 1) throw ConfigError("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

std::span<double> Tensor::grad() {
  if (!grad_) throw UsageError("tensor has no gradient");
  return *grad_;
}

std::span<const double> Tensor::grad() const {
  if (!grad_) throw UsageError("tensor has no gradient");
  return *grad_;
}

std::span<double> Tensor::ensure_grad() {
  if (!grad_) grad_.emplace(data_.size(), 0.0);
  return *grad_;
}

bool Tensor::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  if (grad_) {
    for (double v : *grad_) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

std::size_t ParamSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first == name) return i;
  }
  return entries_.size();
}

void ParamSet::add(const std::string& name, Tensor value, bool trainable) {
  if (index_of(name) != entries_.size()) throw ConfigError("duplicate parameter name: " + name);
  entries_.emplace_back(name, Parameter{std::move(value), trainable});
}

bool ParamSet::contains(const std::string& name) const { return index_of(name) != entries_.size(); }

Parameter& ParamSet::get(const std::string& name) {
  const auto i = index_of(name);
  if (i == entries_.size()) throw ConfigError("unknown parameter: " + name);
  return entries_[i].second;
}

const Parameter& ParamSet::get(const std::string& name) const {
  const auto i = index_of(name);
  if (i == entries_.size()) throw ConfigError("unknown parameter: " + name);
  return entries_[i].second;
}

void ParamSet::set_trainable(const std::string& name, bool trainable) { get(name).trainable = trainable; }

void ParamSet::freeze_prefix(const std::string& prefix) {
  for (auto& [name, p] : entries_) {
    if (name.starts_with(prefix)) p.trainable = false;
  }
}

void ParamSet::clear_grads() {
  for (auto& [name, p] : entries_) p.value.clear_grad();
}

void ParamSet::merge(const ParamSet& other, bool trainable) {
  for (const auto& [name, p] : other.entries_) {
    const auto i = index_of(name);
    if (i == entries_.size()) {
      entries_.emplace_back(name, Parameter{p.value, trainable});
    } else {
      entries_[i].second = Parameter{p.value, trainable};
    }
    entries_[index_of(name)].second.value.clear_grad();
  }
}

std::size_t ParamSet::scalar_count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& [name, p] : entries_) {
    if (!trainable_only || p.trainable) n += p.value.size();
  }
  return n;
}

bool operator==(const ParamSet& a, const ParamSet& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    if (a.entries_[i].first != b.entries_[i].first) return false;
    if (!(a.entries_[i].second.value == b.entries_[i].second.value)) return false;
  }
  return true;
}

}  // namespace xmd
