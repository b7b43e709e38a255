#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace xmd {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles with an optional gradient buffer.
///
/// Rank 0 is a scalar, rank 1 a per-sample vector, rank 2 a (rows x cols)
/// matrix. Higher ranks are representable (checkpoints) but no op uses them.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  // Rank-2 views; a rank-1 tensor is one row.
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  std::span<const double> row(std::size_t r) const { return std::span(data_).subspan(r * cols(), cols()); }
  std::span<double> row(std::size_t r) { return std::span(data_).subspan(r * cols(), cols()); }

  double item() const;

  bool has_grad() const noexcept { return grad_.has_value(); }
  std::span<double> grad();
  std::span<const double> grad() const;
  /// Allocates a zero gradient buffer if none exists.
  std::span<double> ensure_grad();
  void clear_grad() noexcept { grad_.reset(); }

  bool all_finite() const noexcept;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
  std::optional<std::vector<double>> grad_;
};

struct Parameter {
  Tensor value;
  bool trainable = true;
};

/// Named, ordered collection of parameters. Insertion order is preserved so
/// that checkpoints and optimizer traversal are deterministic.
class ParamSet {
 public:
  void add(const std::string& name, Tensor value, bool trainable = true);
  bool contains(const std::string& name) const;
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;

  void set_trainable(const std::string& name, bool trainable);
  /// Marks every parameter whose name starts with `prefix` as frozen.
  void freeze_prefix(const std::string& prefix);
  void clear_grads();

  /// Copies every entry of `other` in, replacing same-named entries.
  void merge(const ParamSet& other, bool trainable);

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t scalar_count(bool trainable_only = false) const;
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  friend bool operator==(const ParamSet& a, const ParamSet& b);

 private:
  std::size_t index_of(const std::string& name) const;

  std::vector<std::pair<std::string, Parameter>> entries_;
};

}  // namespace xmd
