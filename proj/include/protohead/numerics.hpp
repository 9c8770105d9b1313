#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace protohead {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  /// Takes ownership of `data`; throws a dimension error if its length is not
  /// rows*cols and a numeric error if any entry is not finite.
  static Matrix from_data(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Numerically stable softmax (max-subtracted).
Vector softmax(std::span<const double> v);

double l2_distance_sq(std::span<const double> a, std::span<const double> b);

double dot(std::span<const double> a, std::span<const double> b);

bool all_finite(std::span<const double> v);

struct AdamState {
  std::uint64_t step = 0;
  Vector m;
  Vector v;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lr = 1e-3;

  AdamState() = default;
  AdamState(std::size_t size, double lr_, double beta1_ = 0.9, double beta2_ = 0.999, double eps_ = 1e-8)
      : m(size, 0.0), v(size, 0.0), beta1(beta1_), beta2(beta2_), eps(eps_), lr(lr_) {}

  bool operator==(const AdamState&) const = default;
};

/// One Adam update with bias correction, in place on `param` and `state`.
void adam_step(std::span<double> param, std::span<const double> grad, AdamState& state);

}  // namespace protohead
