#include "protohead/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "protohead/errors.hpp"

namespace protohead {

Matrix Matrix::from_data(std::size_t rows, std::size_t cols, std::vector<double> data) {
  require(data.size() == rows * cols, ErrorKind::kDimension,
          "matrix data length " + std::to_string(data.size()) + " != " + std::to_string(rows) + "x" +
              std::to_string(cols));
  require(all_finite(data), ErrorKind::kNumeric, "matrix contains non-finite entries");
  Matrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.data_ = std::move(data);
  return m;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Vector softmax(std::span<const double> v) {
  require(!v.empty(), ErrorKind::kDimension, "softmax of empty vector");
  require(all_finite(v), ErrorKind::kNumeric, "softmax input is not finite");
  const double mx = *std::max_element(v.begin(), v.end());
  Vector out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

double l2_distance_sq(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::kDimension,
          "l2_distance_sq length mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::kDimension, "dot length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void adam_step(std::span<double> param, std::span<const double> grad, AdamState& state) {
  require(param.size() == grad.size() && state.m.size() == param.size() && state.v.size() == param.size(),
          ErrorKind::kDimension, "adam_step shape mismatch");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    param[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

}  // namespace protohead
