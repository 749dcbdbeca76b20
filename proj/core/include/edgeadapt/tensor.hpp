#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "edgeadapt/error.hpp"

namespace edgeadapt {

/// Row-major dense matrix. Rows index the batch, columns the feature width.
template <typename Real>
struct BasicTensor2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Real> data;

  BasicTensor2() = default;
  BasicTensor2(std::size_t r, std::size_t c, Real fill = Real(0))
      : rows(r), cols(c), data(r * c, fill) {}
  BasicTensor2(std::size_t r, std::size_t c, std::vector<Real> values)
      : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != rows * cols) {
      throw ConfigError("tensor data length does not match rows x cols");
    }
  }

  Real& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  Real operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<Real> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const Real> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  bool all_finite() const {
    for (Real v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  template <typename Other>
  BasicTensor2<Other> cast() const {
    BasicTensor2<Other> out(rows, cols);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<Other>(data[i]);
    return out;
  }

  friend bool operator==(const BasicTensor2&, const BasicTensor2&) = default;
};

using Tensor2 = BasicTensor2<float>;

}  // namespace edgeadapt
