#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace xtr {

// Non-owning view over `rows` contiguous row-major vectors of width `dim`.
struct TokenView {
  std::span<const float> data;
  std::size_t rows = 0;
  std::size_t dim = 0;

  std::span<const float> row(std::size_t i) const {
    assert(i < rows);
    return data.subspan(i * dim, dim);
  }
  TokenView slice(std::size_t first, std::size_t count) const {
    assert(first + count <= rows);
    return {data.subspan(first * dim, count * dim), count, dim};
  }
};

// Validated token embeddings. Construction enforces: rows >= 1, dim >= 1,
// data.size() == rows * dim, all values finite, and unit row norms (within
// kNormTolerance) when `normalized` is set.
class TokenMatrix {
 public:
  static constexpr double kNormTolerance = 1e-4;

  TokenMatrix(std::size_t rows, std::size_t dim, std::vector<float> data,
              bool normalized = false);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }
  bool normalized() const noexcept { return normalized_; }
  std::span<const float> data() const noexcept { return data_; }
  std::span<const float> row(std::size_t i) const {
    return view().row(i);
  }
  TokenView view() const noexcept { return {data_, rows_, dim_}; }
  operator TokenView() const noexcept { return view(); }

  friend bool operator==(const TokenMatrix&, const TokenMatrix&) = default;

 private:
  std::size_t rows_;
  std::size_t dim_;
  std::vector<float> data_;
  bool normalized_;
};

// Unit-normalizes each row in place (zero rows are left untouched).
void normalize_rows(std::vector<float>& data, std::size_t dim);

// Small dense row-major matrix used for affinities, masks and gradients.
template <typename T>
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }
  std::span<T> row(std::size_t i) { return std::span<T>(data_).subspan(i * cols_, cols_); }
  std::span<const T> row(std::size_t i) const {
    return std::span<const T>(data_).subspan(i * cols_, cols_);
  }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

}  // namespace xtr
