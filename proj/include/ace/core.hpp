#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ace/error.hpp"

namespace ace {

/// Class indices of a label sequence. Never contains the blank index.
using Labels = std::vector<int>;

/// Dense row-major matrix of doubles. Rows are timesteps, columns classes
/// (or feature dimensions); each row is contiguous.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// 2D provenance of a prediction grid: `height * width` rows stored in
/// row-major cell order (row index h * width + w).
struct GridShape {
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t cells() const noexcept { return height * width; }
  bool operator==(const GridShape&) const = default;
};

/// Ordered class set with the blank label fixed at index 0.
class Alphabet {
 public:
  static constexpr int kBlank = 0;

  /// `symbols` includes the blank at position 0.
  explicit Alphabet(std::vector<std::string> symbols);

  /// Blank "_" followed by the given characters.
  static Alphabet with_blank(const std::vector<std::string>& characters, std::string blank = "_");
  /// Blank plus the ten digits "0".."9".
  static Alphabet digits();
  /// Blank plus `count` symbols named "c0", "c1", ...
  static Alphabet numbered(std::size_t count);

  std::size_t size() const noexcept { return symbols_.size(); }
  const std::vector<std::string>& symbols() const noexcept { return symbols_; }
  const std::string& symbol(int index) const;
  int index_of(std::string_view symbol) const;

  /// Annotations are written as plain strings when every symbol is a single
  /// byte, otherwise as space-separated tokens.
  bool single_char() const noexcept { return single_char_; }

  Labels parse(std::string_view annotation) const;
  std::string format(std::span<const int> labels) const;

  bool operator==(const Alphabet& other) const { return symbols_ == other.symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_;
  bool single_char_ = true;
};

/// Pre-softmax activations a_k^t, T x K.
struct LogitGrid {
  Matrix values;
  std::optional<GridShape> shape;

  LogitGrid() = default;
  explicit LogitGrid(Matrix values, std::optional<GridShape> shape = std::nullopt);

  std::size_t timesteps() const noexcept { return values.rows(); }
  std::size_t classes() const noexcept { return values.cols(); }
};

/// Row-stochastic probabilities y_k^t, T x K.
class ProbGrid {
 public:
  /// Tag for construction paths that establish the invariants themselves.
  struct Trusted {};

  ProbGrid() = default;
  /// Validates entries in [0, 1] and row sums within 1e-9.
  explicit ProbGrid(Matrix values, std::optional<GridShape> shape = std::nullopt);
  ProbGrid(Trusted, Matrix values, std::optional<GridShape> shape = std::nullopt)
      : values_(std::move(values)), shape_(shape) {}

  const Matrix& values() const noexcept { return values_; }
  const std::optional<GridShape>& shape() const noexcept { return shape_; }
  std::size_t timesteps() const noexcept { return values_.rows(); }
  std::size_t classes() const noexcept { return values_.cols(); }
  std::span<const double> row(std::size_t t) const { return values_.row(t); }
  double operator()(std::size_t t, std::size_t k) const { return values_(t, k); }

 private:
  Matrix values_;
  std::optional<GridShape> shape_;
};

/// Row-wise softmax, stabilized by subtracting each row's maximum.
ProbGrid softmax(const LogitGrid& logits);

/// v_j = sum_i upstream_i * y_i (delta_ij - y_j), evaluated as
/// y * (upstream - <upstream, y>).
std::vector<double> softmax_jacobian_apply(std::span<const double> probs_row,
                                           std::span<const double> upstream);
void softmax_jacobian_apply(std::span<const double> probs_row, std::span<const double> upstream,
                            std::span<double> out);

/// Row index of cell (h, w) after flattening: columns left to right, each
/// column top to bottom.
constexpr std::size_t flat_index(const GridShape& shape, std::size_t h, std::size_t w) {
  return w * shape.height + h;
}

/// Reorders a 2D grid (row-major cells) into the flattened 1D sequence.
ProbGrid flatten_2d(const ProbGrid& grid);
/// Reorders a flattened T x K matrix back into row-major cell order.
Matrix unflatten_2d(const Matrix& flat, const GridShape& shape);
/// Reorders row-major cells into flattened order; the Matrix-level kernel
/// behind flatten_2d, also used for feature grids.
Matrix flatten_rows(const Matrix& cells, const GridShape& shape);

bool all_finite(std::span<const double> values);

}  // namespace ace
