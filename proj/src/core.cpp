#include "ace/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ace {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid input";
    case ErrorKind::kVocabulary: return "vocabulary error";
    case ErrorKind::kCapacity: return "capacity error";
    case ErrorKind::kSize: return "size error";
    case ErrorKind::kTrainingFailure: return "training failure";
    case ErrorKind::kIo: return "i/o error";
  }
  return "error";
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw InvalidInputError("matrix data has " + std::to_string(data_.size()) +
                            " entries, expected " + std::to_string(rows * cols));
  }
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// Alphabet

Alphabet::Alphabet(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  if (symbols_.size() < 2) {
    throw InvalidInputError("alphabet needs the blank plus at least one class");
  }
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    const auto& s = symbols_[i];
    if (s.empty()) throw InvalidInputError("empty symbol at index " + std::to_string(i));
    if (s.find(' ') != std::string::npos) {
      throw InvalidInputError("symbol '" + s + "' contains a space");
    }
    if (!index_.emplace(s, static_cast<int>(i)).second) {
      throw InvalidInputError("duplicate symbol '" + s + "'");
    }
    if (i != kBlank && s.size() != 1) single_char_ = false;
  }
}

Alphabet Alphabet::with_blank(const std::vector<std::string>& characters, std::string blank) {
  std::vector<std::string> symbols;
  symbols.reserve(characters.size() + 1);
  symbols.push_back(std::move(blank));
  symbols.insert(symbols.end(), characters.begin(), characters.end());
  return Alphabet(std::move(symbols));
}

Alphabet Alphabet::digits() {
  std::vector<std::string> chars;
  for (char c = '0'; c <= '9'; ++c) chars.emplace_back(1, c);
  return with_blank(chars);
}

Alphabet Alphabet::numbered(std::size_t count) {
  std::vector<std::string> chars;
  chars.reserve(count);
  for (std::size_t i = 0; i < count; ++i) chars.push_back("c" + std::to_string(i));
  return with_blank(chars);
}

const std::string& Alphabet::symbol(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= symbols_.size()) {
    throw VocabularyError("class index " + std::to_string(index) + " out of range");
  }
  return symbols_[static_cast<std::size_t>(index)];
}

int Alphabet::index_of(std::string_view symbol) const {
  auto it = index_.find(std::string(symbol));
  if (it == index_.end()) throw VocabularyError("unknown symbol '" + std::string(symbol) + "'");
  return it->second;
}

Labels Alphabet::parse(std::string_view annotation) const {
  Labels labels;
  auto push = [&](std::string_view token) {
    int index = index_of(token);
    if (index == kBlank) {
      throw VocabularyError("annotation contains the blank symbol '" + std::string(token) + "'");
    }
    labels.push_back(index);
  };
  if (single_char_) {
    for (std::size_t i = 0; i < annotation.size(); ++i) push(annotation.substr(i, 1));
    return labels;
  }
  std::size_t pos = 0;
  while (pos < annotation.size()) {
    if (annotation[pos] == ' ') {
      ++pos;
      continue;
    }
    std::size_t end = annotation.find(' ', pos);
    if (end == std::string_view::npos) end = annotation.size();
    push(annotation.substr(pos, end - pos));
    pos = end;
  }
  return labels;
}

std::string Alphabet::format(std::span<const int> labels) const {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!single_char_ && i > 0) out.push_back(' ');
    out += symbol(labels[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grids

namespace {

void check_shape(const std::optional<GridShape>& shape, std::size_t rows) {
  if (!shape) return;
  if (shape->height < 1 || shape->width < 1) {
    throw InvalidInputError("grid shape must have positive height and width");
  }
  if (shape->cells() != rows) {
    throw InvalidInputError("grid shape " + std::to_string(shape->height) + "x" +
                            std::to_string(shape->width) + " does not match " +
                            std::to_string(rows) + " timesteps");
  }
}

}  // namespace

LogitGrid::LogitGrid(Matrix v, std::optional<GridShape> s) : values(std::move(v)), shape(s) {
  check_shape(shape, values.rows());
  if (!all_finite(values.data())) throw InvalidInputError("logits contain non-finite values");
}

ProbGrid::ProbGrid(Matrix values, std::optional<GridShape> shape)
    : values_(std::move(values)), shape_(shape) {
  check_shape(shape_, values_.rows());
  for (std::size_t t = 0; t < values_.rows(); ++t) {
    double sum = 0.0;
    for (double p : values_.row(t)) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw InvalidInputError("probability outside [0, 1] in row " + std::to_string(t));
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw InvalidInputError("row " + std::to_string(t) + " sums to " + std::to_string(sum));
    }
  }
}

ProbGrid softmax(const LogitGrid& logits) {
  const Matrix& a = logits.values;
  if (!all_finite(a.data())) throw InvalidInputError("logits contain non-finite values");
  Matrix y(a.rows(), a.cols());
  for (std::size_t t = 0; t < a.rows(); ++t) {
    auto in = a.row(t);
    auto out = y.row(t);
    const double peak = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t k = 0; k < in.size(); ++k) {
      out[k] = std::exp(in[k] - peak);
      z += out[k];
    }
    const double inv = 1.0 / z;
    for (double& v : out) v *= inv;
  }
  return ProbGrid(ProbGrid::Trusted{}, std::move(y), logits.shape);
}

void softmax_jacobian_apply(std::span<const double> probs_row, std::span<const double> upstream,
                            std::span<double> out) {
  if (probs_row.size() != upstream.size() || out.size() != probs_row.size()) {
    throw InvalidInputError("softmax_jacobian_apply: dimension mismatch");
  }
  const double dot = std::inner_product(upstream.begin(), upstream.end(), probs_row.begin(), 0.0);
  for (std::size_t j = 0; j < probs_row.size(); ++j) out[j] = probs_row[j] * (upstream[j] - dot);
}

std::vector<double> softmax_jacobian_apply(std::span<const double> probs_row,
                                           std::span<const double> upstream) {
  std::vector<double> out(probs_row.size());
  softmax_jacobian_apply(probs_row, upstream, out);
  return out;
}

Matrix flatten_rows(const Matrix& cells, const GridShape& shape) {
  check_shape(shape, cells.rows());
  Matrix flat(cells.rows(), cells.cols());
  for (std::size_t h = 0; h < shape.height; ++h) {
    for (std::size_t w = 0; w < shape.width; ++w) {
      auto src = cells.row(h * shape.width + w);
      std::copy(src.begin(), src.end(), flat.row(flat_index(shape, h, w)).begin());
    }
  }
  return flat;
}

Matrix unflatten_2d(const Matrix& flat, const GridShape& shape) {
  check_shape(shape, flat.rows());
  Matrix cells(flat.rows(), flat.cols());
  for (std::size_t h = 0; h < shape.height; ++h) {
    for (std::size_t w = 0; w < shape.width; ++w) {
      auto src = flat.row(flat_index(shape, h, w));
      std::copy(src.begin(), src.end(), cells.row(h * shape.width + w).begin());
    }
  }
  return cells;
}

ProbGrid flatten_2d(const ProbGrid& grid) {
  if (!grid.shape()) throw InvalidInputError("flatten_2d: grid has no 2D shape");
  return ProbGrid(ProbGrid::Trusted{}, flatten_rows(grid.values(), *grid.shape()));
}

}  // namespace ace
