#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ace/core.hpp"

namespace ace {

/// Per-timestep classifier: logits = x W + b, optionally through one tanh
/// hidden layer first. The same weights are applied at every timestep, so
/// grid samples are classified cell by cell.
struct ToyModel {
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  std::size_t hidden_units = 0;  ///< 0 means no hidden layer

  Matrix hidden_weights;             ///< D x H
  std::vector<double> hidden_bias;   ///< H
  Matrix weights;                    ///< (H or D) x K
  std::vector<double> bias;          ///< K

  static ToyModel zeros(std::size_t input_dim, std::size_t num_classes,
                        std::size_t hidden_units = 0);
  /// Uniform(-scale, scale) weights with scale = 1/sqrt(fan_in), zero biases.
  static ToyModel random(std::size_t input_dim, std::size_t num_classes,
                         std::size_t hidden_units, std::uint64_t seed);

  /// Every trainable parameter in a fixed order, for SGD and gradient checks.
  std::vector<std::span<double>> parameters();
  std::vector<std::span<const double>> parameters() const;
  std::size_t parameter_count() const;

  bool operator==(const ToyModel&) const = default;
};

/// Activations kept from the forward pass.
struct ForwardCache {
  Matrix hidden;  ///< T x H post-tanh; empty without a hidden layer
};

LogitGrid forward(const ToyModel& model, const Matrix& features,
                  const std::optional<GridShape>& shape = std::nullopt,
                  ForwardCache* cache = nullptr);

/// Adds dL/dtheta for one sample into `grad` (shaped like `model`).
void backward(const ToyModel& model, const Matrix& features, const ForwardCache& cache,
              const Matrix& grad_logits, ToyModel& grad);

// Checkpoint: JSON with "format" set to kModelFormat, the three sizes, and
// parameter arrays in row-major order.
inline constexpr const char* kModelFormat = "ace-toymodel/1";

void save_model(std::ostream& out, const ToyModel& model);
void save_model(const std::string& path, const ToyModel& model);
ToyModel load_model(std::istream& in);
ToyModel load_model(const std::string& path);

}  // namespace ace
