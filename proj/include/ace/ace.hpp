#pragma once

// Aggregation cross-entropy: supervises only the per-class counts of a label
// sequence by comparing them with the probabilities aggregated over time.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ace/core.hpp"

namespace ace {

/// Per-class target counts N_k over the blank-extended alphabet for a
/// prediction of `total_timesteps` steps. The blank absorbs T - |S|.
class CountAnnotation {
 public:
  CountAnnotation() = default;
  /// Throws unless every count is non-negative and they sum to T.
  CountAnnotation(std::vector<std::int64_t> counts, std::size_t total_timesteps);

  const std::vector<std::int64_t>& counts() const noexcept { return counts_; }
  std::size_t total_timesteps() const noexcept { return total_timesteps_; }
  std::size_t classes() const noexcept { return counts_.size(); }

  /// N_k / T, recomputed on every call.
  std::vector<double> normalized() const;
  /// The same class counts re-targeted to a different number of timesteps.
  CountAnnotation with_timesteps(std::size_t total_timesteps) const;

  bool operator==(const CountAnnotation&) const = default;

 private:
  std::vector<std::int64_t> counts_;
  std::size_t total_timesteps_ = 0;
};

CountAnnotation counts_from_sequence(std::span<const int> labels, std::size_t num_classes,
                                     std::size_t total_timesteps);
CountAnnotation counts_from_sequence(std::string_view annotation, const Alphabet& alphabet,
                                     std::size_t total_timesteps);

struct Aggregate {
  std::vector<double> totals;      ///< y_k = sum_t y_k^t
  std::vector<double> normalized;  ///< y_k / T
};

Aggregate aggregate(const ProbGrid& probs);

struct LossGrad {
  double loss = 0.0;
  std::optional<Matrix> grad_logits;  ///< dL/da_k^t
  std::optional<Matrix> grad_probs;   ///< dL/dy_k^t
};

/// Lower bound inside ln() for the normalized aggregate.
inline constexpr double kLogClamp = 1e-12;

/// Cross-entropy between the normalized counts and the normalized aggregate,
/// with the logit gradient in closed form:
///
///   dL/da_k^t = -(1/T) sum_k' Nbar_k' (y_k'^t / ybar_k') (delta_kk' - y_k^t)
///             = -(1/T) y_k^t (w_k - <w, y^t>),   w_k = Nbar_k / ybar_k
///
/// w is nonzero only for classes present in the annotation.
LossGrad ace_ce_loss(const ProbGrid& probs, const CountAnnotation& ann);

/// Same as ace_ce_loss but writes the logit gradient into a pre-sized T x K
/// matrix and returns the loss. Workspace is drawn from the default
/// std::pmr resource.
double ace_ce_loss_into(const ProbGrid& probs, const CountAnnotation& ann, Matrix& grad_logits);

/// 2D predictions: flattens, evaluates the 1D loss, and returns the logit
/// gradient in the grid's own row-major cell order.
LossGrad ace_ce_loss_2d(const ProbGrid& probs, const CountAnnotation& ann);

/// 0.5 * sum_k (N_k - y_k)^2. grad_probs rows all equal Delta = y - N;
/// grad_logits pushes Delta through the softmax Jacobian row by row.
LossGrad ace_regression_loss(const ProbGrid& probs, const CountAnnotation& ann);
double ace_regression_loss_into(const ProbGrid& probs, const CountAnnotation& ann,
                                Matrix& grad_logits);

enum class AceVariant { kRegression, kCrossEntropy };

/// Mean |dL/da| over all T x K entries.
double gradient_magnitude_profile(const ProbGrid& probs, const CountAnnotation& ann,
                                  AceVariant variant);

/// Scratch bytes ace_ce_loss allocates per sample: aggregate and weight
/// K-vectors plus the index list of annotated classes.
constexpr std::size_t ace_workspace_bytes(std::size_t num_classes, std::size_t active_classes) {
  return 2 * num_classes * sizeof(double) + active_classes * sizeof(std::size_t);
}

}  // namespace ace
