#pragma once

// Connectionist temporal classification, kept as the comparison baseline.

#include <cstddef>
#include <span>

#include "ace/ace.hpp"
#include "ace/core.hpp"

namespace ace {

/// A CTC label sequence and its blank-interleaved extension
/// (blank, l1, blank, l2, ..., blank).
class CtcTarget {
 public:
  explicit CtcTarget(Labels labels);

  const Labels& labels() const noexcept { return labels_; }
  const Labels& extended() const noexcept { return extended_; }

  /// Smallest T that admits an alignment: |S| plus one separating blank per
  /// adjacent repeat.
  std::size_t min_timesteps() const noexcept;

 private:
  Labels labels_;
  Labels extended_;
};

/// -ln P(S | y) over all alignments. Forward and backward variables are kept
/// in log space; the gradient is formed per timestep in probability space
/// from the alpha*beta products and pushed through the softmax Jacobian.
/// A grid that assigns zero probability to every alignment yields +inf loss
/// and a zero gradient.
LossGrad ctc_loss(const ProbGrid& probs, const CtcTarget& target);
double ctc_loss_into(const ProbGrid& probs, const CtcTarget& target, Matrix& grad_logits);

/// -ln P(S | y) by enumerating all K^T paths; guarded to T <= 8 and K <= 8.
double ctc_brute_force(const ProbGrid& probs, const CtcTarget& target);

/// Scratch bytes ctc_loss allocates per sample: emission, alpha and beta
/// tables of T x (2|S|+1) plus two K-vectors for the per-step gradient.
constexpr std::size_t ctc_workspace_bytes(std::size_t timesteps, std::size_t label_length,
                                          std::size_t num_classes) {
  return 3 * timesteps * (2 * label_length + 1) * sizeof(double) +
         2 * num_classes * sizeof(double);
}

/// Collapses repeats, then drops blanks.
Labels ctc_collapse(std::span<const int> path);

}  // namespace ace
