#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ace/core.hpp"

namespace ace {

/// Per-timestep argmax (ties to the lowest index), collapse repeats, drop blanks.
Labels greedy_decode(const ProbGrid& probs);
std::string greedy_decode(const ProbGrid& probs, const Alphabet& alphabet);

std::size_t edit_distance(std::span<const int> a, std::span<const int> b);

/// Levenshtein distance divided by max(1, |reference|).
double cer(std::span<const int> prediction, std::span<const int> reference);
bool sequence_match(std::span<const int> prediction, std::span<const int> reference);
/// True iff both sequences contain every class the same number of times.
bool count_match(std::span<const int> prediction, std::span<const int> reference);

/// Counting estimate per non-blank class: the aggregated probability,
/// clamped below at zero and rounded half away from zero. Entry k-1 holds
/// class k.
std::vector<std::int64_t> predicted_counts(const ProbGrid& probs);
/// Ground-truth counts per non-blank class, same layout.
std::vector<std::int64_t> class_counts(std::span<const int> labels, std::size_t num_classes);

struct CountingScores {
  std::vector<double> rmse;      ///< per class
  std::vector<double> rel_rmse;  ///< per class, errors weighted by 1/(c + 1)
  double m_rmse = 0.0;
  double m_rel_rmse = 0.0;
};

/// Rows are images, columns classes. Per-class RMSE and relRMSE averaged
/// without weights over classes.
CountingScores rmse_metrics(const std::vector<std::vector<std::int64_t>>& predicted,
                            const std::vector<std::vector<std::int64_t>>& truth);

/// Predicts, for every class, the most frequent count in `truth`
/// (smallest count on ties).
std::vector<std::int64_t> modal_counts(const std::vector<std::vector<std::int64_t>>& truth);

}  // namespace ace
