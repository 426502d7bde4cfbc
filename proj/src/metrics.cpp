#include "ace/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ace/ace.hpp"
#include "ace/ctc.hpp"

namespace ace {

Labels greedy_decode(const ProbGrid& probs) {
  std::vector<int> path(probs.timesteps());
  for (std::size_t t = 0; t < probs.timesteps(); ++t) {
    const auto row = probs.row(t);
    // max_element returns the first maximum, i.e. the lowest index on ties.
    path[t] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return ctc_collapse(path);
}

std::string greedy_decode(const ProbGrid& probs, const Alphabet& alphabet) {
  return alphabet.format(greedy_decode(probs));
}

std::size_t edit_distance(std::span<const int> a, std::span<const int> b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] != b[j - 1]);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double cer(std::span<const int> prediction, std::span<const int> reference) {
  return static_cast<double>(edit_distance(prediction, reference)) /
         static_cast<double>(std::max<std::size_t>(1, reference.size()));
}

bool sequence_match(std::span<const int> prediction, std::span<const int> reference) {
  return std::equal(prediction.begin(), prediction.end(), reference.begin(), reference.end());
}

bool count_match(std::span<const int> prediction, std::span<const int> reference) {
  if (prediction.size() != reference.size()) return false;
  std::vector<int> a(prediction.begin(), prediction.end());
  std::vector<int> b(reference.begin(), reference.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

std::vector<std::int64_t> predicted_counts(const ProbGrid& probs) {
  const Aggregate agg = aggregate(probs);
  std::vector<std::int64_t> out;
  out.reserve(probs.classes() - 1);
  for (std::size_t k = 1; k < probs.classes(); ++k) {
    // std::llround rounds halfway cases away from zero.
    out.push_back(std::llround(std::max(0.0, agg.totals[k])));
  }
  return out;
}

std::vector<std::int64_t> class_counts(std::span<const int> labels, std::size_t num_classes) {
  std::vector<std::int64_t> out(num_classes - 1, 0);
  for (int label : labels) {
    if (label <= Alphabet::kBlank || static_cast<std::size_t>(label) >= num_classes) {
      throw VocabularyError("label " + std::to_string(label) + " not a non-blank class");
    }
    ++out[static_cast<std::size_t>(label - 1)];
  }
  return out;
}

CountingScores rmse_metrics(const std::vector<std::vector<std::int64_t>>& predicted,
                            const std::vector<std::vector<std::int64_t>>& truth) {
  if (predicted.empty() || truth.empty()) throw InvalidInputError("rmse_metrics: empty dataset");
  if (predicted.size() != truth.size()) {
    throw InvalidInputError("rmse_metrics: predicted and true counts differ in image count");
  }
  const std::size_t classes = truth.front().size();
  if (classes == 0) throw InvalidInputError("rmse_metrics: no classes");
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i].size() != classes || truth[i].size() != classes) {
      throw InvalidInputError("rmse_metrics: ragged count rows");
    }
  }

  CountingScores scores;
  scores.rmse.assign(classes, 0.0);
  scores.rel_rmse.assign(classes, 0.0);
  const double n = static_cast<double>(truth.size());
  for (std::size_t k = 0; k < classes; ++k) {
    double sq = 0.0;
    double rel = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const double diff = static_cast<double>(predicted[i][k] - truth[i][k]);
      sq += diff * diff;
      rel += diff * diff / (static_cast<double>(truth[i][k]) + 1.0);
    }
    scores.rmse[k] = std::sqrt(sq / n);
    scores.rel_rmse[k] = std::sqrt(rel / n);
    scores.m_rmse += scores.rmse[k];
    scores.m_rel_rmse += scores.rel_rmse[k];
  }
  scores.m_rmse /= static_cast<double>(classes);
  scores.m_rel_rmse /= static_cast<double>(classes);
  return scores;
}

std::vector<std::int64_t> modal_counts(const std::vector<std::vector<std::int64_t>>& truth) {
  if (truth.empty()) throw InvalidInputError("modal_counts: empty dataset");
  std::vector<std::int64_t> out(truth.front().size(), 0);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::map<std::int64_t, std::size_t> freq;
    for (const auto& row : truth) ++freq[row.at(k)];
    std::size_t best = 0;
    for (auto [count, n] : freq) {
      if (n > best) {
        best = n;
        out[k] = count;
      }
    }
  }
  return out;
}

}  // namespace ace
