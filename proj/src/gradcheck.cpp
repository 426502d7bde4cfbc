#include "ace/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ace/ctc.hpp"

#if defined(ACE_HAVE_QUADMATH)
#include <quadmath.h>
#endif

namespace ace::gradcheck {

namespace {

#if defined(ACE_HAVE_QUADMATH)
using Wide = __float128;
Wide wexp(Wide x) { return expq(x); }
Wide wlog(Wide x) { return logq(x); }
Wide wtanh(Wide x) { return tanhq(x); }
#else
using Wide = long double;
Wide wexp(Wide x) { return std::exp(x); }
Wide wlog(Wide x) { return std::log(x); }
Wide wtanh(Wide x) { return std::tanh(x); }
#endif

using WideVec = std::vector<Wide>;

WideVec widen(std::span<const double> v) { return WideVec(v.begin(), v.end()); }

// Row-wise softmax of a T x K block, in place.
void wide_softmax(WideVec& a, std::size_t steps, std::size_t classes) {
  for (std::size_t t = 0; t < steps; ++t) {
    Wide* row = a.data() + t * classes;
    Wide peak = row[0];
    for (std::size_t k = 1; k < classes; ++k) peak = std::max(peak, row[k]);
    Wide z = 0;
    for (std::size_t k = 0; k < classes; ++k) {
      row[k] = wexp(row[k] - peak);
      z += row[k];
    }
    for (std::size_t k = 0; k < classes; ++k) row[k] /= z;
  }
}

Wide ce_from_totals(const WideVec& totals, std::span<const std::int64_t> counts,
                    std::size_t steps) {
  const Wide t = static_cast<Wide>(steps);
  Wide loss = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) continue;
    Wide ybar = totals[k] / t;
    if (ybar < static_cast<Wide>(kLogClamp)) ybar = static_cast<Wide>(kLogClamp);
    loss -= static_cast<Wide>(counts[k]) / t * wlog(ybar);
  }
  return loss;
}

Wide regression_from_totals(const WideVec& totals, std::span<const std::int64_t> counts) {
  Wide loss = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const Wide d = static_cast<Wide>(counts[k]) - totals[k];
    loss += d * d / 2;
  }
  return loss;
}

WideVec column_totals(const WideVec& probs, std::size_t steps, std::size_t classes) {
  WideVec totals(classes, 0);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t k = 0; k < classes; ++k) totals[k] += probs[t * classes + k];
  }
  return totals;
}

// P(S | y) by the textbook forward recursion in probability space.
Wide ctc_probability(const WideVec& probs, std::size_t steps, std::size_t classes,
                     std::span<const int> labels) {
  std::vector<int> ext{0};
  for (int l : labels) {
    ext.push_back(l);
    ext.push_back(0);
  }
  const std::size_t u = ext.size();
  WideVec alpha(u, 0), next(u, 0);
  alpha[0] = probs[static_cast<std::size_t>(ext[0])];
  if (u > 1) alpha[1] = probs[static_cast<std::size_t>(ext[1])];
  for (std::size_t t = 1; t < steps; ++t) {
    for (std::size_t s = 0; s < u; ++s) {
      Wide acc = alpha[s];
      if (s >= 1) acc += alpha[s - 1];
      if (s >= 2 && ext[s] != 0 && ext[s] != ext[s - 2]) acc += alpha[s - 2];
      next[s] = acc * probs[t * classes + static_cast<std::size_t>(ext[s])];
    }
    std::swap(alpha, next);
  }
  return alpha[u - 1] + (u > 1 ? alpha[u - 2] : Wide(0));
}

Wide wide_ctc_loss(const WideVec& probs, std::size_t steps, std::size_t classes,
                   std::span<const int> labels) {
  return -wlog(ctc_probability(probs, steps, classes, labels));
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  return scale == 0.0 ? 0.0 : std::abs(analytic - numeric) / scale;
}

bool entry_ok(double analytic, double numeric, const Tolerance& tol) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < tol.tiny) return std::abs(analytic - numeric) < tol.tiny;
  return relative_error(analytic, numeric) < tol.rel;
}

double reference_ace_ce(const Matrix& logits, const CountAnnotation& ann) {
  WideVec p = widen(logits.data());
  wide_softmax(p, logits.rows(), logits.cols());
  return static_cast<double>(
      ce_from_totals(column_totals(p, logits.rows(), logits.cols()), ann.counts(), logits.rows()));
}

double reference_ace_regression(const Matrix& logits, const CountAnnotation& ann) {
  WideVec p = widen(logits.data());
  wide_softmax(p, logits.rows(), logits.cols());
  return static_cast<double>(
      regression_from_totals(column_totals(p, logits.rows(), logits.cols()), ann.counts()));
}

double reference_ctc(const Matrix& logits, std::span<const int> labels) {
  WideVec p = widen(logits.data());
  wide_softmax(p, logits.rows(), logits.cols());
  return static_cast<double>(wide_ctc_loss(p, logits.rows(), logits.cols(), labels));
}

namespace {

// Shared driver for the ACE variants: perturbing a_k^t only moves row t, so
// the aggregate is updated from cached row exponentials instead of being
// recomputed.
template <class LossOfTotals>
Matrix numeric_grad_aggregate(const Matrix& logits, double h, LossOfTotals&& loss_of) {
  const std::size_t steps = logits.rows();
  const std::size_t classes = logits.cols();
  const Wide step = static_cast<Wide>(h);

  WideVec e(steps * classes);
  WideVec z(steps, 0);
  WideVec peak(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    auto row = logits.row(t);
    peak[t] = static_cast<Wide>(*std::max_element(row.begin(), row.end()));
    for (std::size_t k = 0; k < classes; ++k) {
      e[t * classes + k] = wexp(static_cast<Wide>(row[k]) - peak[t]);
      z[t] += e[t * classes + k];
    }
  }
  WideVec probs(steps * classes);
  for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = e[i] / z[i / classes];
  const WideVec base = column_totals(probs, steps, classes);

  Matrix grad(steps, classes);
  WideVec totals(classes);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t k = 0; k < classes; ++k) {
      Wide value[2];
      for (int side = 0; side < 2; ++side) {
        const Wide shifted = static_cast<Wide>(logits(t, k)) + (side == 0 ? step : -step);
        const Wide ek = wexp(shifted - peak[t]);
        const Wide zt = z[t] - e[t * classes + k] + ek;
        for (std::size_t j = 0; j < classes; ++j) {
          const Wide ej = j == k ? ek : e[t * classes + j];
          totals[j] = base[j] - probs[t * classes + j] + ej / zt;
        }
        value[side] = loss_of(totals);
      }
      grad(t, k) = static_cast<double>((value[0] - value[1]) / (2 * step));
    }
  }
  return grad;
}

}  // namespace

Matrix numeric_grad_ace_ce(const Matrix& logits, const CountAnnotation& ann, double h) {
  const auto counts = ann.counts();
  const std::size_t steps = logits.rows();
  return numeric_grad_aggregate(
      logits, h, [&](const WideVec& totals) { return ce_from_totals(totals, counts, steps); });
}

Matrix numeric_grad_ace_regression(const Matrix& logits, const CountAnnotation& ann, double h) {
  const auto counts = ann.counts();
  return numeric_grad_aggregate(
      logits, h, [&](const WideVec& totals) { return regression_from_totals(totals, counts); });
}

Matrix numeric_grad_ctc(const Matrix& logits, std::span<const int> labels, double h) {
  const std::size_t steps = logits.rows();
  const std::size_t classes = logits.cols();
  const Wide step = static_cast<Wide>(h);
  WideVec probs = widen(logits.data());
  wide_softmax(probs, steps, classes);

  Matrix grad(steps, classes);
  WideVec row(classes);
  for (std::size_t t = 0; t < steps; ++t) {
    const WideVec saved(probs.begin() + static_cast<std::ptrdiff_t>(t * classes),
                        probs.begin() + static_cast<std::ptrdiff_t>((t + 1) * classes));
    for (std::size_t k = 0; k < classes; ++k) {
      Wide value[2];
      for (int side = 0; side < 2; ++side) {
        for (std::size_t j = 0; j < classes; ++j) row[j] = static_cast<Wide>(logits(t, j));
        row[k] += side == 0 ? step : -step;
        wide_softmax(row, 1, classes);
        std::copy(row.begin(), row.end(), probs.begin() + static_cast<std::ptrdiff_t>(t * classes));
        value[side] = wide_ctc_loss(probs, steps, classes, labels);
      }
      grad(t, k) = static_cast<double>((value[0] - value[1]) / (2 * step));
    }
    std::copy(saved.begin(), saved.end(), probs.begin() + static_cast<std::ptrdiff_t>(t * classes));
  }
  return grad;
}

Instance random_instance(std::mt19937_64& rng, std::size_t t_min, std::size_t t_max,
                         std::size_t k_min, std::size_t k_max, bool ctc_feasible) {
  Instance inst;
  const std::size_t steps = std::uniform_int_distribution<std::size_t>(t_min, t_max)(rng);
  const std::size_t classes = std::uniform_int_distribution<std::size_t>(k_min, k_max)(rng);
  std::uniform_real_distribution<double> logit(-3.0, 3.0);
  inst.logits = Matrix(steps, classes);
  for (double& v : inst.logits.data()) v = logit(rng);

  std::uniform_int_distribution<int> label(1, static_cast<int>(classes) - 1);
  while (true) {
    const std::size_t len = std::uniform_int_distribution<std::size_t>(0, steps)(rng);
    inst.labels.clear();
    for (std::size_t i = 0; i < len; ++i) inst.labels.push_back(label(rng));
    if (!ctc_feasible || CtcTarget(inst.labels).min_timesteps() <= steps) break;
  }
  return inst;
}

Comparison compare(const Matrix& analytic, const Matrix& numeric, const Tolerance& tol) {
  if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols()) {
    throw InvalidInputError("gradient shapes differ");
  }
  Comparison c;
  const auto a = analytic.data();
  const auto n = numeric.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++c.entries;
    const double scale = std::max(std::abs(a[i]), std::abs(n[i]));
    if (scale < tol.tiny) {
      c.max_abs_tiny = std::max(c.max_abs_tiny, std::abs(a[i] - n[i]));
    } else {
      c.max_rel_error = std::max(c.max_rel_error, relative_error(a[i], n[i]));
    }
    if (!entry_ok(a[i], n[i], tol)) ++c.failures;
  }
  return c;
}

CheckReport run_grad_check(LossVariant loss, const CheckOptions& opt) {
  CheckReport report;
  report.loss = loss;
  std::mt19937_64 rng(opt.seed);
  const bool is_ctc = loss == LossVariant::kCtc;
  // The probability-space CTC oracle costs O(T^2 K U) per instance; keep it small.
  const std::size_t t_max = is_ctc ? std::min<std::size_t>(opt.t_max, 12) : opt.t_max;
  const std::size_t k_max = is_ctc ? std::min<std::size_t>(opt.k_max, 12) : opt.k_max;

  for (std::size_t trial = 0; trial < opt.trials; ++trial) {
    const Instance inst = random_instance(rng, 1, t_max, 2, k_max, is_ctc);
    const ProbGrid probs = softmax(LogitGrid(inst.logits));
    Matrix analytic;
    Matrix numeric;
    if (is_ctc) {
      analytic = *ctc_loss(probs, CtcTarget(inst.labels)).grad_logits;
      numeric = numeric_grad_ctc(inst.logits, inst.labels);
    } else {
      const CountAnnotation ann =
          counts_from_sequence(inst.labels, inst.logits.cols(), inst.logits.rows());
      if (loss == LossVariant::kAceCe) {
        analytic = *ace_ce_loss(probs, ann).grad_logits;
        numeric = numeric_grad_ace_ce(inst.logits, ann);
      } else {
        analytic = *ace_regression_loss(probs, ann).grad_logits;
        numeric = numeric_grad_ace_regression(inst.logits, ann);
      }
    }
    if (opt.perturb != 0.0) analytic(0, 0) += opt.perturb;
    const Comparison c = compare(analytic, numeric, opt.tol);
    ++report.trials;
    if (c.failures > 0) ++report.failed_trials;
    report.max_rel_error = std::max(report.max_rel_error, c.max_rel_error);
    report.max_abs_tiny = std::max(report.max_abs_tiny, c.max_abs_tiny);
  }

  if (is_ctc) {
    for (std::size_t i = 0; i < 100; ++i) {
      Instance inst = random_instance(rng, 1, 6, 2, 5, true);
      if (inst.labels.size() > 3) inst.labels.resize(3);
      if (CtcTarget(inst.labels).min_timesteps() > inst.logits.rows()) continue;
      const ProbGrid probs = softmax(LogitGrid(inst.logits));
      const CtcTarget target(inst.labels);
      const double fb = ctc_loss(probs, target).loss;
      const double brute = ctc_brute_force(probs, target);
      ++report.oracle_cases;
      report.oracle_max_diff = std::max(report.oracle_max_diff, std::abs(fb - brute));
    }
    report.oracle_passed = report.oracle_max_diff <= 1e-10;
  }
  report.passed = report.failed_trials == 0 && report.oracle_passed;
  return report;
}

// ---------------------------------------------------------------------------
// Whole-model check

namespace {

struct WideModel {
  std::vector<WideVec> blocks;  // same order as ToyModel::parameters()
};

WideVec wide_affine(const WideVec& in, std::size_t rows, std::size_t in_dim, const WideVec& w,
                    const WideVec& b) {
  const std::size_t out_dim = b.size();
  WideVec out(rows * out_dim);
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t k = 0; k < out_dim; ++k) {
      Wide acc = b[k];
      for (std::size_t d = 0; d < in_dim; ++d) acc += in[t * in_dim + d] * w[d * out_dim + k];
      out[t * out_dim + k] = acc;
    }
  }
  return out;
}

Wide wide_sample_loss(const ToyModel& shape, const WideModel& m, const Sample& s,
                      LossVariant variant) {
  const std::size_t steps = s.features.rows();
  WideVec x = widen(s.features.data());
  WideVec logits;
  if (shape.hidden_units > 0) {
    WideVec h = wide_affine(x, steps, shape.input_dim, m.blocks[0], m.blocks[1]);
    for (Wide& v : h) v = wtanh(v);
    logits = wide_affine(h, steps, shape.hidden_units, m.blocks[2], m.blocks[3]);
  } else {
    logits = wide_affine(x, steps, shape.input_dim, m.blocks[0], m.blocks[1]);
  }
  const std::size_t classes = shape.num_classes;
  wide_softmax(logits, steps, classes);
  const CountAnnotation ann = s.counts(classes);
  switch (variant) {
    case LossVariant::kAceCe:
      return ce_from_totals(column_totals(logits, steps, classes), ann.counts(), steps);
    case LossVariant::kAceRegression:
      return regression_from_totals(column_totals(logits, steps, classes), ann.counts());
    case LossVariant::kCtc: {
      if (!s.grid) return wide_ctc_loss(logits, steps, classes, s.annotation);
      WideVec flat(logits.size());
      for (std::size_t h = 0; h < s.grid->height; ++h) {
        for (std::size_t w = 0; w < s.grid->width; ++w) {
          const std::size_t src = h * s.grid->width + w;
          const std::size_t dst = flat_index(*s.grid, h, w);
          std::copy_n(logits.begin() + static_cast<std::ptrdiff_t>(src * classes), classes,
                      flat.begin() + static_cast<std::ptrdiff_t>(dst * classes));
        }
      }
      return wide_ctc_loss(flat, steps, classes, s.annotation);
    }
  }
  return 0;
}

}  // namespace

Comparison check_model_gradient(const ToyModel& model, const Dataset& data,
                                std::span<const std::size_t> indices, LossVariant variant,
                                const Tolerance& tol, double h) {
  ToyModel analytic_grad;
  batch_loss_and_grad(model, data, indices, variant, analytic_grad);

  WideModel wide;
  for (auto block : model.parameters()) wide.blocks.push_back(widen(block));
  auto batch_loss = [&] {
    Wide total = 0;
    for (std::size_t i : indices) total += wide_sample_loss(model, wide, data.samples.at(i), variant);
    return total / static_cast<Wide>(indices.size());
  };

  std::vector<double> analytic;
  std::vector<double> numeric;
  const Wide step = static_cast<Wide>(h);
  const auto grads = analytic_grad.parameters();
  for (std::size_t b = 0; b < wide.blocks.size(); ++b) {
    for (std::size_t j = 0; j < wide.blocks[b].size(); ++j) {
      const Wide saved = wide.blocks[b][j];
      wide.blocks[b][j] = saved + step;
      const Wide up = batch_loss();
      wide.blocks[b][j] = saved - step;
      const Wide down = batch_loss();
      wide.blocks[b][j] = saved;
      numeric.push_back(static_cast<double>((up - down) / (2 * step)));
      analytic.push_back(grads[b][j]);
    }
  }
  return compare(Matrix(1, analytic.size(), analytic), Matrix(1, numeric.size(), numeric), tol);
}

}  // namespace ace::gradcheck
