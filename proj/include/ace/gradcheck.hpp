#pragma once

// Finite-difference gradient checking. Reference losses here are written
// from their defining formulas in quad precision and share no code with the
// double-precision losses they check.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ace/ace.hpp"
#include "ace/core.hpp"
#include "ace/model.hpp"
#include "ace/train.hpp"

namespace ace::gradcheck {

struct Tolerance {
  double rel = 1e-6;
  /// Entries whose analytic and numeric magnitudes are both below this are
  /// compared with an absolute bound of the same size.
  double tiny = 1e-8;
};

/// |a - n| / max(|a|, |n|), or 0 when both are exactly zero.
double relative_error(double analytic, double numeric);
bool entry_ok(double analytic, double numeric, const Tolerance& tol);

/// Reference losses as functions of the logits (T x K, row-major).
double reference_ace_ce(const Matrix& logits, const CountAnnotation& ann);
double reference_ace_regression(const Matrix& logits, const CountAnnotation& ann);
/// Probability-space forward recursion.
double reference_ctc(const Matrix& logits, std::span<const int> labels);

/// Central differences dL/da with step h, evaluated in quad precision.
Matrix numeric_grad_ace_ce(const Matrix& logits, const CountAnnotation& ann, double h = 1e-6);
Matrix numeric_grad_ace_regression(const Matrix& logits, const CountAnnotation& ann,
                                   double h = 1e-6);
Matrix numeric_grad_ctc(const Matrix& logits, std::span<const int> labels, double h = 1e-6);

struct Instance {
  Matrix logits;
  Labels labels;
};

/// Logits uniform in [-3, 3]; T in [t_min, t_max], K in [k_min, k_max];
/// label sequence of random length in [0, max_len(T)].
Instance random_instance(std::mt19937_64& rng, std::size_t t_min, std::size_t t_max,
                         std::size_t k_min, std::size_t k_max, bool ctc_feasible = false);

struct Comparison {
  double max_rel_error = 0.0;  ///< over entries above the tiny threshold
  double max_abs_tiny = 0.0;   ///< over tiny entries
  std::size_t entries = 0;
  std::size_t failures = 0;
};

Comparison compare(const Matrix& analytic, const Matrix& numeric, const Tolerance& tol);

struct CheckReport {
  LossVariant loss = LossVariant::kAceCe;
  std::size_t trials = 0;
  std::size_t failed_trials = 0;
  double max_rel_error = 0.0;
  double max_abs_tiny = 0.0;
  /// CTC only: forward-backward loss against brute-force enumeration.
  std::size_t oracle_cases = 0;
  double oracle_max_diff = 0.0;
  bool oracle_passed = true;
  bool passed = false;
};

struct CheckOptions {
  std::size_t trials = 200;
  Tolerance tol;
  std::uint64_t seed = 1;
  std::size_t t_max = 30;
  std::size_t k_max = 100;
  /// Test hook: added to one analytic gradient entry of every trial.
  double perturb = 0.0;
};

CheckReport run_grad_check(LossVariant loss, const CheckOptions& options);

/// Whole-model check: mean batch loss under `variant` differentiated with
/// respect to every parameter by quad-precision central differences.
Comparison check_model_gradient(const ToyModel& model, const Dataset& data,
                                std::span<const std::size_t> indices, LossVariant variant,
                                const Tolerance& tol, double h = 1e-6);

}  // namespace ace::gradcheck
