#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "ace/ace.hpp"
#include "ace/bench.hpp"
#include "ace/core.hpp"
#include "ace/ctc.hpp"
#include "ace/error.hpp"
#include "ace/metrics.hpp"

namespace py = pybind11;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

ace::Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw ace::InvalidInputError("expected a 2D array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  std::vector<double> data(a.data(), a.data() + rows * cols);
  return ace::Matrix(rows, cols, std::move(data));
}

Array to_array(const ace::Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::memcpy(out.mutable_data(), m.data().data(), m.size() * sizeof(double));
  return out;
}

std::optional<ace::GridShape> grid_shape(std::optional<std::pair<std::size_t, std::size_t>> hw) {
  if (!hw) return std::nullopt;
  return ace::GridShape{hw->first, hw->second};
}

ace::CountAnnotation annotation(const std::vector<std::int64_t>& counts, std::size_t timesteps) {
  return ace::CountAnnotation(counts, timesteps);
}

py::tuple loss_pair(const ace::LossGrad& lg) {
  return py::make_tuple(lg.loss, to_array(*lg.grad_logits));
}

py::dict scores_dict(const ace::CountingScores& s) {
  py::dict d;
  d["rmse"] = s.rmse;
  d["rel_rmse"] = s.rel_rmse;
  d["m_rmse"] = s.m_rmse;
  d["m_rel_rmse"] = s.m_rel_rmse;
  return d;
}

}  // namespace

PYBIND11_MODULE(_ace, m) {
  m.doc() = "Aggregation cross-entropy and CTC losses";

  auto base = py::register_exception<ace::Error>(m, "AceError", PyExc_ValueError);
  py::register_exception<ace::InvalidInputError>(m, "InvalidInputError", base);
  py::register_exception<ace::VocabularyError>(m, "VocabularyError", base);
  py::register_exception<ace::CapacityError>(m, "CapacityError", base);
  py::register_exception<ace::SizeError>(m, "SizeError", base);
  py::register_exception<ace::TrainingFailure>(m, "TrainingFailure", base);
  py::register_exception<ace::IoError>(m, "IoError", base);

  m.def(
      "softmax",
      [](const Array& logits) {
        return to_array(ace::softmax(ace::LogitGrid(to_matrix(logits))).values());
      },
      py::arg("logits"), "Row-wise softmax of a T x K logit array.");

  m.def(
      "counts_from_sequence",
      [](const std::vector<int>& labels, std::size_t num_classes, std::size_t timesteps) {
        return ace::counts_from_sequence(labels, num_classes, timesteps).counts();
      },
      py::arg("labels"), py::arg("num_classes"), py::arg("timesteps"),
      "Per-class counts over the blank-extended alphabet; blank takes T - len(labels).");

  m.def(
      "ace_ce_loss",
      [](const Array& probs, const std::vector<std::int64_t>& counts) {
        const ace::ProbGrid p(to_matrix(probs));
        return loss_pair(ace::ace_ce_loss(p, annotation(counts, p.timesteps())));
      },
      py::arg("probs"), py::arg("counts"), "(loss, dL/dlogits) of the cross-entropy ACE loss.");

  m.def(
      "ace_ce_loss_2d",
      [](const Array& probs, std::size_t height, std::size_t width,
         const std::vector<std::int64_t>& counts) {
        const ace::ProbGrid p(to_matrix(probs), ace::GridShape{height, width});
        return loss_pair(ace::ace_ce_loss_2d(p, annotation(counts, p.timesteps())));
      },
      py::arg("probs"), py::arg("height"), py::arg("width"), py::arg("counts"),
      "Cross-entropy ACE over an H*W x K grid stored in row-major cell order.");

  m.def(
      "ace_regression_loss",
      [](const Array& probs, const std::vector<std::int64_t>& counts) {
        const ace::ProbGrid p(to_matrix(probs));
        return loss_pair(ace::ace_regression_loss(p, annotation(counts, p.timesteps())));
      },
      py::arg("probs"), py::arg("counts"), "(loss, dL/dlogits) of the regression ACE loss.");

  m.def(
      "ctc_loss",
      [](const Array& probs, const std::vector<int>& labels) {
        return loss_pair(ace::ctc_loss(ace::ProbGrid(to_matrix(probs)), ace::CtcTarget(labels)));
      },
      py::arg("probs"), py::arg("labels"), "(negative log-likelihood, dL/dlogits) of CTC.");

  m.def(
      "flatten_2d",
      [](const Array& probs, std::size_t height, std::size_t width) {
        const ace::ProbGrid p(to_matrix(probs), grid_shape(std::pair{height, width}));
        return to_array(ace::flatten_2d(p).values());
      },
      py::arg("probs"), py::arg("height"), py::arg("width"),
      "Reorders cells column by column (index w * H + h).");

  m.def(
      "greedy_decode",
      [](const Array& probs) { return ace::greedy_decode(ace::ProbGrid(to_matrix(probs))); },
      py::arg("probs"));

  m.def(
      "cer",
      [](const std::vector<int>& prediction, const std::vector<int>& reference) {
        return ace::cer(prediction, reference);
      },
      py::arg("prediction"), py::arg("reference"));

  m.def(
      "rmse_metrics",
      [](const std::vector<std::vector<std::int64_t>>& predicted,
         const std::vector<std::vector<std::int64_t>>& truth) {
        return scores_dict(ace::rmse_metrics(predicted, truth));
      },
      py::arg("predicted"), py::arg("truth"), "Rows are images, columns classes.");

  m.def(
      "run_bench",
      [](std::size_t timesteps, std::size_t classes, std::size_t batch, std::size_t seq_len,
         std::size_t repeats, std::uint64_t seed) {
        ace::bench::BenchSpec spec;
        spec.timesteps = timesteps;
        spec.classes = classes;
        spec.batch = batch;
        spec.seq_len = seq_len;
        spec.repeats = repeats;
        spec.seed = seed;
        std::vector<ace::bench::BenchResult> results;
        {
          py::gil_scoped_release release;
          results = ace::bench::run_bench(spec);
        }
        py::list out;
        for (const auto& r : results) {
          py::dict d;
          d["loss"] = r.loss_name;
          d["median_ms"] = r.median_ms;
          d["aux_bytes"] = r.aux_bytes;
          d["measured_aux_bytes"] = r.measured_aux_bytes;
          d["params"] = r.params;
          out.append(d);
        }
        return out;
      },
      py::arg("timesteps") = 144, py::arg("classes") = 37, py::arg("batch") = 64,
      py::arg("seq_len") = 10, py::arg("repeats") = 9, py::arg("seed") = 1);
}
