#include "ace/model.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

namespace ace {

using nlohmann::json;

ToyModel ToyModel::zeros(std::size_t input_dim, std::size_t num_classes,
                         std::size_t hidden_units) {
  if (input_dim == 0 || num_classes < 2) {
    throw InvalidInputError("model needs input_dim >= 1 and at least two classes");
  }
  ToyModel m;
  m.input_dim = input_dim;
  m.num_classes = num_classes;
  m.hidden_units = hidden_units;
  if (hidden_units > 0) {
    m.hidden_weights = Matrix(input_dim, hidden_units);
    m.hidden_bias.assign(hidden_units, 0.0);
  }
  m.weights = Matrix(hidden_units > 0 ? hidden_units : input_dim, num_classes);
  m.bias.assign(num_classes, 0.0);
  return m;
}

ToyModel ToyModel::random(std::size_t input_dim, std::size_t num_classes,
                          std::size_t hidden_units, std::uint64_t seed) {
  ToyModel m = zeros(input_dim, num_classes, hidden_units);
  std::mt19937_64 rng(seed);
  auto fill = [&rng](Matrix& w) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(w.rows()));
    std::uniform_real_distribution<double> u(-scale, scale);
    for (double& v : w.data()) v = u(rng);
  };
  if (hidden_units > 0) fill(m.hidden_weights);
  fill(m.weights);
  return m;
}

std::vector<std::span<double>> ToyModel::parameters() {
  std::vector<std::span<double>> out;
  if (hidden_units > 0) {
    out.emplace_back(hidden_weights.data());
    out.emplace_back(hidden_bias);
  }
  out.emplace_back(weights.data());
  out.emplace_back(bias);
  return out;
}

std::vector<std::span<const double>> ToyModel::parameters() const {
  std::vector<std::span<const double>> out;
  if (hidden_units > 0) {
    out.emplace_back(hidden_weights.data());
    out.emplace_back(hidden_bias);
  }
  out.emplace_back(weights.data());
  out.emplace_back(bias);
  return out;
}

std::size_t ToyModel::parameter_count() const {
  std::size_t n = 0;
  for (auto block : parameters()) n += block.size();
  return n;
}

namespace {

// out[t] = in[t] W + b
void affine(const Matrix& in, const Matrix& w, std::span<const double> b, Matrix& out) {
  for (std::size_t t = 0; t < in.rows(); ++t) {
    auto x = in.row(t);
    auto y = out.row(t);
    std::copy(b.begin(), b.end(), y.begin());
    for (std::size_t d = 0; d < x.size(); ++d) {
      const double xd = x[d];
      if (xd == 0.0) continue;
      auto wd = w.row(d);
      for (std::size_t k = 0; k < y.size(); ++k) y[k] += xd * wd[k];
    }
  }
}

// grad_w += in^T g, grad_b += column sums of g
void affine_grad(const Matrix& in, const Matrix& g, Matrix& grad_w, std::span<double> grad_b) {
  for (std::size_t t = 0; t < in.rows(); ++t) {
    auto x = in.row(t);
    auto gt = g.row(t);
    for (std::size_t k = 0; k < gt.size(); ++k) grad_b[k] += gt[k];
    for (std::size_t d = 0; d < x.size(); ++d) {
      const double xd = x[d];
      if (xd == 0.0) continue;
      auto gw = grad_w.row(d);
      for (std::size_t k = 0; k < gt.size(); ++k) gw[k] += xd * gt[k];
    }
  }
}

}  // namespace

LogitGrid forward(const ToyModel& model, const Matrix& features,
                  const std::optional<GridShape>& shape, ForwardCache* cache) {
  if (features.cols() != model.input_dim) {
    throw InvalidInputError("feature dimension " + std::to_string(features.cols()) +
                            " does not match model input " + std::to_string(model.input_dim));
  }
  Matrix logits(features.rows(), model.num_classes);
  if (model.hidden_units > 0) {
    Matrix hidden(features.rows(), model.hidden_units);
    affine(features, model.hidden_weights, model.hidden_bias, hidden);
    for (double& v : hidden.data()) v = std::tanh(v);
    affine(hidden, model.weights, model.bias, logits);
    if (cache) cache->hidden = std::move(hidden);
  } else {
    affine(features, model.weights, model.bias, logits);
  }
  return LogitGrid(std::move(logits), shape);
}

void backward(const ToyModel& model, const Matrix& features, const ForwardCache& cache,
              const Matrix& grad_logits, ToyModel& grad) {
  if (model.hidden_units == 0) {
    affine_grad(features, grad_logits, grad.weights, grad.bias);
    return;
  }
  affine_grad(cache.hidden, grad_logits, grad.weights, grad.bias);
  // dL/dz = (g W^T) * (1 - h^2)
  Matrix grad_hidden(features.rows(), model.hidden_units);
  for (std::size_t t = 0; t < features.rows(); ++t) {
    auto gt = grad_logits.row(t);
    auto h = cache.hidden.row(t);
    auto out = grad_hidden.row(t);
    for (std::size_t j = 0; j < model.hidden_units; ++j) {
      auto wj = model.weights.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < gt.size(); ++k) acc += gt[k] * wj[k];
      out[j] = acc * (1.0 - h[j] * h[j]);
    }
  }
  affine_grad(features, grad_hidden, grad.hidden_weights, grad.hidden_bias);
}

void save_model(std::ostream& out, const ToyModel& model) {
  json j = {{"format", kModelFormat},
            {"input_dim", model.input_dim},
            {"num_classes", model.num_classes},
            {"hidden_units", model.hidden_units}};
  auto data = [](const Matrix& m) {
    return std::vector<double>(m.data().begin(), m.data().end());
  };
  if (model.hidden_units > 0) {
    j["hidden_weights"] = data(model.hidden_weights);
    j["hidden_bias"] = model.hidden_bias;
  }
  j["weights"] = data(model.weights);
  j["bias"] = model.bias;
  out << j.dump() << '\n';
}

void save_model(const std::string& path, const ToyModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  save_model(out, model);
}

ToyModel load_model(std::istream& in) {
  try {
    json j;
    in >> j;
    if (j.at("format").get<std::string>() != kModelFormat) {
      throw IoError("unsupported model format");
    }
    ToyModel m = ToyModel::zeros(j.at("input_dim").get<std::size_t>(),
                                 j.at("num_classes").get<std::size_t>(),
                                 j.at("hidden_units").get<std::size_t>());
    auto load = [&j](const char* key, std::span<double> dst) {
      const auto v = j.at(key).get<std::vector<double>>();
      if (v.size() != dst.size()) throw IoError(std::string("parameter '") + key + "' has wrong size");
      std::copy(v.begin(), v.end(), dst.begin());
    };
    if (m.hidden_units > 0) {
      load("hidden_weights", m.hidden_weights.data());
      load("hidden_bias", m.hidden_bias);
    }
    load("weights", m.weights.data());
    load("bias", m.bias);
    return m;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed model checkpoint: ") + e.what());
  }
}

ToyModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return load_model(in);
}

}  // namespace ace
