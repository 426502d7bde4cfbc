#include "ace/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace ace {

using nlohmann::json;

const char* to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kSeq1d: return "seq1d";
    case TaskKind::kGrid2d: return "grid2d";
    case TaskKind::kCount: return "count";
  }
  return "?";
}

const char* to_string(Layout layout) {
  switch (layout) {
    case Layout::kLines: return "lines";
    case Layout::kCurve: return "curve";
    case Layout::kRandom: return "random";
  }
  return "?";
}

TaskKind parse_task_kind(const std::string& name) {
  if (name == "seq1d") return TaskKind::kSeq1d;
  if (name == "grid2d") return TaskKind::kGrid2d;
  if (name == "count") return TaskKind::kCount;
  throw InvalidInputError("unknown task '" + name + "'");
}

Layout parse_layout(const std::string& name) {
  if (name == "lines") return Layout::kLines;
  if (name == "curve") return Layout::kCurve;
  if (name == "random") return Layout::kRandom;
  throw InvalidInputError("unknown layout '" + name + "'");
}

namespace {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Sorted sample of `n` distinct values from [0, range).
std::vector<std::size_t> sorted_sample(std::mt19937_64& rng, std::size_t range, std::size_t n) {
  std::vector<std::size_t> pool(range);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < n; ++i) std::swap(pool[i], pool[uniform_index(rng, i, range - 1)]);
  pool.resize(n);
  std::sort(pool.begin(), pool.end());
  return pool;
}

void emit_feature(std::span<double> out, std::span<const double> prototype, double sigma,
                  std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, sigma);
  for (std::size_t d = 0; d < out.size(); ++d) {
    out[d] = prototype[d] + (sigma > 0.0 ? noise(rng) : 0.0);
  }
}

std::size_t resolve_dim(std::size_t requested, const Alphabet& alphabet) {
  return requested == 0 ? alphabet.size() : requested;
}

}  // namespace

Matrix make_prototypes(std::size_t num_classes, std::size_t feature_dim) {
  Matrix protos(num_classes, feature_dim);
  if (feature_dim == num_classes) {
    for (std::size_t k = 0; k < num_classes; ++k) protos(k, k) = 1.0;
    return protos;
  }
  auto rng = make_rng(0x70726f746fULL, num_classes * 1000003ULL + feature_dim);
  std::bernoulli_distribution coin(0.5);
  const double scale = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  for (double& v : protos.data()) v = coin(rng) ? scale : -scale;
  return protos;
}

Dataset gen_sequences(const SequenceParams& p, const Alphabet& alphabet) {
  if (p.max_len > p.timesteps) {
    throw CapacityError("max_len " + std::to_string(p.max_len) + " exceeds " +
                        std::to_string(p.timesteps) + " timesteps");
  }
  if (p.min_len > p.max_len) throw InvalidInputError("min_len exceeds max_len");
  if (p.timesteps == 0) throw InvalidInputError("timesteps must be positive");
  if (p.noise_sigma < 0.0) throw InvalidInputError("noise_sigma must be non-negative");

  Dataset ds;
  ds.task = TaskKind::kSeq1d;
  ds.alphabet = alphabet;
  ds.feature_dim = resolve_dim(p.feature_dim, alphabet);
  ds.params = {{"seed", p.seed},           {"count", p.count},
               {"timesteps", p.timesteps}, {"min_len", p.min_len},
               {"max_len", p.max_len},     {"noise_sigma", p.noise_sigma},
               {"feature_dim", ds.feature_dim}};
  const Matrix protos = make_prototypes(alphabet.size(), ds.feature_dim);

  auto rng = make_rng(p.seed, 1);
  const std::size_t num_chars = alphabet.size() - 1;
  ds.samples.reserve(p.count);
  for (std::size_t i = 0; i < p.count; ++i) {
    Sample s;
    const std::size_t len = uniform_index(rng, p.min_len, p.max_len);
    for (std::size_t j = 0; j < len; ++j) {
      s.annotation.push_back(static_cast<int>(1 + uniform_index(rng, 0, num_chars - 1)));
    }
    std::size_t repeats = 0;
    for (std::size_t j = 1; j < len; ++j) repeats += s.annotation[j] == s.annotation[j - 1];
    const bool separate = len + repeats <= p.timesteps;
    const std::size_t reserved = separate ? repeats : 0;

    // Positions drawn in a compressed range, then spread so each adjacent
    // repeat gets its own blank.
    std::vector<int> path(p.timesteps, Alphabet::kBlank);
    const auto slots = sorted_sample(rng, p.timesteps - reserved, len);
    std::size_t shift = 0;
    for (std::size_t j = 0; j < len; ++j) {
      if (separate && j > 0 && s.annotation[j] == s.annotation[j - 1]) ++shift;
      path[slots[j] + shift] = s.annotation[j];
    }

    s.features = Matrix(p.timesteps, ds.feature_dim);
    for (std::size_t t = 0; t < p.timesteps; ++t) {
      emit_feature(s.features.row(t), protos.row(static_cast<std::size_t>(path[t])),
                   p.noise_sigma, rng);
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

namespace {

std::vector<std::pair<std::size_t, std::size_t>> place_random(std::mt19937_64& rng,
                                                              const GridParams& p,
                                                              std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t c : sorted_sample(rng, p.height * p.width, n)) {
    cells.emplace_back(c / p.width, c % p.width);
  }
  return cells;
}

// Runs of consecutive cells inside rows; each used row holds one run.
std::vector<std::pair<std::size_t, std::size_t>> place_lines(std::mt19937_64& rng,
                                                             const GridParams& p,
                                                             std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  if (n == 0) return cells;
  const std::size_t min_lines = (n + p.width - 1) / p.width;
  const std::size_t lines = uniform_index(rng, min_lines, std::min(p.height, n));
  // Split n into `lines` parts, each in [1, width].
  std::vector<std::size_t> lengths(lines, 1);
  std::size_t left = n - lines;
  while (left > 0) {
    const std::size_t i = uniform_index(rng, 0, lines - 1);
    if (lengths[i] < p.width) {
      ++lengths[i];
      --left;
    }
  }
  const auto rows = sorted_sample(rng, p.height, lines);
  for (std::size_t i = 0; i < lines; ++i) {
    const std::size_t start = uniform_index(rng, 0, p.width - lengths[i]);
    for (std::size_t j = 0; j < lengths[i]; ++j) cells.emplace_back(rows[i], start + j);
  }
  return cells;
}

// One object per column along a sinusoid; further passes shift the phase and
// skip occupied cells.
std::vector<std::pair<std::size_t, std::size_t>> place_curve(std::mt19937_64& rng,
                                                             const GridParams& p,
                                                             std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  std::vector<bool> used(p.height * p.width, false);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double max_h = static_cast<double>(p.height - 1);
  while (cells.size() < n) {
    const double centre = unit(rng) * max_h;
    const double amplitude = unit(rng) * max_h / 2.0;
    const double phase = unit(rng) * 6.283185307179586;
    const double freq = 0.3 + unit(rng) * 0.5;
    const std::size_t start = uniform_index(rng, 0, p.width - 1);
    bool progressed = false;
    for (std::size_t j = 0; j < p.width && cells.size() < n; ++j) {
      const std::size_t w = (start + j) % p.width;
      const double h = centre + amplitude * std::sin(phase + freq * static_cast<double>(w));
      const auto row = static_cast<std::size_t>(std::clamp(std::lround(h), 0L,
                                                           static_cast<long>(p.height - 1)));
      if (used[row * p.width + w]) continue;
      used[row * p.width + w] = true;
      cells.emplace_back(row, w);
      progressed = true;
    }
    if (!progressed) {
      // Column runs into occupied rows; fall back to the first free cells.
      for (std::size_t c = 0; c < used.size() && cells.size() < n; ++c) {
        if (!used[c]) {
          used[c] = true;
          cells.emplace_back(c / p.width, c % p.width);
        }
      }
    }
  }
  return cells;
}

}  // namespace

Dataset gen_grids(const GridParams& p, const Alphabet& alphabet, TaskKind task) {
  if (p.height == 0 || p.width == 0) throw InvalidInputError("grid must be at least 1x1");
  if (p.max_objects > p.height * p.width) {
    throw CapacityError(std::to_string(p.max_objects) + " objects do not fit in a " +
                        std::to_string(p.height) + "x" + std::to_string(p.width) + " grid");
  }
  if (p.min_objects > p.max_objects) throw InvalidInputError("min_objects exceeds max_objects");
  if (p.noise_sigma < 0.0) throw InvalidInputError("noise_sigma must be non-negative");

  Dataset ds;
  ds.task = task;
  ds.alphabet = alphabet;
  ds.feature_dim = resolve_dim(p.feature_dim, alphabet);
  ds.params = {{"seed", p.seed},
               {"count", p.count},
               {"height", p.height},
               {"width", p.width},
               {"min_objects", p.min_objects},
               {"max_objects", p.max_objects},
               {"layout", to_string(p.layout)},
               {"noise_sigma", p.noise_sigma},
               {"feature_dim", ds.feature_dim}};
  const Matrix protos = make_prototypes(alphabet.size(), ds.feature_dim);
  const GridShape shape{p.height, p.width};

  auto rng = make_rng(p.seed, 2);
  const std::size_t num_chars = alphabet.size() - 1;
  ds.samples.reserve(p.count);
  for (std::size_t i = 0; i < p.count; ++i) {
    Sample s;
    s.grid = shape;
    const std::size_t n = uniform_index(rng, p.min_objects, p.max_objects);
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    switch (p.layout) {
      case Layout::kRandom: cells = place_random(rng, p, n); break;
      case Layout::kLines: cells = place_lines(rng, p, n); break;
      case Layout::kCurve: cells = place_curve(rng, p, n); break;
    }
    std::vector<int> cell_label(shape.cells(), Alphabet::kBlank);
    for (auto [h, w] : cells) {
      const int label = static_cast<int>(1 + uniform_index(rng, 0, num_chars - 1));
      s.placements.push_back({label, h, w});
      cell_label[h * p.width + w] = label;
    }
    std::vector<Placement> reading = s.placements;
    std::sort(reading.begin(), reading.end(), [&](const Placement& a, const Placement& b) {
      return flat_index(shape, a.row, a.col) < flat_index(shape, b.row, b.col);
    });
    for (const auto& pl : reading) s.annotation.push_back(pl.label);

    s.features = Matrix(shape.cells(), ds.feature_dim);
    for (std::size_t c = 0; c < shape.cells(); ++c) {
      emit_feature(s.features.row(c), protos.row(static_cast<std::size_t>(cell_label[c])),
                   p.noise_sigma, rng);
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

Dataset apply_shuffle(Dataset dataset, const ShuffleSpec& spec, std::uint64_t seed) {
  if (!(spec.ratio >= 0.0 && spec.ratio <= 1.0)) {
    throw InvalidInputError("shuffle ratio must lie in [0, 1]");
  }
  const std::size_t n = dataset.samples.size();
  const auto selected =
      static_cast<std::size_t>(std::llround(spec.ratio * static_cast<double>(n)));
  auto rng = make_rng(seed, 3);
  for (std::size_t i : sorted_sample(rng, n, selected)) {
    Labels& labels = dataset.samples[i].annotation;
    for (std::size_t j = labels.size(); j > 1; --j) {
      std::swap(labels[j - 1], labels[uniform_index(rng, 0, j - 1)]);
    }
  }
  return dataset;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json sample_to_json(const Sample& s, const Alphabet& alphabet) {
  json rec;
  if (s.grid) {
    json rows = json::array();
    for (std::size_t h = 0; h < s.grid->height; ++h) {
      json cols = json::array();
      for (std::size_t w = 0; w < s.grid->width; ++w) {
        auto r = s.features.row(h * s.grid->width + w);
        cols.push_back(std::vector<double>(r.begin(), r.end()));
      }
      rows.push_back(std::move(cols));
    }
    rec["features"] = std::move(rows);
  } else {
    json rows = json::array();
    for (std::size_t t = 0; t < s.features.rows(); ++t) {
      auto r = s.features.row(t);
      rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    rec["features"] = std::move(rows);
  }
  rec["annotation"] = alphabet.format(s.annotation);
  if (s.grid) {
    rec["shape"] = {s.grid->height, s.grid->width};
    json placements = json::array();
    for (const auto& p : s.placements) placements.push_back({p.label, p.row, p.col});
    rec["placements"] = std::move(placements);
  } else {
    rec["shape"] = {s.features.rows()};
  }
  return rec;
}

Sample sample_from_json(const json& rec, const Alphabet& alphabet, std::size_t dim) {
  Sample s;
  const auto& shape = rec.at("shape");
  std::vector<double> data;
  std::size_t rows = 0;
  if (shape.size() == 2) {
    s.grid = GridShape{shape[0].get<std::size_t>(), shape[1].get<std::size_t>()};
    for (const auto& line : rec.at("features")) {
      for (const auto& cell : line) {
        auto v = cell.get<std::vector<double>>();
        if (v.size() != dim) throw IoError("feature vector has wrong dimension");
        data.insert(data.end(), v.begin(), v.end());
        ++rows;
      }
    }
    if (rows != s.grid->cells()) throw IoError("grid features do not match shape");
    for (const auto& p : rec.value("placements", json::array())) {
      s.placements.push_back({p.at(0).get<int>(), p.at(1).get<std::size_t>(),
                              p.at(2).get<std::size_t>()});
    }
  } else if (shape.size() == 1) {
    for (const auto& line : rec.at("features")) {
      auto v = line.get<std::vector<double>>();
      if (v.size() != dim) throw IoError("feature vector has wrong dimension");
      data.insert(data.end(), v.begin(), v.end());
      ++rows;
    }
    if (rows != shape[0].get<std::size_t>()) throw IoError("features do not match shape");
  } else {
    throw IoError("shape must have one or two entries");
  }
  s.features = Matrix(rows, dim, std::move(data));
  s.annotation = alphabet.parse(rec.at("annotation").get<std::string>());
  if (s.annotation.size() > rows) throw CapacityError("annotation longer than its prediction");
  return s;
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& ds) {
  json header = {{"schema", kDatasetSchema},
                 {"task", to_string(ds.task)},
                 {"alphabet", ds.alphabet.symbols()},
                 {"feature_dim", ds.feature_dim},
                 {"count", ds.samples.size()},
                 {"params", ds.params}};
  out << header.dump() << '\n';
  for (const auto& s : ds.samples) out << sample_to_json(s, ds.alphabet).dump() << '\n';
}

void write_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_dataset(out, ds);
  if (!out) throw IoError("failed writing '" + path + "'");
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("dataset is empty");
  Dataset ds;
  try {
    const json header = json::parse(line);
    if (header.at("schema").get<std::string>() != kDatasetSchema) {
      throw IoError("unsupported dataset schema");
    }
    ds.task = parse_task_kind(header.at("task").get<std::string>());
    ds.alphabet = Alphabet(header.at("alphabet").get<std::vector<std::string>>());
    ds.feature_dim = header.at("feature_dim").get<std::size_t>();
    ds.params = header.value("params", json::object());
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      ds.samples.push_back(sample_from_json(json::parse(line), ds.alphabet, ds.feature_dim));
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed dataset: ") + e.what());
  }
  return ds;
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_dataset(in);
}

}  // namespace ace
