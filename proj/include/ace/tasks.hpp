#pragma once

// Synthetic recognition and counting tasks. Each timestep (or grid cell)
// carries a noisy class prototype, so a per-timestep classifier suffices and
// the loss is the only moving part.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ace/ace.hpp"
#include "ace/core.hpp"

namespace ace {

enum class TaskKind { kSeq1d, kGrid2d, kCount };
enum class Layout { kLines, kCurve, kRandom };

const char* to_string(TaskKind kind);
const char* to_string(Layout layout);
TaskKind parse_task_kind(const std::string& name);
Layout parse_layout(const std::string& name);

struct Placement {
  int label = 0;
  std::size_t row = 0;
  std::size_t col = 0;

  bool operator==(const Placement&) const = default;
};

/// One training example. Sequence samples have one feature row per timestep.
/// Grid samples store H*W cells in row-major order, keep their placements,
/// and list the annotation in flattened (column-major) reading order.
struct Sample {
  Matrix features;
  Labels annotation;
  std::optional<GridShape> grid;
  std::vector<Placement> placements;

  std::size_t timesteps() const noexcept { return features.rows(); }
  CountAnnotation counts(std::size_t num_classes) const {
    return counts_from_sequence(annotation, num_classes, timesteps());
  }
  bool operator==(const Sample&) const = default;
};

struct Dataset {
  TaskKind task = TaskKind::kSeq1d;
  Alphabet alphabet = Alphabet::digits();
  std::size_t feature_dim = 0;
  nlohmann::json params = nlohmann::json::object();
  std::vector<Sample> samples;
};

struct SequenceParams {
  std::uint64_t seed = 1;
  std::size_t count = 2000;
  std::size_t timesteps = 20;
  std::size_t min_len = 1;
  std::size_t max_len = 8;
  double noise_sigma = 0.0;
  /// 0 selects one-hot prototypes with D = K.
  std::size_t feature_dim = 0;
};

struct GridParams {
  std::uint64_t seed = 1;
  std::size_t count = 500;
  std::size_t height = 4;
  std::size_t width = 6;
  std::size_t min_objects = 0;
  std::size_t max_objects = 5;
  Layout layout = Layout::kRandom;
  double noise_sigma = 0.0;
  std::size_t feature_dim = 0;
};

struct ShuffleSpec {
  double ratio = 0.0;
};

/// Labels are uniform over non-blank classes, lengths uniform in
/// [min_len, max_len], positions ordered with a blank between adjacent
/// repeats whenever T allows it.
Dataset gen_sequences(const SequenceParams& params, const Alphabet& alphabet);

/// Object count uniform in [min_objects, max_objects], classes uniform over
/// non-blank classes, at most one object per cell.
Dataset gen_grids(const GridParams& params, const Alphabet& alphabet,
                  TaskKind task = TaskKind::kGrid2d);

/// Permutes the annotation order of round(ratio * N) samples picked by
/// `seed`. Features, placements and counts are untouched.
Dataset apply_shuffle(Dataset dataset, const ShuffleSpec& spec, std::uint64_t seed);

/// Class prototypes, K x D, shared by every dataset with the same (K, D).
/// Identity when D == K, otherwise fixed random sign vectors of unit norm.
Matrix make_prototypes(std::size_t num_classes, std::size_t feature_dim);

// Line-delimited JSON: a header object, then one object per sample.
inline constexpr const char* kDatasetSchema = "ace-dataset/1";

void write_dataset(std::ostream& out, const Dataset& dataset);
void write_dataset(const std::string& path, const Dataset& dataset);
Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::string& path);

}  // namespace ace
