#pragma once

#include <stdexcept>
#include <string>

namespace ace {

/// Category of a library failure. The CLI maps these onto exit codes.
enum class ErrorKind {
  kInvalidInput,
  kVocabulary,
  kCapacity,
  kSize,
  kTrainingFailure,
  kIo,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct InvalidInputError : Error {
  explicit InvalidInputError(const std::string& what) : Error(ErrorKind::kInvalidInput, what) {}
};

struct VocabularyError : Error {
  explicit VocabularyError(const std::string& what) : Error(ErrorKind::kVocabulary, what) {}
};

struct CapacityError : Error {
  explicit CapacityError(const std::string& what) : Error(ErrorKind::kCapacity, what) {}
};

struct SizeError : Error {
  explicit SizeError(const std::string& what) : Error(ErrorKind::kSize, what) {}
};

struct TrainingFailure : Error {
  TrainingFailure(int epoch, const std::string& what)
      : Error(ErrorKind::kTrainingFailure, "epoch " + std::to_string(epoch) + ": " + what),
        epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

}  // namespace ace
