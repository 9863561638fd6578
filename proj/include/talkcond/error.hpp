#pragma once

#include <stdexcept>
#include <string>

namespace talkcond {

// Base of every error thrown by the library. `stage` names the pipeline step
// (corpus, features, train, ...) so the CLI can report where a run failed.
class Error : public std::runtime_error {
 public:
  Error(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

class CorpusError : public Error {
 public:
  explicit CorpusError(const std::string& what) : Error("corpus", what) {}
};

class FeatureError : public Error {
 public:
  explicit FeatureError(const std::string& what) : Error("features", what) {}
};

class ModelError : public Error {
 public:
  explicit ModelError(const std::string& what) : Error("model", what) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& what) : Error("train", what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error("format", what) {}
};

}  // namespace talkcond
