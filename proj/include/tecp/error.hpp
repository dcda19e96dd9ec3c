#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tecp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised while reading the line-delimited record format. `line` is 1-based;
// `path` is the offending field path ("candidates[1].token_entropies[0]"),
// empty when the whole line is malformed.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::string path, const std::string& message)
      : Error(format(line, path, message)), line_(line), path_(std::move(path)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& path() const noexcept { return path_; }

 private:
  static std::string format(std::size_t line, const std::string& path,
                            const std::string& message) {
    std::string out = "line " + std::to_string(line) + ": ";
    if (!path.empty()) out += path + ": ";
    return out + message;
  }

  std::size_t line_;
  std::string path_;
};

// A failure inside run_trial, labelled with the pipeline stage that raised it.
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const std::string& message)
      : Error("stage " + stage + ": " + message), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace tecp
