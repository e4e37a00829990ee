#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace ecgtf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A file did not parse in its declared format. Carries the byte offset
/// of the first offending byte (or the start of the offending line).
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch, int batch)
      : Error(what + " (epoch " + std::to_string(epoch) + ", batch " +
              std::to_string(batch) + ")"),
        epoch_(epoch),
        batch_(batch) {}

  int epoch() const noexcept { return epoch_; }
  int batch() const noexcept { return batch_; }

 private:
  int epoch_;
  int batch_;
};

/// An error raised inside a named pipeline stage; `kind` is the original
/// error class name.
class StageError : public Error {
 public:
  StageError(std::string stage, std::string kind, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)), kind_(std::move(kind)) {}

  const std::string& stage() const noexcept { return stage_; }
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string stage_;
  std::string kind_;
};

}  // namespace ecgtf
