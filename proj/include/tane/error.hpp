#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tane {

/// Base of every error the engine raises. Callers that only care about
/// "something went wrong" catch this; the subclasses name the failure.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define TANE_DEFINE_ERROR(Name)                 \
  class Name : public Error {                   \
   public:                                      \
    explicit Name(const std::string& what_arg)  \
        : Error(#Name ": " + what_arg) {}       \
  }

TANE_DEFINE_ERROR(InvalidInput);
TANE_DEFINE_ERROR(DegenerateVector);
TANE_DEFINE_ERROR(InvalidLabel);
TANE_DEFINE_ERROR(ShapeError);
TANE_DEFINE_ERROR(InvalidConfig);
TANE_DEFINE_ERROR(FormatError);
TANE_DEFINE_ERROR(MissingClass);
TANE_DEFINE_ERROR(EmptyMemory);
TANE_DEFINE_ERROR(InsufficientData);
TANE_DEFINE_ERROR(InvalidSplit);
TANE_DEFINE_ERROR(InvalidScoreKind);

#undef TANE_DEFINE_ERROR

/// Raised when a value stops being finite. Training attaches the episode
/// index so the caller can report where the run blew up.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what_arg)
      : Error("NumericalError: " + what_arg), detail_(what_arg) {}
  NumericalError(const std::string& what_arg, std::size_t episode)
      : Error("NumericalError: episode " + std::to_string(episode) + ": " + what_arg),
        detail_(what_arg),
        episode_(episode),
        has_episode_(true) {}

  bool has_episode() const { return has_episode_; }
  std::size_t episode() const { return episode_; }
  /// The message without the class prefix or episode.
  const std::string& detail() const { return detail_; }

 private:
  std::string detail_;
  std::size_t episode_ = 0;
  bool has_episode_ = false;
};

}  // namespace tane
