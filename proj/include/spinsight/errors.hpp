#pragma once

#include <stdexcept>
#include <string>

namespace spinsight {

// Base class for every error raised by the library. The CLI maps the
// category to a process exit code.
class Error : public std::runtime_error {
 public:
  enum class Category { kUsage, kData, kNumerical };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const { return category_; }

 private:
  Category category_;
};

#define SPINSIGHT_DEFINE_ERROR(Name, Cat)                   \
  class Name : public Error {                               \
   public:                                                  \
    explicit Name(const std::string& what)                  \
        : Error(Category::Cat, #Name ": " + what) {}        \
  };

// geometry / physics
SPINSIGHT_DEFINE_ERROR(DegenerateDirection, kNumerical)
SPINSIGHT_DEFINE_ERROR(NotInContact, kNumerical)
// camera
SPINSIGHT_DEFINE_ERROR(BehindCamera, kNumerical)
SPINSIGHT_DEFINE_ERROR(SamplingExhausted, kNumerical)
SPINSIGHT_DEFINE_ERROR(DegenerateConfiguration, kNumerical)
SPINSIGHT_DEFINE_ERROR(CalibrationFailed, kNumerical)
// datagen / io
SPINSIGHT_DEFINE_ERROR(IoFailure, kData)
SPINSIGHT_DEFINE_ERROR(MissingFineTrack, kData)
// autograd / spt
SPINSIGHT_DEFINE_ERROR(ShapeMismatch, kNumerical)
SPINSIGHT_DEFINE_ERROR(GraphConsumed, kNumerical)
SPINSIGHT_DEFINE_ERROR(SequenceTooLong, kData)
SPINSIGHT_DEFINE_ERROR(NonFiniteLoss, kNumerical)
// eval
SPINSIGHT_DEFINE_ERROR(EmptySet, kData)
SPINSIGHT_DEFINE_ERROR(LengthMismatch, kData)
SPINSIGHT_DEFINE_ERROR(SingleClass, kData)
// config
SPINSIGHT_DEFINE_ERROR(UsageError, kUsage)

#undef SPINSIGHT_DEFINE_ERROR

// Parse errors carry the offending line (1-based, 0 if not line-oriented)
// and a JSON-pointer-like field path.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::string field, const std::string& what)
      : Error(Category::kData, "ParseError at line " + std::to_string(line) +
                                   (field.empty() ? "" : " field " + field) +
                                   ": " + what),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

}  // namespace spinsight
