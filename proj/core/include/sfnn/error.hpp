#pragma once

#include <stdexcept>
#include <string>

namespace sfnn {

// Every failure raised by the library derives from Error. The category decides
// how the command-line front end maps it to an exit status.
enum class ErrorCategory { Data, Numeric, Training, Usage };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), category_(category), kind_(std::move(kind)) {}

  ErrorCategory category() const noexcept { return category_; }
  const std::string& kind() const noexcept { return kind_; }

 private:
  ErrorCategory category_;
  std::string kind_;
};

#define SFNN_DEFINE_ERROR(Name, Category)                                   \
  class Name : public Error {                                               \
   public:                                                                  \
    explicit Name(const std::string& what) : Error(Category, #Name, what) {} \
  }

// numerics
SFNN_DEFINE_ERROR(DimensionMismatch, ErrorCategory::Numeric);
SFNN_DEFINE_ERROR(RankDeficient, ErrorCategory::Numeric);
SFNN_DEFINE_ERROR(NotPositiveDefinite, ErrorCategory::Numeric);
SFNN_DEFINE_ERROR(NoConvergence, ErrorCategory::Numeric);

// data
SFNN_DEFINE_ERROR(ParseError, ErrorCategory::Data);
SFNN_DEFINE_ERROR(EmptyFile, ErrorCategory::Data);
SFNN_DEFINE_ERROR(RaggedRows, ErrorCategory::Data);
SFNN_DEFINE_ERROR(DegenerateSeries, ErrorCategory::Data);
SFNN_DEFINE_ERROR(TooShort, ErrorCategory::Data);
SFNN_DEFINE_ERROR(InvalidSplit, ErrorCategory::Data);
SFNN_DEFINE_ERROR(SingleSeries, ErrorCategory::Data);
SFNN_DEFINE_ERROR(IoError, ErrorCategory::Data);

// model / training
SFNN_DEFINE_ERROR(InvalidConfig, ErrorCategory::Usage);
SFNN_DEFINE_ERROR(ShapeMismatch, ErrorCategory::Numeric);
SFNN_DEFINE_ERROR(TraceMismatch, ErrorCategory::Numeric);
SFNN_DEFINE_ERROR(NonFiniteLoss, ErrorCategory::Training);
SFNN_DEFINE_ERROR(CheckpointError, ErrorCategory::Data);

// protocol / diagnostics
SFNN_DEFINE_ERROR(UnknownDataset, ErrorCategory::Usage);
SFNN_DEFINE_ERROR(NoTrials, ErrorCategory::Data);
SFNN_DEFINE_ERROR(MissingCell, ErrorCategory::Data);
SFNN_DEFINE_ERROR(OutOfTable, ErrorCategory::Numeric);

// A cell that is present but does not parse as a decimal real.
class NonNumericCell : public ParseError {
 public:
  using ParseError::ParseError;
};

#undef SFNN_DEFINE_ERROR

}  // namespace sfnn
