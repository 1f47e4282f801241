#pragma once

#include <stdexcept>
#include <string>

namespace entropyclust {

enum class ErrorKind {
  MalformedLine,
  DuplicateReading,
  NonNumericValue,
  NegativeValue,
  MisalignedTimestamp,
  EmptyIntersection,
  MissingCell,
  InvalidConfig,
  DegenerateClustering,
  TooFewClusters,
  NoConvergence,
  InvalidInput,
  AllDegenerate,
  Io,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace entropyclust
