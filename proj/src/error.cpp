#include "entropyclust/error.hpp"

namespace entropyclust {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedLine: return "MalformedLine";
    case ErrorKind::DuplicateReading: return "DuplicateReading";
    case ErrorKind::NonNumericValue: return "NonNumericValue";
    case ErrorKind::NegativeValue: return "NegativeValue";
    case ErrorKind::MisalignedTimestamp: return "MisalignedTimestamp";
    case ErrorKind::EmptyIntersection: return "EmptyIntersection";
    case ErrorKind::MissingCell: return "MissingCell";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::DegenerateClustering: return "DegenerateClustering";
    case ErrorKind::TooFewClusters: return "TooFewClusters";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::AllDegenerate: return "AllDegenerate";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace entropyclust
