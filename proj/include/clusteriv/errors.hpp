#pragma once

#include <stdexcept>
#include <string>

namespace clusteriv {

// Base class for all errors raised by the library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};

struct RankDeficient : Error {
  explicit RankDeficient(const std::string& msg) : Error(msg) {}
};

// The instrument-treatment cross moment is numerically zero: the IV ratio
// estimator is undefined.
struct WeakIdentification : Error {
  explicit WeakIdentification(const std::string& msg) : Error(msg) {}
};

struct DegenerateInstrument : Error {
  explicit DegenerateInstrument(const std::string& msg) : Error(msg) {}
};

// The instrument (or treatment) is constant within every cluster, so the
// fixed-effects specification is undefined.
struct DegenerateWithinVariation : Error {
  explicit DegenerateWithinVariation(const std::string& msg) : Error(msg) {}
};

struct ClusterConstantCovariate : Error {
  explicit ClusterConstantCovariate(const std::string& msg) : Error(msg) {}
};

struct NonPositiveSeDiff : Error {
  explicit NonPositiveSeDiff(const std::string& msg) : Error(msg) {}
};

struct TooFewValidReplicates : Error {
  explicit TooFewValidReplicates(const std::string& msg) : Error(msg) {}
};

struct AllZeroWeights : Error {
  explicit AllZeroWeights(const std::string& msg) : Error(msg) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& msg) : Error(msg) {}
};

struct NonBinaryColumn : Error {
  explicit NonBinaryColumn(const std::string& msg) : Error(msg) {}
};

struct MissingValue : Error {
  explicit MissingValue(const std::string& msg) : Error(msg) {}
};

}  // namespace clusteriv
