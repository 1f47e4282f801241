#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "matrix.hpp"

namespace entropyclust {

// UTC seconds since the Unix epoch.
using EpochSeconds = std::int64_t;

inline constexpr EpochSeconds kHalfHour = 1800;

// Accepts YYYY-MM-DD[T ]HH:MM[:SS][Z|+HH:MM|-HH:MM]. Throws Error(InvalidInput).
EpochSeconds parse_timestamp(std::string_view text);
// YYYY-MM-DDTHH:MM:SSZ
std::string format_timestamp(EpochSeconds t);

struct Reading {
  std::string consumer_id;
  EpochSeconds timestamp = 0;
  double kwh = 0.0;
};

struct RawReadings {
  std::vector<Reading> records;
};

struct ParseOptions {
  // Net-metered data may carry generation as negative consumption.
  bool allow_negative = false;
};

// Long format, header `consumer_id,timestamp,kwh`. Line numbers in errors are 1-based.
RawReadings parse_long_csv(std::istream& in, const ParseOptions& opts = {});

struct FeatureMatrix {
  Matrix values;  // M rows (time) by N columns (consumers)
  std::vector<EpochSeconds> time_index;
  std::vector<std::string> consumer_ids;
  bool allow_negative = false;

  std::size_t time_points() const noexcept { return values.rows(); }
  std::size_t consumers() const noexcept { return values.cols(); }
};

// Throws Error(InvalidInput) when shapes, time step or values break the invariants.
void validate(const FeatureMatrix& fm);

enum class FillPolicy { Strict, Hold };

FeatureMatrix align_and_pivot(const RawReadings& readings, EpochSeconds period = kHalfHour,
                              FillPolicy fill = FillPolicy::Strict);

// Wide format: `timestamp,<id>,<id>...`; values use shortest round-trip decimal text.
void write_wide_csv(std::ostream& out, const FeatureMatrix& fm);
FeatureMatrix read_wide_csv(std::istream& in, bool allow_negative = false);

struct PlantedSpec {
  int group_count = 4;
  int consumers_per_group = 50;
  int time_points = 1000;
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;
  // Fraction of each base profile's variance carried by the shared daily cycle.
  double shared_fraction = 0.3;
  EpochSeconds start = 1425859200;  // 2015-03-09T00:00:00Z
  EpochSeconds period = kHalfHour;
};

void validate(const PlantedSpec& spec);

struct PlantedData {
  FeatureMatrix matrix;
  std::vector<int> labels;  // group index per consumer column
};

PlantedData generate_planted(const PlantedSpec& spec);

// Sidecar JSON `{"labels": {consumer_id: group_index}}`.
std::string labels_json(const FeatureMatrix& fm, const std::vector<int>& labels);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace entropyclust
