#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ingest.hpp"
#include "sweep.hpp"

namespace entropyclust::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kDegenerate = 3, kIo = 4 };

struct PipelineConfig {
  std::optional<std::string> input;  // long CSV for `ingest`, wide matrix CSV elsewhere
  std::optional<PlantedSpec> synth;
  EpochSeconds period = kHalfHour;
  FillPolicy fill = FillPolicy::Strict;
  bool allow_negative = false;
  SweepConfig sweep;
  ReportOptions report;
  std::string out;
  std::uint64_t seed = 0;
  int threads = 0;
};

// Overlays the keys present in a JSON config document onto `config`.
// Throws Error(InvalidConfig) on unknown keys or wrong types.
void apply_json(PipelineConfig& config, const std::string& json_text);

// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace entropyclust::cli
