#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "kws/dataset.hpp"
#include "kws/trainer.hpp"

namespace kws::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4 };

/// Every knob a command can take. Defaults are the reference training recipe.
struct RunConfig {
  std::string command;
  std::filesystem::path data_root;  // --data, else $KWS_DATA_ROOT
  std::string arch = "res15";
  std::string arch_explicit;  // --arch given to eval/predict/roc, checked against the checkpoint
  std::filesystem::path checkpoint;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "runs";
  std::size_t limit = 0;  // 0 keeps every sample
  TrainConfig train;
  AugmentationConfig augmentation;
};

/// (flag, default) for every tunable flag, rendered as the CLI prints it.
std::vector<std::pair<std::string, std::string>> defaults_table();

/// Runs one command line (without the program name). Machine-readable
/// results go to `out`, progress and errors to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kws::cli
