#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "gconv/config.hpp"

namespace gconv {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitVerdict = 2;

const char* version();

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

struct RunResult {
  int exit_code = kExitError;
  std::vector<Verdict> verdicts;
  /// Files written, relative to the output directory (manifest excluded).
  std::vector<std::string> files;
  std::string error;
};

/// Runs the experiment and writes report.json, report.csv, plotdata/*.csv
/// and manifest.json under cfg.out_dir. Exit code 0 when every hard verdict
/// passes, 2 when one fails, 1 when the run could not complete.
RunResult execute(const RunConfig& cfg, std::ostream& log);

}  // namespace gconv
