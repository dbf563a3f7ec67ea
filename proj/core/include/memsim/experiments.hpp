#pragma once

#include <string>
#include <vector>

#include "memsim/config.hpp"
#include "memsim/csv.hpp"

namespace memsim {

inline constexpr const char* kVersion = "0.1.0";

struct ExperimentResult {
  std::vector<std::string> files;  // paths written, manifest last
  std::string summary;             // one-line human summary
};

// Runs the configured experiment and writes its CSV artifacts plus a
// manifest into config.out_dir. Identical config + seed produce byte
// identical CSVs.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Write `table` as <dir>/<basename>.csv, mirrored as a text table when
// format is "text" or "both".
std::vector<std::string> emit_report(const CsvWriter& table, const std::string& dir,
                                     const std::string& basename, const std::string& format);

std::string sha256_hex(const std::string& data);
std::string sha256_file_hex(const std::string& path);

}  // namespace memsim
