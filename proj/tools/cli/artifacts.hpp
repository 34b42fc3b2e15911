#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace wdiff::cli {

using json = nlohmann::json;

/// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

/// Write `content` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never observe a partial file.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// Output directory: the explicit flag when given, else $WDIFF_OUT_DIR, else
/// "wdiff-out" under the working directory.
std::filesystem::path resolve_out_dir(const std::string& flag);

/// One row of the long-format CSV every command emits.
struct TidyRow {
  double t = 0.0;
  std::string statistic;
  double value = 0.0;
  double se = 0.0;  ///< NaN when the statistic has no standard error
};

std::string tidy_csv(const std::string& run_id, const std::vector<TidyRow>& rows);

/// Artifacts of one command invocation.
struct RunArtifacts {
  std::string command;
  std::vector<std::string> args;
  json inputs;  ///< parsed inputs that determine the result
  std::uint64_t seed = 0;

  std::string spec_hash() const;
  std::string run_id() const;
  json manifest() const;
};

/// Writes <dir>/<command>.json, <dir>/<command>.manifest.json and, when rows
/// are present, <dir>/<command>.csv.
void write_run(const std::filesystem::path& dir, const RunArtifacts& run, const json& report,
               const std::vector<TidyRow>& rows);

}  // namespace wdiff::cli
