#include "artifacts.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <system_error>

#ifndef WDIFF_VERSION
#define WDIFF_VERSION "unknown"
#endif

namespace wdiff::cli {

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp-" + fnv1a_hex(path.string() + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw std::runtime_error("short write to " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

std::filesystem::path resolve_out_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("WDIFF_OUT_DIR"); env && *env) return env;
  return "wdiff-out";
}

namespace {

std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

std::string tidy_csv(const std::string& run_id, const std::vector<TidyRow>& rows) {
  std::ostringstream os;
  os << "run_id,t,statistic,value,se\n";
  for (const auto& r : rows)
    os << run_id << ',' << csv_number(r.t) << ',' << r.statistic << ',' << csv_number(r.value) << ','
       << csv_number(r.se) << '\n';
  return os.str();
}

std::string RunArtifacts::spec_hash() const { return fnv1a_hex(command + '\n' + inputs.dump()); }

std::string RunArtifacts::run_id() const { return command + "-" + spec_hash().substr(0, 8); }

json RunArtifacts::manifest() const {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream ts;
  ts << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return {{"command", command},
          {"args", args},
          {"inputs", inputs},
          {"spec_hash", spec_hash()},
          {"run_id", run_id()},
          {"seed", seed},
          {"versions",
           {{"wdiff", WDIFF_VERSION},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"boost", BOOST_LIB_VERSION},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
          {"timestamp", ts.str()}};
}

void write_run(const std::filesystem::path& dir, const RunArtifacts& run, const json& report,
               const std::vector<TidyRow>& rows) {
  write_atomic(dir / (run.command + ".json"), report.dump(2) + "\n");
  write_atomic(dir / (run.command + ".manifest.json"), run.manifest().dump(2) + "\n");
  if (!rows.empty()) write_atomic(dir / (run.command + ".csv"), tidy_csv(run.run_id(), rows));
}

}  // namespace wdiff::cli
