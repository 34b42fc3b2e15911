#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = wdiff::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::path("cli-test") / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

const std::string kPower1 = R"({"kind":"power","alpha":1,"dim":3})";

}  // namespace

TEST_CASE("check-weight reports a pass for an A2 power weight") {
  const auto dir = fresh_dir("a2");
  const auto r = run({"check-weight", "--weight", kPower1, "--condition", "a2", "--n-balls", "40", "--out-dir", dir.string()});
  CHECK(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["pass"] == true);
  CHECK(j["result"]["worst_ratio"].get<double>() >= 1.0);
  CHECK(fs::exists(dir / "check-weight.json"));
}

TEST_CASE("check-weight fails outside the A2 range") {
  const auto r = run({"check-weight", "--weight", R"({"kind":"power","alpha":3.5,"dim":3})", "--condition", "a2",
                      "--n-balls", "40", "--out-dir", fresh_dir("a2-bad").string(), "--quiet"});
  CHECK(r.code == 1);
}

TEST_CASE("malformed input exits with the input code and a pointer") {
  const auto r = run({"check-weight", "--weight", R"({"kind":"power","alpha":"x","dim":3})", "--condition", "a2",
                      "--out-dir", fresh_dir("bad").string()});
  CHECK(r.code == 2);
  const json e = json::parse(r.err);
  CHECK(e["error"] == "input");
  CHECK(e["pointer"] == "/alpha");

  CHECK(run({"check-weight", "--weight", "{nope", "--condition", "a2"}).code == 2);
  CHECK(run({"simulate", "--no-such-flag"}).code == 2);
  CHECK(run({"verify-moments", "--alpha", "1", "--d", "3", "--x0", "1,zero,0"}).code == 2);
  CHECK(run({"potentials", "resolvent", "--alpha", "0", "--d", "3", "--x", "1,0,0", "--y", "1,0,0"}).code == 2);
}

TEST_CASE("verify-moments writes the report, manifest and tidy table") {
  const auto dir = fresh_dir("moments");
  const auto r = run({"verify-moments", "--alpha", "1", "--d", "3", "--n", "2000", "--t", "1", "--dt", "1e-2",
                      "--out-dir", dir.string(), "--quiet"});
  CHECK(r.code == 0);
  CHECK(r.out.empty());
  const json report = json::parse(slurp(dir / "verify-moments.json"));
  CHECK(report["pass"] == true);
  CHECK(report.dump().find("timestamp") == std::string::npos);

  const json manifest = json::parse(slurp(dir / "verify-moments.manifest.json"));
  for (const char* key : {"command", "args", "inputs", "run_id", "seed", "spec_hash", "timestamp", "versions"})
    CHECK(manifest.contains(key));
  CHECK(manifest["run_id"].get<std::string>().rfind("verify-moments-", 0) == 0);
  CHECK(manifest["versions"].contains("eigen"));

  const std::string csv = slurp(dir / "verify-moments.csv");
  CHECK(csv.rfind("run_id,t,statistic,value,se\n", 0) == 0);
  CHECK(csv.find("mean_sq_norm") != std::string::npos);

  for (const auto& entry : fs::directory_iterator(dir)) CHECK(entry.path().extension() != ".tmp");
}

TEST_CASE("reports are byte-identical across thread counts") {
  std::vector<std::string> reports;
  for (const char* threads : {"1", "3"}) {
    const auto dir = fresh_dir(std::string("threads-") + threads);
    const auto r = run({"simulate", "--field", R"({"kind":"isotropic_power","alpha":0.5,"dim":3})", "--n", "300", "--t",
                        "0.5", "--dt", "1e-2", "--seed", "5", "--threads", threads, "--out-dir", dir.string(), "--quiet"});
    REQUIRE(r.code == 0);
    reports.push_back(slurp(dir / "simulate.json"));
  }
  CHECK(reports[0] == reports[1]);
}

TEST_CASE("simulate writes long-format paths on request") {
  const auto dir = fresh_dir("paths");
  const auto csv = dir / "paths.csv";
  const auto r = run({"simulate", "--field", R"({"kind":"isotropic_power","alpha":0,"dim":2})", "--n", "3", "--t", "0.1",
                      "--dt", "5e-2", "--record-stride", "1", "--paths-csv", csv.string(), "--out-dir", dir.string(), "--quiet"});
  REQUIRE(r.code == 0);
  const std::string text = slurp(csv);
  CHECK(text.rfind("run_id,path,t,component,value\n", 0) == 0);
  // 3 paths, 3 recorded times (0, 0.05, 0.1) and 2 components.
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 3 * 3 * 2);
}

TEST_CASE("oracle and potential queries") {
  const auto dir = fresh_dir("oracle").string();
  const auto mean = run({"oracle", "besq-mean", "--d", "3", "--alpha", "1", "--x0", "1,0,0", "--t", "1", "--out-dir", dir});
  REQUIRE(mean.code == 0);
  CHECK(json::parse(mean.out)["mean_sq_norm"].get<double>() == doctest::Approx(5.0));

  const auto hits = run({"oracle", "hits-origin", "--d", "2", "--alpha", "-1", "--out-dir", dir});
  REQUIRE(hits.code == 0);
  CHECK(json::parse(hits.out).dump().find("true") != std::string::npos);

  const auto riesz = run({"potentials", "riesz", "--g", R"({"kind":"indicator_ball","center":[0,0,0],"radius":1})",
                          "--eta", "2", "--x", "0,0,0", "--out-dir", dir});
  REQUIRE(riesz.code == 0);
  CHECK(riesz.out.find("6.28") != std::string::npos);
}

TEST_CASE("version and help") {
  const auto v = run({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find('.') != std::string::npos);
  CHECK(run({"--help"}).code == 0);
  CHECK(run({}).code == 2);
}
