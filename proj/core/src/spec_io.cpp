#include "wdiff/spec_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>

#include "wdiff/errors.hpp"

namespace wdiff::io {

namespace {

const json& require(const json& j, const char* key, const std::string& ptr) {
  if (!j.is_object()) throw SpecError(ptr.empty() ? "/" : ptr, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SpecError(ptr + "/" + key, "missing required key");
  return *it;
}

double get_number(const json& j, const char* key, const std::string& ptr) {
  const json& v = require(j, key, ptr);
  if (!v.is_number()) throw SpecError(ptr + "/" + key, "expected a number");
  return v.get<double>();
}

double get_number_or(const json& j, const char* key, const std::string& ptr, double fallback) {
  if (!j.contains(key)) return fallback;
  return get_number(j, key, ptr);
}

int get_int(const json& j, const char* key, const std::string& ptr) {
  const json& v = require(j, key, ptr);
  if (!v.is_number_integer()) throw SpecError(ptr + "/" + key, "expected an integer");
  return v.get<int>();
}

std::string get_string(const json& j, const char* key, const std::string& ptr) {
  const json& v = require(j, key, ptr);
  if (!v.is_string()) throw SpecError(ptr + "/" + key, "expected a string");
  return v.get<std::string>();
}

Vec as_vec(const json& v, const std::string& ptr) {
  if (!v.is_array() || v.empty() || v.size() > static_cast<std::size_t>(kMaxDim))
    throw SpecError(ptr, "expected a non-empty array of at most " + std::to_string(kMaxDim) + " numbers");
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw SpecError(ptr + "/" + std::to_string(i), "expected a number");
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  }
  return out;
}

Vec get_vec(const json& j, const char* key, const std::string& ptr) {
  return as_vec(require(j, key, ptr), ptr + "/" + key);
}

int get_dim(const json& j, const std::string& ptr) {
  const int d = get_int(j, "dim", ptr);
  if (d < 2 || d > kMaxDim) throw SpecError(ptr + "/dim", "dimension must lie in [2, " + std::to_string(kMaxDim) + "]");
  return d;
}

// Re-raise constructor failures as SpecError at the given pointer.
template <class F>
auto guarded(const std::string& ptr, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const SpecError&) {
    throw;
  } catch (const std::exception& e) {
    throw SpecError(ptr.empty() ? "/" : ptr, e.what());
  }
}

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

std::map<std::string, FieldFactory>& registry() {
  static std::map<std::string, FieldFactory> r = [] {
    std::map<std::string, FieldFactory> init;
    // Radial anisotropy without an analytic divergence: exercises the
    // finite-difference fallback end to end.
    init["radial_anisotropic_fd"] = [] {
      const auto ref = DiffusionField::power_radial_anisotropic(3, 1.0, 0.5);
      return DiffusionField(3, [ref](const Vec& x) { return ref.matrix(x); }, std::nullopt, ref.weight(), ref.lambda(),
                            "radial_anisotropic_fd");
    };
    return init;
  }();
  return r;
}

}  // namespace

json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

// ---------------------------------------------------------------------------
// Parsers

ScalarField parse_scalar_field(const json& j, const std::string& ptr) {
  const std::string kind = get_string(j, "kind", ptr);
  return guarded(ptr, [&]() -> ScalarField {
    if (kind == "constant") return fields::constant(get_number(j, "c", ptr));
    if (kind == "linear") return fields::linear(get_vec(j, "v", ptr));
    if (kind == "log_norm") return fields::log_norm(get_number_or(j, "scale", ptr, 1.0));
    if (kind == "sine_ripple") return fields::sine_ripple(get_number(j, "amplitude", ptr), get_vec(j, "k", ptr));
    if (kind == "norm_power") return fields::norm_power(get_number(j, "alpha", ptr));
    throw SpecError(ptr + "/kind", "unknown scalar field kind '" + kind + "'");
  });
}

Weight parse_weight(const json& j, const std::string& ptr) {
  const std::string kind = get_string(j, "kind", ptr);
  if (kind == "power") {
    const int d = get_dim(j, ptr);
    const double alpha = get_number(j, "alpha", ptr);
    return guarded(ptr + "/alpha", [&] { return Weight::power(d, alpha); });
  }
  if (kind == "exponential") {
    const int d = get_dim(j, ptr);
    return Weight::exponential(d, parse_scalar_field(require(j, "phi", ptr), ptr + "/phi"));
  }
  if (kind == "product") {
    const ScalarField m = parse_scalar_field(require(j, "multiplier", ptr), ptr + "/multiplier");
    const double bound = get_number(j, "bound", ptr);
    Weight base = parse_weight(require(j, "base", ptr), ptr + "/base");
    return guarded(ptr + "/bound", [&] { return Weight::product(m, bound, base); });
  }
  if (kind == "custom") {
    const int d = get_dim(j, ptr);
    return Weight::custom(d, parse_scalar_field(require(j, "density", ptr), ptr + "/density"));
  }
  throw SpecError(ptr + "/kind", "unknown weight kind '" + kind + "'");
}

DiffusionField parse_field(const json& j, const std::string& ptr) {
  const std::string kind = get_string(j, "kind", ptr);
  if (kind == "isotropic_power") {
    const int d = get_dim(j, ptr);
    const double alpha = get_number(j, "alpha", ptr);
    return guarded(ptr + "/alpha", [&] { return DiffusionField::isotropic_power(d, alpha); });
  }
  if (kind == "power_times_const_spd") {
    const double alpha = get_number(j, "alpha", ptr);
    const json& rows = require(j, "matrix", ptr);
    if (!rows.is_array() || rows.size() < 2 || rows.size() > static_cast<std::size_t>(kMaxDim))
      throw SpecError(ptr + "/matrix", "expected a square array of rows");
    const auto n = static_cast<Eigen::Index>(rows.size());
    Mat m(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const std::string rp = ptr + "/matrix/" + std::to_string(r);
      const Vec row = as_vec(rows[static_cast<std::size_t>(r)], rp);
      if (row.size() != n) throw SpecError(rp, "row length does not match the number of rows");
      m.row(r) = row.transpose();
    }
    return guarded(ptr + "/matrix", [&] { return DiffusionField::power_times_const_spd(alpha, m); });
  }
  if (kind == "power_radial_anisotropic") {
    const int d = get_dim(j, ptr);
    const double alpha = get_number(j, "alpha", ptr);
    const double b = get_number(j, "b", ptr);
    return guarded(ptr, [&] { return DiffusionField::power_radial_anisotropic(d, alpha, b); });
  }
  if (kind == "exponential_isotropic") {
    const int d = get_dim(j, ptr);
    return DiffusionField::exponential_isotropic(d, parse_scalar_field(require(j, "phi", ptr), ptr + "/phi"));
  }
  if (kind == "custom") {
    const std::string id = get_string(j, "id", ptr);
    FieldFactory f;
    {
      std::lock_guard<std::mutex> lock(registry_mutex());
      auto it = registry().find(id);
      if (it == registry().end()) throw SpecError(ptr + "/id", "no custom field registered under '" + id + "'");
      f = it->second;
    }
    return f();
  }
  throw SpecError(ptr + "/kind", "unknown field kind '" + kind + "'");
}

SdeCoefficients parse_coefficients(const json& j, const std::string& ptr) {
  SingularPolicy policy = SingularPolicy::zero_at_singularity;
  if (j.is_object() && j.contains("policy")) {
    const std::string p = get_string(j, "policy", ptr);
    if (p == "error") {
      policy = SingularPolicy::error;
    } else if (p != "zero_at_singularity") {
      throw SpecError(ptr + "/policy", "expected 'zero_at_singularity' or 'error'");
    }
  }
  return SdeCoefficients(parse_field(j, ptr), policy);
}

void register_custom_field(const std::string& id, FieldFactory factory) {
  std::lock_guard<std::mutex> lock(registry_mutex());
  registry()[id] = std::move(factory);
}

std::vector<std::string> custom_field_ids() {
  std::lock_guard<std::mutex> lock(registry_mutex());
  std::vector<std::string> ids;
  for (const auto& [k, v] : registry()) ids.push_back(k);
  return ids;
}

RieszSource parse_riesz_source(const json& j, const std::string& ptr) {
  const std::string kind = get_string(j, "kind", ptr);
  auto parse_ball = [&](const json& b, const std::string& bp) {
    const Vec c = get_vec(b, "center", bp);
    const double r = get_number(b, "radius", bp);
    return guarded(bp + "/radius", [&] { return Ball(c, r); });
  };
  if (kind == "indicator_ball") return RieszSource::indicator_ball(parse_ball(j, ptr));
  if (kind == "zero") return RieszSource::zero(get_dim(j, ptr));
  if (kind == "field") {
    RieszSource s;
    const ScalarField f = parse_scalar_field(require(j, "field", ptr), ptr + "/field");
    s.g = f.value;
    s.name = f.name;
    if (j.contains("ball")) {
      s.ball = parse_ball(j["ball"], ptr + "/ball");
    } else if (j.contains("box")) {
      const std::string bp = ptr + "/box";
      const Vec lo = get_vec(j["box"], "lo", bp);
      const Vec hi = get_vec(j["box"], "hi", bp);
      s.box = guarded(bp, [&] { return Box(lo, hi); });
    } else {
      throw SpecError(ptr + "/ball", "a 'ball' or 'box' support is required");
    }
    return s;
  }
  throw SpecError(ptr + "/kind", "unknown source kind '" + kind + "'");
}

std::vector<Vec> parse_points(const json& j, const std::string& ptr) {
  const json* arr = &j;
  std::string base = ptr;
  if (j.is_object()) {
    arr = &require(j, "points", ptr);
    base = ptr + "/points";
  }
  if (!arr->is_array() || arr->empty()) throw SpecError(base.empty() ? "/" : base, "expected a non-empty array of points");
  std::vector<Vec> pts;
  for (std::size_t i = 0; i < arr->size(); ++i) {
    pts.push_back(as_vec((*arr)[i], base + "/" + std::to_string(i)));
    if (pts.back().size() != pts.front().size())
      throw SpecError(base + "/" + std::to_string(i), "inconsistent point dimension");
  }
  return pts;
}

std::vector<double> parse_list(const std::string& text, const std::string& name) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw SpecError("/" + name, "malformed number '" + item + "'");
    }
  }
  if (out.empty()) throw SpecError("/" + name, "empty list");
  return out;
}

Vec parse_vector(const std::string& text, const std::string& name) {
  const auto values = parse_list(text, name);
  if (values.size() > static_cast<std::size_t>(kMaxDim)) throw SpecError("/" + name, "too many components");
  Vec v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i];
  return v;
}

json load_document(const std::string& inline_or_path, const std::string& name) {
  std::string text = inline_or_path;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) throw SpecError("/" + name, "empty document");
  if (text[first] != '{' && text[first] != '[') {
    std::ifstream in(inline_or_path);
    if (!in) throw SpecError("/" + name, "cannot open '" + inline_or_path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SpecError("/" + name, std::string("malformed JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Serialisation

json to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
  return a;
}

json to_json(const Interval& iv) {
  return {{"lo", number(iv.lo)}, {"hi", number(iv.hi)}, {"lo_open", iv.lo_open}, {"hi_open", iv.hi_open}};
}

json to_json(const WeightClassReport& r) {
  return {{"condition", r.condition},   {"worst_ratio", number(r.worst_ratio)}, {"n_samples", r.n_samples},
          {"threshold", number(r.threshold)}, {"pass", r.pass},                {"rtol", r.rtol},
          {"quadrature_error", number(r.quadrature_error)}, {"regions", r.regions}};
}

json to_json(const EllipticityEstimate& e) {
  return {{"lambda_hat", number(e.lambda_hat)},
          {"min_ratio", number(e.min_ratio)},
          {"max_ratio", number(e.max_ratio)},
          {"n_points", e.n_points}};
}

json to_json(const ExponentWindow& w) {
  json entries = json::array();
  for (const auto& e : w.entries)
    entries.push_back({{"exponent", e.exponent}, {"applies_to", e.applies_to}, {"window", to_json(e.window)}});
  return {{"condition", to_string(w.condition)}, {"applicable", w.applicable}, {"entries", entries}};
}

json to_json(const LocalNormReport& r) {
  return {{"field", r.field},       {"exponent", r.exponent},  {"region", r.region}, {"value", number(r.value)},
          {"converged", r.converged}, {"pass", r.pass},        {"error", number(r.error)}};
}

json to_json(const ConditionReport& r) {
  json windows = json::array(), norms = json::array();
  for (const auto& w : r.windows) windows.push_back(to_json(w));
  for (const auto& n : r.norms) norms.push_back(to_json(n));
  return {{"ellipticity", to_json(r.ellipticity)},
          {"ellipticity_consistent", r.ellipticity_consistent},
          {"windows", windows},
          {"local_norms", norms},
          {"pass", r.pass}};
}

json to_json(const SimConfig& c) {
  json domain = {{"kind", c.domain.describe()}};
  return {{"horizon", c.horizon},
          {"dt", c.dt},
          {"policy", c.policy.describe()},
          {"domain", c.domain.describe()},
          {"r_max", c.r_max},
          {"record_stride", c.record_stride},
          {"snapshot_times", c.snapshot_times},
          {"hit_radii", c.hit_radii}};
}

json to_json(const HittingStats& s) {
  json q = json::array();
  for (std::size_t i = 0; i < s.quantile_levels.size(); ++i)
    q.push_back({{"level", s.quantile_levels[i]}, {"time", number(s.time_quantiles[i])}});
  return {{"radius", s.radius}, {"n", s.n},          {"hits", s.hits},
          {"fraction", s.fraction}, {"ci", to_json(s.ci)}, {"confidence", s.confidence},
          {"first_hit_quantiles", q}};
}

json to_json(const MomentSummary& m) {
  json comps = json::array();
  for (const auto& c : m.component_means) comps.push_back({{"mean", c.mean}, {"se", c.se}});
  json cov = json::array();
  for (Eigen::Index i = 0; i < m.covariance.rows(); ++i) cov.push_back(to_json(Vec(m.covariance.row(i).transpose())));
  return {{"t", m.t},
          {"n", m.n},
          {"mean_sq_norm", {{"mean", m.mean_sq_norm.mean}, {"se", m.mean_sq_norm.se}}},
          {"mean_sq_norm_ci99", to_json(m.mean_sq_norm_ci)},
          {"component_means", comps},
          {"covariance", cov}};
}

json to_json(const DensityEstimate& d) {
  json pts = json::array();
  for (std::size_t i = 0; i < d.points.size(); ++i)
    pts.push_back({{"y", to_json(d.points[i])}, {"p", number(d.value[i])}, {"se", number(d.se[i])}});
  return {{"t", d.t}, {"bandwidth", to_json(d.bandwidth)}, {"n_total", d.n_total}, {"n_used", d.n_used}, {"points", pts}};
}

json to_json(const EnvelopeReport& r) {
  return {{"t", r.t},
          {"eps", r.eps},
          {"c_hat", number(r.c_hat)},
          {"confidence_z", r.confidence_z},
          {"n_points", r.n_points},
          {"exceedances", r.exceedances},
          {"excluded", r.excluded},
          {"degenerate", r.degenerate},
          {"warnings", r.warnings}};
}

json to_json(const EnvelopeStability& s) {
  return {{"c_min", number(s.c_min)}, {"c_max", number(s.c_max)}, {"ratio", number(s.ratio)}, {"stable", s.stable}};
}

json to_json(const HoelderReport& r) {
  return {{"eta", r.eta},
          {"p", r.p},
          {"d", r.d},
          {"eta_in_range", r.eta_in_range},
          {"order", number(r.order)},
          {"order_in_range", r.order_in_range},
          {"tail_integral", number(r.tail_integral)},
          {"tail_finite", r.tail_finite},
          {"pass", r.pass},
          {"failures", r.failures}};
}

json to_json(const quad::Result& r) {
  return {{"value", number(r.value)}, {"error", number(r.error)}, {"evaluations", r.evaluations},
          {"converged", r.converged}, {"divergent", r.divergent}};
}

json batch_to_json(const PathBatch& b, const json& field_spec, bool with_samples) {
  json j;
  j["field"] = field_spec;
  j["coefficients"] = b.coefficients;
  j["x0"] = to_json(b.x0);
  j["n"] = b.paths.size();
  j["master_seed"] = b.master_seed;
  j["config"] = to_json(b.config);
  j["counts"] = {{"ran_to_horizon", b.counts[0]}, {"exited_domain", b.counts[1]}, {"exceeded_rmax", b.counts[2]}};
  {
    std::ostringstream hex;
    hex << std::hex << b.digest;
    j["digest"] = hex.str();
  }
  j["origin_start"] = b.origin_start_heuristic ? "heuristic" : "regular";

  std::vector<double> times = b.config.snapshot_times;
  if (times.empty() || times.back() != b.config.horizon) times.push_back(b.config.horizon);
  json moments = json::array();
  json samples = json::array();
  for (double t : times) {
    if (t <= 0.0) continue;
    const auto xs = states_at(b, t);
    if (!xs.empty()) moments.push_back(to_json(moment_summary(b, t)));
    if (with_samples) {
      json states = json::array();
      for (const auto& x : xs) states.push_back(to_json(x));
      samples.push_back({{"t", t}, {"states", std::move(states)}});
    }
  }
  j["moments"] = moments;
  if (!b.config.hit_radii.empty()) {
    json hits = json::array();
    for (double r : b.config.hit_radii) hits.push_back(to_json(hitting_stats(b, r)));
    j["hitting"] = hits;
  }
  if (with_samples) j["samples"] = samples;
  return j;
}

StoredBatch parse_stored_batch(const json& j) {
  StoredBatch s;
  s.field_spec = require(j, "field", "");
  s.x0 = get_vec(j, "x0", "");
  s.n_total = static_cast<std::size_t>(get_int(j, "n", ""));
  if (j.contains("master_seed")) s.master_seed = j["master_seed"].get<std::uint64_t>();
  const json& samples = require(j, "samples", "");
  if (!samples.is_array()) throw SpecError("/samples", "expected an array");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string p = "/samples/" + std::to_string(i);
    const double t = get_number(samples[i], "t", p);
    const json& states = require(samples[i], "states", p);
    std::vector<Vec> xs;
    xs.reserve(states.size());
    for (std::size_t k = 0; k < states.size(); ++k) xs.push_back(as_vec(states[k], p + "/states/" + std::to_string(k)));
    s.samples.emplace(t, std::move(xs));
  }
  return s;
}

}  // namespace wdiff::io
