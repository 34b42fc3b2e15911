#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "artifacts.hpp"
#include "wdiff/errors.hpp"
#include "wdiff/estimators.hpp"
#include "wdiff/forms.hpp"
#include "wdiff/oracle.hpp"
#include "wdiff/rng.hpp"
#include "wdiff/sde.hpp"
#include "wdiff/spec_io.hpp"
#include "wdiff/stats.hpp"
#include "wdiff/weights.hpp"

namespace wdiff::cli {

namespace {

using io::json;
using io::number;
using io::to_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::vector<std::string> args;
  std::string out_dir;
  bool quiet = false;
};

int finish(const Context& ctx, const RunArtifacts& run, json report, const std::vector<TidyRow>& rows, bool pass,
           const json* printed = nullptr) {
  report["run_id"] = run.run_id();
  report["pass"] = pass;
  write_run(resolve_out_dir(ctx.out_dir), run, report, rows);
  if (!ctx.quiet) {
    if (printed) {
      json p = *printed;
      p["run_id"] = run.run_id();
      p["pass"] = pass;
      ctx.out << p.dump(2) << "\n";
    } else {
      ctx.out << report.dump(2) << "\n";
    }
  }
  return pass ? kPass : kCheckFailed;
}

Vec origin_offset_or(const std::string& text, int d, const std::string& name) {
  if (text.empty()) return unit(d, 0);
  Vec v = io::parse_vector(text, name);
  if (v.size() != d) throw SpecError("/" + name, "expected " + std::to_string(d) + " components");
  return v;
}

Domain parse_domain(const std::string& text) {
  if (text == "full") return Domain::full();
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  if (colon == std::string::npos) throw SpecError("/domain", "expected full, annulus:k or ball:R");
  const std::string arg = text.substr(colon + 1);
  try {
    if (kind == "annulus") return Domain::annulus(std::stoi(arg));
    if (kind == "ball") return Domain::ball(std::stod(arg));
  } catch (const std::logic_error&) {
    throw SpecError("/domain", "malformed domain argument '" + arg + "'");
  }
  throw SpecError("/domain", "unknown domain kind '" + kind + "'");
}

oracle::Boundary parse_boundary(const std::string& s) {
  if (s == "reflecting") return oracle::Boundary::reflecting;
  if (s == "absorbing") return oracle::Boundary::absorbing;
  throw SpecError("/boundary", "expected reflecting or absorbing");
}

json isotropic_field_spec(int d, double alpha) {
  return {{"kind", "isotropic_power"}, {"dim", d}, {"alpha", alpha}};
}

// ---------------------------------------------------------------------------
// check-weight

struct CheckWeightOpts {
  std::string weight;
  std::string condition = "a2";
  int n_balls = 200;
  std::uint64_t seed = 1;
  double region = 2.0;
  double r_min = 1e-3;
  double r_max = 10.0;
  double threshold = 0.0;
  double rtol = 1e-6;
};

int cmd_check_weight(const Context& ctx, const CheckWeightOpts& o) {
  const json doc = io::load_document(o.weight, "weight");
  const Weight w = io::parse_weight(doc);
  if (o.n_balls < 1) throw SpecError("/n-balls", "must be positive");
  if (!(o.region > 0.0)) throw SpecError("/region", "must be positive");
  if (!(o.r_min > 0.0 && o.r_max > o.r_min)) throw SpecError("/r-min", "need 0 < r-min < r-max");

  QuadratureConfig qc;
  qc.rtol = o.rtol;
  qc.seed = derive_seed(o.seed, 0x9e);
  const int d = w.dim();
  const BallSampling sampling{Box::cube(zeros(d), o.region), o.r_min, o.r_max};

  RunArtifacts run{"check-weight", ctx.args,
                   {{"weight", doc}, {"condition", o.condition}, {"n_balls", o.n_balls}, {"seed", o.seed},
                    {"region", o.region}, {"r_min", o.r_min}, {"r_max", o.r_max}, {"threshold", o.threshold},
                    {"rtol", o.rtol}},
                   o.seed};

  json report = {{"weight", w.describe()}, {"condition", o.condition}};
  WeightClassReport r;
  r.condition = o.condition;
  try {
    if (o.condition == "a2") {
      r = check_a2(w, sampling, o.n_balls, o.seed, o.threshold > 0.0 ? o.threshold : 1e3, qc);
    } else if (o.condition == "doubling") {
      r = check_doubling(w, sampling, o.n_balls, o.seed, o.threshold, qc);
    } else if (o.condition == "bmo" || o.condition == "poincare") {
      if (o.condition == "bmo" && !w.phi()) throw SpecError("/kind", "the bmo condition needs an exponential weight");
      PhiloxStream rng(o.seed, 0);
      r.threshold = o.threshold > 0.0 ? o.threshold : (o.condition == "bmo" ? 1e3 : 10.0);
      r.rtol = o.condition == "bmo" ? qc.mc_rtol : qc.rtol;
      r.worst_ratio = 0.0;
      GradientField u{[](const Vec& x) { return x[0]; }, [d](const Vec&) { return unit(d, 0); }};
      for (int k = 0; k < o.n_balls; ++k) {
        Vec c(d);
        for (int i = 0; i < d; ++i) c[i] = sampling.region.lo[i] + (sampling.region.hi[i] - sampling.region.lo[i]) * rng.uniform();
        const double rad = o.r_min * std::pow(o.r_max / o.r_min, rng.uniform());
        double ratio;
        std::ostringstream desc;
        if (o.condition == "bmo") {
          ratio = bmo_exp_avg(*w.phi(), Box::cube(c, rad), qc);
          desc << "cube(center=" << c.transpose() << ", half_side=" << rad << ")";
        } else {
          ratio = poincare_ratio(w, Ball(c, rad), u, qc);
          desc << "ball(center=" << c.transpose() << ", r=" << rad << ")";
        }
        ++r.n_samples;
        if (ratio > r.worst_ratio) {
          r.worst_ratio = ratio;
          r.regions.insert(r.regions.begin(), desc.str());
          if (r.regions.size() > 5) r.regions.pop_back();
        }
      }
      r.pass = r.worst_ratio <= r.threshold;
    } else {
      throw SpecError("/condition", "expected a2, doubling, bmo or poincare");
    }
  } catch (const DivergentIntegralError& e) {
    r.pass = false;
    r.worst_ratio = std::numeric_limits<double>::infinity();
    report["divergent"] = true;
    report["message"] = e.what();
  }
  report["result"] = to_json(r);
  std::vector<TidyRow> rows{{0.0, o.condition + "_worst_ratio", r.worst_ratio, kNaN}};
  return finish(ctx, run, report, rows, r.pass);
}

// ---------------------------------------------------------------------------
// check-conditions

struct CheckConditionsOpts {
  std::string field;
  double radius = 1.0;
  std::uint64_t seed = 1;
  double rtol = 1e-4;
  std::optional<double> alpha;
  int d = 3;
  std::string condition = "hp3_iii";
};

int cmd_check_conditions(const Context& ctx, const CheckConditionsOpts& o) {
  if (o.field.empty()) {
    if (!o.alpha) throw SpecError("/field", "either --field or --alpha (window mode) is required");
    const auto cond = [&] {
      try {
        return integrability_condition_from_string(o.condition);
      } catch (const std::invalid_argument& e) {
        throw SpecError("/condition", e.what());
      }
    }();
    const ExponentWindow w = exponent_window(*o.alpha, o.d, cond);
    RunArtifacts run{"check-conditions", ctx.args,
                     {{"alpha", *o.alpha}, {"d", o.d}, {"condition", o.condition}}, 0};
    std::vector<TidyRow> rows;
    for (const auto& e : w.entries) {
      rows.push_back({0.0, e.exponent + "_lo:" + e.applies_to, e.window.lo, kNaN});
      rows.push_back({0.0, e.exponent + "_hi:" + e.applies_to, e.window.hi, kNaN});
    }
    return finish(ctx, run, {{"mode", "window"}, {"window", to_json(w)}}, rows, true);
  }
  const json doc = io::load_document(o.field, "field");
  const SdeCoefficients c = io::parse_coefficients(doc);
  if (!(o.radius > 0.0)) throw SpecError("/radius", "must be positive");
  quad::Options qo;
  qo.rtol = o.rtol;
  const ConditionReport r = check_conditions(c, o.radius, o.seed, qo);
  RunArtifacts run{"check-conditions", ctx.args,
                   {{"field", doc}, {"radius", o.radius}, {"seed", o.seed}, {"rtol", o.rtol}}, o.seed};
  std::vector<TidyRow> rows{{0.0, "lambda_hat", r.ellipticity.lambda_hat, kNaN}};
  for (const auto& n : r.norms) rows.push_back({0.0, "norm:" + n.field + ":" + n.region, n.value, n.error});
  return finish(ctx, run, {{"mode", "field"}, {"field", c.describe()}, {"report", to_json(r)}}, rows, r.pass);
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOpts {
  std::string field;
  std::string x0;
  std::size_t n = 1000;
  double t = 1.0;
  double dt = 1e-3;
  std::uint64_t seed = 1;
  std::string domain = "full";
  std::string policy = "adaptive";
  double theta = 0.1;
  double dt_min = 1e-8;
  bool tamed = false;
  double r_max = 1e6;
  std::string snapshots;
  std::string hit_radii;
  unsigned threads = 0;
  bool samples = false;
  std::string paths_csv;
  int record_stride = 0;
};

SimConfig make_config(const SimulateOpts& o) {
  SimConfig cfg;
  cfg.horizon = o.t;
  cfg.dt = o.dt;
  if (o.policy == "fixed") {
    cfg.policy = StepPolicy::fixed(o.tamed);
  } else if (o.policy == "adaptive") {
    cfg.policy = StepPolicy::adaptive(o.theta, o.dt_min, o.tamed);
  } else {
    throw SpecError("/policy", "expected fixed or adaptive");
  }
  cfg.domain = parse_domain(o.domain);
  cfg.r_max = o.r_max;
  cfg.record_stride = o.record_stride;
  if (!o.snapshots.empty()) cfg.snapshot_times = io::parse_list(o.snapshots, "snapshots");
  if (!o.hit_radii.empty()) cfg.hit_radii = io::parse_list(o.hit_radii, "hit-radii");
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw SpecError("/config", e.what());
  }
  return cfg;
}

int cmd_simulate(const Context& ctx, const SimulateOpts& o) {
  const json doc = io::load_document(o.field, "field");
  const SdeCoefficients c = io::parse_coefficients(doc);
  const Vec x0 = origin_offset_or(o.x0, c.dim(), "x0");
  if (o.n == 0) throw SpecError("/n", "must be positive");
  const SimConfig cfg = make_config(o);
  const PathBatch b = simulate_batch(c, x0, o.n, cfg, o.seed, o.threads);

  json report = io::batch_to_json(b, doc, o.samples);
  RunArtifacts run{"simulate", ctx.args,
                   {{"field", doc}, {"x0", to_json(x0)}, {"n", o.n}, {"config", to_json(cfg)}, {"seed", o.seed},
                    {"samples", o.samples}},
                   o.seed};

  std::vector<TidyRow> rows;
  for (const auto& m : report["moments"])
    rows.push_back({m["t"].get<double>(), "mean_sq_norm", m["mean_sq_norm"]["mean"].get<double>(),
                    m["mean_sq_norm"]["se"].get<double>()});
  for (double r : cfg.hit_radii) {
    const HittingStats h = hitting_stats(b, r);
    const double se = std::sqrt(h.fraction * (1.0 - h.fraction) / static_cast<double>(h.n));
    rows.push_back({cfg.horizon, "hit_fraction_r=" + std::to_string(r), h.fraction, se});
  }
  rows.push_back({cfg.horizon, "exceeded_rmax", static_cast<double>(b.counts[2]), kNaN});
  rows.push_back({cfg.horizon, "exited_domain", static_cast<double>(b.counts[1]), kNaN});

  if (!o.paths_csv.empty()) {
    std::ostringstream os;
    os << "run_id,path,t,component,value\n";
    os << std::setprecision(17);
    for (std::size_t i = 0; i < b.paths.size(); ++i) {
      const auto& p = b.paths[i];
      for (std::size_t k = 0; k < p.states.size(); ++k)
        for (Eigen::Index j = 0; j < p.states[k].size(); ++j)
          os << run.run_id() << ',' << i << ',' << p.times[k] << ",x" << (j + 1) << ',' << p.states[k][j] << '\n';
    }
    write_atomic(o.paths_csv, os.str());
  }
  json printed = report;
  printed.erase("samples");
  return finish(ctx, run, report, rows, true, &printed);
}

// ---------------------------------------------------------------------------
// verify-moments

struct MomentsOpts {
  double alpha = 1.0;
  int d = 3;
  std::string x0;
  std::size_t n = 100000;
  double t = 1.0;
  double dt = 1e-3;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  double z = 3.0;
};

int cmd_verify_moments(const Context& ctx, const MomentsOpts& o) {
  const json field = isotropic_field_spec(o.d, o.alpha);
  const SdeCoefficients c = io::parse_coefficients(field);
  const Vec x0 = origin_offset_or(o.x0, o.d, "x0");
  if (o.n < 2) throw SpecError("/n", "need at least two paths");
  SimulateOpts so;
  so.t = o.t;
  so.dt = o.dt;
  const SimConfig cfg = make_config(so);
  const PathBatch b = simulate_batch(c, x0, o.n, cfg, o.seed, o.threads);
  const double expected = oracle::besq_mean(x0, o.t, oracle::BesselOracle::make(o.d, o.alpha));
  const MomentSummary m = moment_summary(b, o.t);
  const double z = (m.mean_sq_norm.mean - expected) / m.mean_sq_norm.se;
  const bool pass = std::abs(z) <= o.z && b.counts[2] == 0;

  RunArtifacts run{"verify-moments", ctx.args,
                   {{"field", field}, {"x0", to_json(x0)}, {"n", o.n}, {"t", o.t}, {"dt", o.dt}, {"seed", o.seed},
                    {"z", o.z}},
                   o.seed};
  json report = {{"field", c.describe()},
                 {"oracle_mean_sq_norm", expected},
                 {"moments", to_json(m)},
                 {"z_score", number(z)},
                 {"tolerance_se", o.z},
                 {"counts", {{"ran_to_horizon", b.counts[0]}, {"exited_domain", b.counts[1]}, {"exceeded_rmax", b.counts[2]}}}};
  std::ostringstream hex;
  hex << std::hex << b.digest;
  report["digest"] = hex.str();
  std::vector<TidyRow> rows{{o.t, "mean_sq_norm", m.mean_sq_norm.mean, m.mean_sq_norm.se},
                            {o.t, "oracle_mean_sq_norm", expected, kNaN}};
  return finish(ctx, run, report, rows, pass);
}

// ---------------------------------------------------------------------------
// verify-heatkernel

struct HeatKernelOpts {
  std::string field;
  std::string batch;
  std::string x0;
  std::size_t n = 100000;
  std::string times = "0.25,0.5,1,2";
  double dt = 2e-3;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  double eps = 1.0;
  double z = 3.0;
  double bw_scale = 1.0;
  std::string grid;
  double max_ratio = 10.0;
};

int cmd_verify_heatkernel(const Context& ctx, const HeatKernelOpts& o) {
  json field_doc;
  std::map<double, std::vector<Vec>> samples;
  std::size_t n_total = 0;
  Vec x0;
  std::vector<double> times;
  if (!o.batch.empty()) {
    const io::StoredBatch sb = io::parse_stored_batch(io::load_document(o.batch, "batch"));
    field_doc = sb.field_spec;
    n_total = sb.n_total;
    x0 = sb.x0;
    samples = sb.samples;
    for (const auto& [t, xs] : samples) times.push_back(t);
    if (times.empty()) throw SpecError("/samples", "the batch carries no samples; simulate with --samples");
  } else {
    if (o.field.empty()) throw SpecError("/field", "either --field or --batch is required");
    field_doc = io::load_document(o.field, "field");
  }
  const SdeCoefficients c = io::parse_coefficients(field_doc);
  const int d = c.dim();
  if (o.batch.empty()) {
    x0 = o.x0.empty() ? zeros(d) : origin_offset_or(o.x0, d, "x0");
    times = io::parse_list(o.times, "times");
    std::sort(times.begin(), times.end());
    SimulateOpts so;
    so.t = times.back();
    so.dt = o.dt;
    so.snapshots = o.times;
    SimConfig cfg = make_config(so);
    cfg.snapshot_times = times;
    const PathBatch b = simulate_batch(c, x0, o.n, cfg, o.seed, o.threads);
    n_total = b.size();
    for (double t : times) samples[t] = states_at(b, t);
  }
  const std::vector<Vec> grid =
      o.grid.empty() ? default_envelope_grid(d) : io::parse_points(io::load_document(o.grid, "grid"));
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid[i].size() != d) throw SpecError("/grid/" + std::to_string(i), "dimension mismatch");

  const Weight& w = c.field().weight();
  const HeatKernelEnvelope env(w, c.field().lambda());
  const auto power = w.power_exponent();
  const bool gaussian = power && *power == 0.0 && c.field().isotropic_alpha();

  std::vector<EnvelopeReport> sweep;
  json per_time = json::array();
  std::vector<TidyRow> rows;
  std::size_t gaussian_violations = 0;
  for (double t : times) {
    const auto& xs = samples.at(t);
    const DensityEstimate est = kde_transition_density(xs, n_total, w, grid, Bandwidth::silverman(o.bw_scale), t);
    std::vector<double> e;
    e.reserve(grid.size());
    for (const auto& y : grid) e.push_back(env(x0, y, t, o.eps));
    EnvelopeReport rep = fit_heat_kernel_constant(est, e, o.eps, o.z);
    json entry = {{"envelope", to_json(rep)}, {"density", to_json(est)}};
    if (gaussian) {
      std::size_t bad = 0;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const double p = std::pow(2.0 * M_PI * t, -0.5 * d) * std::exp(-(grid[i] - x0).squaredNorm() / (2.0 * t));
        if (p > rep.c_hat * e[i]) ++bad;
      }
      gaussian_violations += bad;
      entry["exact_gaussian_violations"] = bad;
    }
    rows.push_back({t, "c_hat", rep.c_hat, kNaN});
    for (std::size_t i = 0; i < grid.size(); ++i)
      rows.push_back({t, "p_hat@" + std::to_string(i), est.value[i], est.se[i]});
    per_time.push_back(std::move(entry));
    sweep.push_back(std::move(rep));
  }
  const EnvelopeStability st = envelope_stability(sweep, o.max_ratio);
  const bool pass = st.stable && gaussian_violations == 0;

  RunArtifacts run{"verify-heatkernel", ctx.args,
                   {{"field", field_doc}, {"batch", o.batch}, {"x0", to_json(x0)}, {"n", n_total}, {"times", times},
                    {"dt", o.dt}, {"seed", o.seed}, {"eps", o.eps}, {"z", o.z}, {"bandwidth_scale", o.bw_scale},
                    {"grid", o.grid}},
                   o.seed};
  json report = {{"field", c.describe()}, {"x0", to_json(x0)}, {"per_time", per_time}, {"stability", to_json(st)}};
  if (gaussian) report["exact_gaussian_violations"] = gaussian_violations;
  json printed = report;
  for (auto& e : printed["per_time"]) e.erase("density");
  return finish(ctx, run, report, rows, pass, &printed);
}

// ---------------------------------------------------------------------------
// hitting

struct HittingOpts {
  double alpha = 0.5;
  int d = 2;
  double r0 = 1.0;
  double eps = 1e-3;
  double t = 5.0;
  std::size_t n = 10000;
  double dt = 1e-3;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::optional<double> max_fraction;
  double confidence = 0.99;
};

int cmd_hitting(const Context& ctx, const HittingOpts& o) {
  const json field = isotropic_field_spec(o.d, o.alpha);
  const SdeCoefficients c = io::parse_coefficients(field);
  if (!(o.r0 > o.eps && o.eps > 0.0)) throw SpecError("/eps", "need 0 < eps < r0");
  SimulateOpts so;
  so.t = o.t;
  so.dt = o.dt;
  SimConfig cfg = make_config(so);
  cfg.hit_radii = {o.eps};
  const Vec x0 = o.r0 * unit(o.d, 0);
  const PathBatch b = simulate_batch(c, x0, o.n, cfg, o.seed, o.threads);
  const HittingStats h = hitting_stats(b, o.eps, o.confidence);

  const double delta = oracle::bessel_dimension(o.d, o.alpha);
  oracle::RadialSimOptions ro;
  ro.hit_radius = o.eps;
  ro.workers = o.threads == 0 ? 0 : o.threads;
  const auto radial = oracle::radial_reference_sim(delta, o.r0, o.t, o.n, o.dt, derive_seed(o.seed, 0x4ad1), ro);
  std::size_t radial_hits = 0;
  for (double s : radial.first_hit) radial_hits += std::isfinite(s) ? 1 : 0;
  const Interval radial_ci = stats::wilson_interval(radial_hits, o.n, o.confidence);
  const double radial_fraction = static_cast<double>(radial_hits) / static_cast<double>(o.n);

  json oracle_json = {{"delta", delta},
                      {"hits_origin", oracle::hits_origin(delta)},
                      {"ever_hit_probability", oracle::ever_hit_probability(delta, o.r0, o.eps)},
                      {"hit_probability_by_t", oracle::hit_probability_by(delta, o.r0, o.eps, o.t)},
                      {"radial_fraction", radial_fraction},
                      {"radial_ci", to_json(radial_ci)}};
  if (delta == 1.0) oracle_json["closed_form"] = oracle::hit_probability_delta_one(o.r0, o.eps, o.t);

  bool pass;
  json check;
  if (o.max_fraction) {
    pass = h.ci.lo <= *o.max_fraction;
    check = {{"kind", "fraction_at_most"}, {"max_fraction", *o.max_fraction}, {"ci_lower", h.ci.lo}};
  } else {
    pass = radial_ci.contains(h.fraction);
    check = {{"kind", "within_radial_ci"}, {"radial_ci", to_json(radial_ci)}};
  }
  RunArtifacts run{"hitting", ctx.args,
                   {{"field", field}, {"r0", o.r0}, {"eps", o.eps}, {"t", o.t}, {"n", o.n}, {"dt", o.dt},
                    {"seed", o.seed}, {"confidence", o.confidence},
                    {"max_fraction", o.max_fraction ? json(*o.max_fraction) : json(nullptr)}},
                   o.seed};
  json report = {{"field", c.describe()}, {"hitting", to_json(h)}, {"oracle", oracle_json}, {"check", check}};
  const double se = std::sqrt(h.fraction * (1.0 - h.fraction) / static_cast<double>(o.n));
  const double rse = std::sqrt(radial_fraction * (1.0 - radial_fraction) / static_cast<double>(o.n));
  std::vector<TidyRow> rows{{o.t, "hit_fraction", h.fraction, se}, {o.t, "radial_hit_fraction", radial_fraction, rse}};
  return finish(ctx, run, report, rows, pass);
}

// ---------------------------------------------------------------------------
// potentials

struct PotentialOpts {
  std::string g;
  double eta = 2.0;
  std::vector<std::string> xs;
  double rtol = 1e-6;
  double alpha = 0.0;
  int d = 3;
  std::string y;
  double p = 2.0;
};

int cmd_riesz(const Context& ctx, const PotentialOpts& o) {
  const json doc = io::load_document(o.g, "g");
  const RieszSource g = io::parse_riesz_source(doc);
  if (o.xs.empty()) throw SpecError("/x", "at least one evaluation point is required");
  quad::Options qo;
  qo.rtol = o.rtol;
  json values = json::array();
  std::vector<TidyRow> rows;
  bool pass = true;
  for (std::size_t i = 0; i < o.xs.size(); ++i) {
    const Vec x = io::parse_vector(o.xs[i], "x/" + std::to_string(i));
    if (x.size() != g.dim()) throw SpecError("/x/" + std::to_string(i), "dimension mismatch");
    try {
      const quad::Result r = riesz_potential(g, o.eta, x, qo);
      values.push_back({{"x", to_json(x)}, {"result", to_json(r)}});
      rows.push_back({0.0, "V@" + std::to_string(i), r.value, r.error});
    } catch (const DivergentIntegralError& e) {
      pass = false;
      values.push_back({{"x", to_json(x)}, {"divergent", true}, {"message", e.what()}});
    }
  }
  RunArtifacts run{"potentials", ctx.args, {{"mode", "riesz"}, {"g", doc}, {"eta", o.eta}, {"x", o.xs}, {"rtol", o.rtol}}, 0};
  return finish(ctx, run, {{"mode", "riesz"}, {"eta", o.eta}, {"source", g.name}, {"values", values}}, rows, pass);
}

int cmd_resolvent(const Context& ctx, const PotentialOpts& o) {
  if (o.xs.size() != 1) throw SpecError("/x", "exactly one x is required");
  const Vec x = io::parse_vector(o.xs[0], "x");
  const Vec y = io::parse_vector(o.y, "y");
  if (x.size() != o.d || y.size() != o.d) throw SpecError("/d", "x and y must have d components");
  const double v = resolvent_envelope(o.alpha, o.d, x, y);
  RunArtifacts run{"potentials", ctx.args,
                   {{"mode", "resolvent"}, {"alpha", o.alpha}, {"d", o.d}, {"x", o.xs[0]}, {"y", o.y}}, 0};
  return finish(ctx, run, {{"mode", "resolvent"}, {"value", number(v)}}, {{0.0, "resolvent_envelope", v, kNaN}}, true);
}

int cmd_hoelder(const Context& ctx, const PotentialOpts& o) {
  const json doc = io::load_document(o.g, "g");
  const RieszSource g = io::parse_riesz_source(doc);
  quad::Options qo;
  qo.rtol = o.rtol;
  const HoelderReport r = check_hoelder_hypotheses(g, o.p, o.eta, g.dim(), qo);
  RunArtifacts run{"potentials", ctx.args, {{"mode", "hoelder"}, {"g", doc}, {"p", o.p}, {"eta", o.eta}}, 0};
  return finish(ctx, run, {{"mode", "hoelder"}, {"report", to_json(r)}}, {{0.0, "hoelder_order", r.order, kNaN}},
                r.pass);
}

// ---------------------------------------------------------------------------
// oracle

struct OracleOpts {
  int d = 3;
  double alpha = 0.0;
  std::optional<double> delta;
  double r0 = 1.0;
  std::string x0;  ///< overrides r0 with |x0|
  double t = 1.0;
  std::string r = "1";
  std::string boundary = "reflecting";
  std::size_t n = 10000;
  double dt = 1e-3;
  std::uint64_t seed = 1;
  double eps = 1e-3;
  double hit_radius = 0.0;
};

double delta_of(const OracleOpts& o) {
  if (o.delta) return *o.delta;
  try {
    return oracle::bessel_dimension(o.d, o.alpha);
  } catch (const std::invalid_argument& e) {
    throw SpecError("/alpha", e.what());
  }
}

int cmd_oracle(const Context& ctx, const std::string& query, const OracleOpts& opts) {
  OracleOpts o = opts;
  if (!o.x0.empty()) o.r0 = io::parse_vector(o.x0, "x0").norm();
  const double delta = delta_of(o);
  json inputs = {{"query", query}, {"delta", delta}, {"r0", o.r0}, {"t", o.t}};
  json report = {{"query", query}, {"delta", delta}};
  std::vector<TidyRow> rows;
  std::uint64_t seed = 0;
  if (query == "bessel-dimension") {
    report["hits_origin"] = oracle::hits_origin(delta);
    rows.push_back({0.0, "delta", delta, kNaN});
  } else if (query == "hits-origin") {
    report["hits_origin"] = oracle::hits_origin(delta);
  } else if (query == "besq-mean") {
    const double m = oracle::besq_mean(o.r0, o.t, delta);
    report["mean_sq_norm"] = m;
    rows.push_back({o.t, "mean_sq_norm", m, kNaN});
  } else if (query == "density" || query == "cdf") {
    const auto b = parse_boundary(o.boundary);
    inputs["r"] = o.r;
    inputs["boundary"] = o.boundary;
    json vals = json::array();
    for (double r : io::parse_list(o.r, "r")) {
      const double v = query == "density" ? oracle::besq_radial_density(r, o.t, o.r0, delta, b)
                                          : oracle::besq_radial_cdf(r, o.t, o.r0, delta, b);
      vals.push_back({{"r", r}, {"value", number(v)}});
      rows.push_back({o.t, query + "@r=" + std::to_string(r), v, kNaN});
    }
    report["boundary"] = o.boundary;
    report["values"] = vals;
    if (b == oracle::Boundary::absorbing) report["absorbed_mass"] = oracle::absorbed_mass(o.t, o.r0, delta);
  } else if (query == "ever-hit") {
    inputs["eps"] = o.eps;
    report["probability"] = oracle::ever_hit_probability(delta, o.r0, o.eps);
    report["probability_by_t"] = oracle::hit_probability_by(delta, o.r0, o.eps, o.t);
  } else if (query == "radial-sim") {
    oracle::RadialSimOptions ro;
    ro.boundary = parse_boundary(o.boundary);
    ro.hit_radius = o.hit_radius;
    seed = o.seed;
    inputs.update({{"n", o.n}, {"dt", o.dt}, {"seed", o.seed}, {"boundary", o.boundary}, {"hit_radius", o.hit_radius}});
    const auto s = oracle::radial_reference_sim(delta, o.r0, o.t, o.n, o.dt, o.seed, ro);
    std::vector<double> sq(s.radius.size());
    std::transform(s.radius.begin(), s.radius.end(), sq.begin(), [](double r) { return r * r; });
    const auto m = stats::mean_se(sq);
    report["mean_sq_radius"] = {{"mean", m.mean}, {"se", m.se}};
    report["n_touched_floor"] = s.n_touched;
    report["n_absorbed"] = s.n_absorbed;
    rows.push_back({o.t, "mean_sq_radius", m.mean, m.se});
    if (o.hit_radius > 0.0) {
      std::size_t hits = 0;
      for (double h : s.first_hit) hits += std::isfinite(h) ? 1 : 0;
      report["hits"] = hits;
      report["hit_ci99"] = to_json(stats::wilson_interval(hits, o.n, 0.99));
      rows.push_back({o.t, "hit_fraction", static_cast<double>(hits) / static_cast<double>(o.n), kNaN});
    }
  } else {
    throw SpecError("/query", "unknown oracle query '" + query + "'");
  }
  RunArtifacts run{"oracle", ctx.args, inputs, seed};
  return finish(ctx, run, report, rows, true);
}

template <class T>
CLI::Option* seed_option(CLI::App* sc, T& target) {
  return sc->add_option("--seed", target, "Master seed")->capture_default_str();
}

}  // namespace

std::vector<Vec> default_envelope_grid(int d) {
  std::vector<Vec> grid;
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 6; ++j) {
      Vec y = zeros(d);
      y[0] = -2.75 + 0.5 * i;
      y[1] = -2.5 + 1.0 * j;
      grid.push_back(y);
    }
  }
  return grid;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulation and verification of diffusions with singular, degenerate coefficients", "wdiff"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", WDIFF_VERSION);
  Context ctx{out, err, args, "", false};
  app.add_option("--out-dir", ctx.out_dir, "Output directory (default: $WDIFF_OUT_DIR or ./wdiff-out)");
  app.add_flag("--quiet", ctx.quiet, "Do not print the report");

  CheckWeightOpts cw;
  auto* s_cw = app.add_subcommand("check-weight", "Numerical evidence for a weight-class condition");
  s_cw->add_option("--weight", cw.weight, "Weight JSON (inline or file)")->required();
  s_cw->add_option("--condition", cw.condition, "a2 | doubling | bmo | poincare")->capture_default_str();
  s_cw->add_option("--n-balls", cw.n_balls)->capture_default_str();
  seed_option(s_cw, cw.seed);
  s_cw->add_option("--region", cw.region, "Half side of the origin-centred cube holding the centres")->capture_default_str();
  s_cw->add_option("--r-min", cw.r_min)->capture_default_str();
  s_cw->add_option("--r-max", cw.r_max)->capture_default_str();
  s_cw->add_option("--threshold", cw.threshold, "Pass threshold (0: condition default)")->capture_default_str();
  s_cw->add_option("--rtol", cw.rtol)->capture_default_str();

  CheckConditionsOpts cc;
  auto* s_cc = app.add_subcommand("check-conditions", "Ellipticity, exponent windows and local norms");
  s_cc->add_option("--field", cc.field, "Field JSON (inline or file)");
  s_cc->add_option("--radius", cc.radius)->capture_default_str();
  seed_option(s_cc, cc.seed);
  s_cc->add_option("--rtol", cc.rtol)->capture_default_str();
  s_cc->add_option("--alpha", cc.alpha, "Window mode: weight exponent");
  s_cc->add_option("--d", cc.d, "Window mode: dimension")->capture_default_str();
  s_cc->add_option("--condition", cc.condition, "Window mode: hp3_i | hp3_ii | hp3_iii | hp3_prime | hp6")
      ->capture_default_str();

  SimulateOpts so;
  auto* s_sim = app.add_subcommand("simulate", "Simulate a batch of paths");
  s_sim->add_option("--field", so.field, "Field JSON (inline or file)")->required();
  s_sim->add_option("--x0", so.x0, "Start, e.g. 1,0,0 (default e1)");
  s_sim->add_option("--n", so.n)->capture_default_str();
  s_sim->add_option("--t", so.t, "Horizon")->capture_default_str();
  s_sim->add_option("--dt", so.dt)->capture_default_str();
  seed_option(s_sim, so.seed);
  s_sim->add_option("--domain", so.domain, "full | annulus:k | ball:R")->capture_default_str();
  s_sim->add_option("--policy", so.policy, "fixed | adaptive")->capture_default_str();
  s_sim->add_option("--theta", so.theta)->capture_default_str();
  s_sim->add_option("--dt-min", so.dt_min)->capture_default_str();
  s_sim->add_flag("--tamed", so.tamed);
  s_sim->add_option("--r-max", so.r_max)->capture_default_str();
  s_sim->add_option("--snapshots", so.snapshots, "Comma-separated snapshot times");
  s_sim->add_option("--hit-radii", so.hit_radii, "Comma-separated radii of origin balls");
  s_sim->add_option("--threads", so.threads, "Worker cap (0: all cores)")->capture_default_str();
  s_sim->add_flag("--samples", so.samples, "Embed the states at every recorded time");
  s_sim->add_option("--paths-csv", so.paths_csv, "Write recorded states as long-format CSV");
  s_sim->add_option("--record-stride", so.record_stride)->capture_default_str();

  MomentsOpts mo;
  auto* s_mo = app.add_subcommand("verify-moments", "Mean squared norm against the squared Bessel oracle");
  s_mo->add_option("--alpha", mo.alpha)->capture_default_str();
  s_mo->add_option("--d", mo.d)->capture_default_str();
  s_mo->add_option("--x0", mo.x0);
  s_mo->add_option("--n", mo.n)->capture_default_str();
  s_mo->add_option("--t", mo.t)->capture_default_str();
  s_mo->add_option("--dt", mo.dt)->capture_default_str();
  seed_option(s_mo, mo.seed);
  s_mo->add_option("--threads", mo.threads)->capture_default_str();
  s_mo->add_option("--z", mo.z, "Tolerance in standard errors")->capture_default_str();

  HeatKernelOpts ho;
  auto* s_hk = app.add_subcommand("verify-heatkernel", "Fit the heat-kernel envelope constant across times");
  s_hk->add_option("--field", ho.field, "Field JSON (inline or file)");
  s_hk->add_option("--batch", ho.batch, "Stored batch from simulate --samples");
  s_hk->add_option("--x0", ho.x0, "Start (default origin)");
  s_hk->add_option("--n", ho.n)->capture_default_str();
  s_hk->add_option("--times", ho.times)->capture_default_str();
  s_hk->add_option("--dt", ho.dt)->capture_default_str();
  seed_option(s_hk, ho.seed);
  s_hk->add_option("--threads", ho.threads)->capture_default_str();
  s_hk->add_option("--eps", ho.eps)->capture_default_str();
  s_hk->add_option("--z", ho.z)->capture_default_str();
  s_hk->add_option("--bandwidth-scale", ho.bw_scale)->capture_default_str();
  s_hk->add_option("--grid", ho.grid, "Points JSON (inline or file)");
  s_hk->add_option("--max-ratio", ho.max_ratio)->capture_default_str();

  HittingOpts hi;
  auto* s_hit = app.add_subcommand("hitting", "Small-ball hitting fraction against the radial oracle");
  s_hit->add_option("--alpha", hi.alpha)->capture_default_str();
  s_hit->add_option("--d", hi.d)->capture_default_str();
  s_hit->add_option("--r0", hi.r0)->capture_default_str();
  s_hit->add_option("--eps", hi.eps)->capture_default_str();
  s_hit->add_option("--t", hi.t)->capture_default_str();
  s_hit->add_option("--n", hi.n)->capture_default_str();
  s_hit->add_option("--dt", hi.dt)->capture_default_str();
  seed_option(s_hit, hi.seed);
  s_hit->add_option("--threads", hi.threads)->capture_default_str();
  s_hit->add_option("--max-fraction", hi.max_fraction, "Pass when the CI lower bound is at most this");
  s_hit->add_option("--confidence", hi.confidence)->capture_default_str();

  PotentialOpts po;
  auto* s_pot = app.add_subcommand("potentials", "Riesz potentials, resolvent envelope, Hoelder hypotheses");
  s_pot->require_subcommand(1);
  s_pot->fallthrough();
  auto* s_riesz = s_pot->add_subcommand("riesz", "V_eta g at points");
  s_riesz->add_option("--g", po.g, "Source JSON")->required();
  s_riesz->add_option("--eta", po.eta)->capture_default_str();
  s_riesz->add_option("--x", po.xs, "Evaluation point (repeatable)")->required();
  s_riesz->add_option("--rtol", po.rtol)->capture_default_str();
  auto* s_res = s_pot->add_subcommand("resolvent", "Resolvent kernel envelope");
  s_res->add_option("--alpha", po.alpha)->required();
  s_res->add_option("--d", po.d)->capture_default_str();
  s_res->add_option("--x", po.xs)->required();
  s_res->add_option("--y", po.y)->required();
  auto* s_hol = s_pot->add_subcommand("hoelder", "Hypotheses of the Hoelder estimate");
  s_hol->add_option("--g", po.g, "Source JSON")->required();
  s_hol->add_option("--p", po.p)->capture_default_str();
  s_hol->add_option("--eta", po.eta)->capture_default_str();
  s_hol->add_option("--rtol", po.rtol)->capture_default_str();

  OracleOpts oo;
  auto* s_or = app.add_subcommand("oracle", "Closed-form squared Bessel quantities");
  s_or->require_subcommand(1);
  s_or->fallthrough();
  std::string query;
  for (const char* q : {"bessel-dimension", "hits-origin", "besq-mean", "density", "cdf", "ever-hit", "radial-sim"}) {
    auto* s = s_or->add_subcommand(q);
    s->callback([&query, q] { query = q; });
    s->add_option("--d", oo.d)->capture_default_str();
    s->add_option("--alpha", oo.alpha)->capture_default_str();
    s->add_option("--delta", oo.delta, "Bessel dimension (overrides d + alpha)");
    s->add_option("--r0", oo.r0)->capture_default_str();
    s->add_option("--x0", oo.x0, "Start point; its norm replaces --r0");
    s->add_option("--t", oo.t)->capture_default_str();
    s->add_option("--r", oo.r, "Comma-separated radii")->capture_default_str();
    s->add_option("--boundary", oo.boundary, "reflecting | absorbing")->capture_default_str();
    s->add_option("--n", oo.n)->capture_default_str();
    s->add_option("--dt", oo.dt)->capture_default_str();
    seed_option(s, oo.seed);
    s->add_option("--eps", oo.eps)->capture_default_str();
    s->add_option("--hit-radius", oo.hit_radius)->capture_default_str();
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kPass : kInputError;
  }

  try {
    if (s_cw->parsed()) return cmd_check_weight(ctx, cw);
    if (s_cc->parsed()) return cmd_check_conditions(ctx, cc);
    if (s_sim->parsed()) return cmd_simulate(ctx, so);
    if (s_mo->parsed()) return cmd_verify_moments(ctx, mo);
    if (s_hk->parsed()) return cmd_verify_heatkernel(ctx, ho);
    if (s_hit->parsed()) return cmd_hitting(ctx, hi);
    if (s_riesz->parsed()) return cmd_riesz(ctx, po);
    if (s_res->parsed()) return cmd_resolvent(ctx, po);
    if (s_hol->parsed()) return cmd_hoelder(ctx, po);
    if (s_or->parsed()) return cmd_oracle(ctx, query, oo);
  } catch (const SpecError& e) {
    err << json{{"error", "input"}, {"pointer", e.pointer()}, {"message", e.what()}}.dump() << "\n";
    return kInputError;
  } catch (const std::invalid_argument& e) {
    err << json{{"error", "input"}, {"message", e.what()}}.dump() << "\n";
    return kInputError;
  } catch (const SingularPointError& e) {
    err << json{{"error", "input"}, {"message", e.what()}}.dump() << "\n";
    return kInputError;
  } catch (const CoincidentPointsError& e) {
    err << json{{"error", "input"}, {"message", e.what()}}.dump() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << json{{"error", "check"}, {"message", e.what()}}.dump() << "\n";
    return kCheckFailed;
  }
  return kInputError;
}

}  // namespace wdiff::cli
