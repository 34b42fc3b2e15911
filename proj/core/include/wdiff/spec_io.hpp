#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "wdiff/estimators.hpp"
#include "wdiff/forms.hpp"
#include "wdiff/oracle.hpp"
#include "wdiff/sde.hpp"
#include "wdiff/weights.hpp"

/// JSON documents for weights, fields and reports.
///
/// Parsers throw SpecError carrying a JSON pointer to the offending key.
namespace wdiff::io {

using json = nlohmann::json;

/// {"kind":"constant","c":..} | {"kind":"linear","v":[..]} |
/// {"kind":"log_norm","scale":..} | {"kind":"sine_ripple","amplitude":..,"k":[..]} |
/// {"kind":"norm_power","alpha":..}
ScalarField parse_scalar_field(const json& j, const std::string& ptr = "");

/// {"kind":"power","alpha":..,"dim":..} | {"kind":"exponential","dim":..,"phi":{field}} |
/// {"kind":"product","multiplier":{field},"bound":c,"base":{weight}} |
/// {"kind":"custom","dim":..,"density":{field}}
Weight parse_weight(const json& j, const std::string& ptr = "");

/// {"kind":"isotropic_power","alpha":..,"dim":..} |
/// {"kind":"power_times_const_spd","alpha":..,"matrix":[[..]]} |
/// {"kind":"power_radial_anisotropic","alpha":..,"dim":..,"b":..} |
/// {"kind":"exponential_isotropic","dim":..,"phi":{field}} |
/// {"kind":"custom","id":"<registered id>"}
/// An optional "policy" ("zero_at_singularity" | "error") is read by parse_coefficients.
DiffusionField parse_field(const json& j, const std::string& ptr = "");
SdeCoefficients parse_coefficients(const json& j, const std::string& ptr = "");

/// Registry for fields that cannot be described by parameters alone.
using FieldFactory = std::function<DiffusionField()>;
void register_custom_field(const std::string& id, FieldFactory factory);
std::vector<std::string> custom_field_ids();

/// {"kind":"indicator_ball","center":[..],"radius":r} |
/// {"kind":"field","field":{scalar field},"ball":{"center":[..],"radius":r}} |
/// {"kind":"field","field":{..},"box":{"lo":[..],"hi":[..]}} | {"kind":"zero","dim":d}
RieszSource parse_riesz_source(const json& j, const std::string& ptr = "");

/// Points given as [[..],..] or {"points":[[..],..]}.
std::vector<Vec> parse_points(const json& j, const std::string& ptr = "");

/// "1,0,0" -> (1,0,0). Throws SpecError("/" + name) on malformed input.
Vec parse_vector(const std::string& text, const std::string& name);
std::vector<double> parse_list(const std::string& text, const std::string& name);

/// Read a JSON document given inline ("{...}") or as a file path.
json load_document(const std::string& inline_or_path, const std::string& name);

json to_json(const Vec& v);
json to_json(const Interval& iv);
json to_json(const WeightClassReport& r);
json to_json(const EllipticityEstimate& e);
json to_json(const ExponentWindow& w);
json to_json(const LocalNormReport& r);
json to_json(const ConditionReport& r);
json to_json(const SimConfig& c);
json to_json(const HittingStats& s);
json to_json(const MomentSummary& m);
json to_json(const DensityEstimate& d);
json to_json(const EnvelopeReport& r);
json to_json(const EnvelopeStability& s);
json to_json(const HoelderReport& r);
json to_json(const quad::Result& r);

/// Batch summary: configuration, counts, digest, moments at every recorded
/// time. With `with_samples`, the states at every recorded time are embedded
/// so that the density checks can run from the file alone.
json batch_to_json(const PathBatch& b, const json& field_spec, bool with_samples);

/// States at recorded times, as stored by batch_to_json.
struct StoredBatch {
  json field_spec;
  Vec x0;
  std::size_t n_total = 0;
  std::uint64_t master_seed = 0;
  std::map<double, std::vector<Vec>> samples;
};
StoredBatch parse_stored_batch(const json& j);

/// JSON number that maps non-finite values to strings ("inf", "-inf", "nan").
json number(double v);

}  // namespace wdiff::io
