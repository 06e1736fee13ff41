#include "decotr/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "decotr/errors.hpp"

namespace decotr::metrics {
namespace {

constexpr double kPerKilometre = 1000.0;

std::string format(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::vector<std::string> formatted_values(const MetricsReport& r) {
  return {format(r.rmse),   format(r.mae),    format(r.abs_rel), format(r.irmse), format(r.imae),
          format(r.delta1), format(r.delta2), format(r.delta3),  std::to_string(r.valid_count)};
}

}  // namespace

MetricsReport evaluate(const geometry::DepthMap& pred, const geometry::DepthMap& gt, double max_depth) {
  if (pred.height != gt.height || pred.width != gt.width || pred.size() != gt.size()) {
    throw DimensionError("prediction " + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                         " does not match ground truth " + std::to_string(gt.height) + "x" + std::to_string(gt.width));
  }
  if (!(max_depth > 0.0)) throw ContractError("max_depth must be positive");

  double sq = 0.0, abs = 0.0, rel = 0.0, isq = 0.0, iabs = 0.0;
  std::size_t n = 0, d1 = 0, d2 = 0, d3 = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double t = gt.values[i];
    if (!(t > 0.0) || t > max_depth) continue;
    const double d = pred.values[i];
    if (!(d > 0.0)) throw ContractError("prediction must be positive at every evaluated pixel");
    const double e = d - t;
    sq += e * e;
    abs += std::fabs(e);
    rel += std::fabs(e) / t;
    const double ie = kPerKilometre / d - kPerKilometre / t;
    isq += ie * ie;
    iabs += std::fabs(ie);
    const double ratio = std::max(d / t, t / d);
    d1 += ratio < 1.25;
    d2 += ratio < 1.25 * 1.25;
    d3 += ratio < 1.25 * 1.25 * 1.25;
    ++n;
  }
  if (n == 0) throw ContractError("no ground-truth pixel in (0, max_depth]");

  const double count = static_cast<double>(n);
  MetricsReport r;
  r.rmse = std::sqrt(sq / count);
  r.mae = abs / count;
  r.abs_rel = rel / count;
  r.irmse = std::sqrt(isq / count);
  r.imae = iabs / count;
  r.delta1 = 100.0 * static_cast<double>(d1) / count;
  r.delta2 = 100.0 * static_cast<double>(d2) / count;
  r.delta3 = 100.0 * static_cast<double>(d3) / count;
  r.valid_count = n;
  return r;
}

MetricsReport aggregate(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw ContractError("nothing to aggregate");
  double sq = 0.0, abs = 0.0, rel = 0.0, isq = 0.0, iabs = 0.0, d1 = 0.0, d2 = 0.0, d3 = 0.0;
  std::size_t n = 0;
  for (const MetricsReport& r : reports) {
    const double w = static_cast<double>(r.valid_count);
    sq += r.rmse * r.rmse * w;
    abs += r.mae * w;
    rel += r.abs_rel * w;
    isq += r.irmse * r.irmse * w;
    iabs += r.imae * w;
    d1 += r.delta1 * w;
    d2 += r.delta2 * w;
    d3 += r.delta3 * w;
    n += r.valid_count;
  }
  if (n == 0) throw ContractError("reports hold no evaluated pixel");
  const double count = static_cast<double>(n);
  return {std::sqrt(sq / count), abs / count, rel / count, std::sqrt(isq / count), iabs / count,
          d1 / count,            d2 / count,  d3 / count,  n};
}

const std::vector<std::string>& report_fields() {
  static const std::vector<std::string> fields{"rmse",  "mae",    "abs_rel", "irmse",      "imae",
                                               "delta1", "delta2", "delta3", "valid_count"};
  return fields;
}

std::string csv_header() {
  std::string out;
  for (const std::string& f : report_fields()) out += (out.empty() ? "" : ",") + f;
  return out;
}

std::string csv_row(const MetricsReport& report) {
  std::string out;
  for (const std::string& v : formatted_values(report)) out += (out.empty() ? "" : ",") + v;
  return out;
}

std::string report_to_csv(const MetricsReport& report) { return csv_header() + "\n" + csv_row(report) + "\n"; }

std::string report_to_json(const MetricsReport& report) {
  const auto values = formatted_values(report);
  const auto& fields = report_fields();
  std::string out = "{\n";
  for (std::size_t i = 0; i < fields.size(); ++i) {
    out += "  \"" + fields[i] + "\": " + values[i] + (i + 1 < fields.size() ? ",\n" : "\n");
  }
  return out + "}\n";
}

MetricsReport report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed metrics report: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("metrics report must be a JSON object");
  const auto& fields = report_fields();
  for (const auto& [key, value] : j.items()) {
    if (std::find(fields.begin(), fields.end(), key) == fields.end()) {
      throw ConfigError("unknown metrics field '" + key + "'");
    }
    if (!value.is_number()) throw ConfigError("metrics field '" + key + "' must be a number");
  }
  for (const std::string& f : fields) {
    if (!j.contains(f)) throw ConfigError("metrics report lacks '" + f + "'");
  }
  if (!j["valid_count"].is_number_unsigned()) throw ConfigError("valid_count must be a non-negative integer");
  MetricsReport r;
  r.rmse = j["rmse"].get<double>();
  r.mae = j["mae"].get<double>();
  r.abs_rel = j["abs_rel"].get<double>();
  r.irmse = j["irmse"].get<double>();
  r.imae = j["imae"].get<double>();
  r.delta1 = j["delta1"].get<double>();
  r.delta2 = j["delta2"].get<double>();
  r.delta3 = j["delta3"].get<double>();
  r.valid_count = j["valid_count"].get<std::size_t>();
  return r;
}

}  // namespace decotr::metrics
