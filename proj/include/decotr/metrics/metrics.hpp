#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "decotr/geometry/camera.hpp"

namespace decotr::metrics {

/// Depth-completion error metrics over the valid ground-truth pixels.
struct MetricsReport {
  double rmse = 0.0;     // m
  double mae = 0.0;      // m
  double abs_rel = 0.0;
  double irmse = 0.0;    // 1/km
  double imae = 0.0;     // 1/km
  double delta1 = 0.0;   // percent of pixels with max(d/d*, d*/d) < 1.25
  double delta2 = 0.0;   // ... < 1.25^2
  double delta3 = 0.0;   // ... < 1.25^3
  std::size_t valid_count = 0;

  bool operator==(const MetricsReport&) const = default;
};

/// Ground-truth pixels with 0 < gt <= max_depth are evaluated; predictions are
/// not clipped. Throws DimensionError on size mismatch, ContractError when
/// max_depth <= 0, no pixel is valid, or a prediction at a valid pixel is not
/// positive.
MetricsReport evaluate(const geometry::DepthMap& pred, const geometry::DepthMap& gt, double max_depth);

/// Pixel-weighted combination of per-scene reports; equal to evaluating all
/// pixels of all scenes at once. Throws ContractError on an empty list.
MetricsReport aggregate(const std::vector<MetricsReport>& reports);

/// Field names in serialization order.
const std::vector<std::string>& report_fields();

/// "rmse,mae,...,valid_count" followed by one row; values use 6 significant
/// digits.
std::string report_to_csv(const MetricsReport& report);
std::string csv_header();
std::string csv_row(const MetricsReport& report);

/// JSON object with the fields in report_fields() order, 6 significant digits.
std::string report_to_json(const MetricsReport& report);
/// Throws ConfigError on malformed input, missing or unknown fields.
MetricsReport report_from_json(const std::string& text);

}  // namespace decotr::metrics
