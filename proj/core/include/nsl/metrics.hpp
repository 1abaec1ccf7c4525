#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nsl/geometry.hpp"

namespace nsl {

// Depth thresholds follow the usual convention: fraction of pixels with
// max(D/D*, D*/D) strictly below tau.
inline const std::vector<double> kDefaultDeltaThresholds = {1.25, 1.10, 1.05};

struct MetricReport {
  double mae = 0.0;   // meters
  double rmse = 0.0;  // meters
  double rel = 0.0;
  std::map<double, double> delta;  // threshold -> fraction
  std::optional<double> epe;       // pixels, present when disparities were given
  std::size_t valid_pixel_count = 0;
  std::size_t epe_pixel_count = 0;
};

// All statistics over the joint valid mask of prediction and ground truth.
// Throws on an empty joint mask or nonpositive ground-truth depth inside it.
MetricReport compute_metrics(const DepthMap& depth, const DepthMap& depth_gt,
                             const DisparityMap* disp = nullptr,
                             const DisparityMap* disp_gt = nullptr,
                             const std::vector<double>& thresholds = kDefaultDeltaThresholds);

enum class AggregateWeighting { kPerImageMean, kPixelPooled };

MetricReport aggregate(const std::vector<MetricReport>& reports, AggregateWeighting weighting);

// Aligned text table, one row per entry, columns in the order
// MAE RMSE REL d1.25 d1.10 d1.05 EPE.
std::string format_metric_table(const std::vector<std::pair<std::string, MetricReport>>& rows);

std::string metric_report_to_json(const MetricReport& report);
MetricReport metric_report_from_json(const std::string& text);

}  // namespace nsl
