#include "nsl/metrics.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nsl/error.hpp"

namespace nsl {

using nlohmann::json;

MetricReport compute_metrics(const DepthMap& depth, const DepthMap& depth_gt,
                             const DisparityMap* disp, const DisparityMap* disp_gt,
                             const std::vector<double>& thresholds) {
  if (!depth.values.same_shape(depth_gt.values)) {
    throw ConfigError("compute_metrics: depth shape mismatch");
  }
  MetricReport report;
  double abs_sum = 0.0, sq_sum = 0.0, rel_sum = 0.0;
  std::map<double, std::size_t> delta_counts;
  for (double t : thresholds) delta_counts[t] = 0;

  for (int y = 0; y < depth.values.height(); ++y) {
    for (int x = 0; x < depth.values.width(); ++x) {
      if (!depth.mask.at(x, y) || !depth_gt.mask.at(x, y)) continue;
      const double d = depth.values(x, y);
      const double g = depth_gt.values(x, y);
      if (g <= 0.0) throw ConfigError("compute_metrics: nonpositive ground-truth depth");
      const double err = d - g;
      abs_sum += std::abs(err);
      sq_sum += err * err;
      rel_sum += std::abs(err) / g;
      const double ratio = d > 0.0 ? std::max(d / g, g / d)
                                   : std::numeric_limits<double>::infinity();
      for (double t : thresholds) {
        if (ratio < t) ++delta_counts[t];
      }
      ++report.valid_pixel_count;
    }
  }
  if (report.valid_pixel_count == 0) throw ConfigError("compute_metrics: empty joint mask");

  const double n = static_cast<double>(report.valid_pixel_count);
  report.mae = abs_sum / n;
  report.rmse = std::sqrt(sq_sum / n);
  report.rel = rel_sum / n;
  for (double t : thresholds) report.delta[t] = delta_counts[t] / n;

  if (disp && disp_gt) {
    if (!disp->values.same_shape(disp_gt->values)) {
      throw ConfigError("compute_metrics: disparity shape mismatch");
    }
    double epe_sum = 0.0;
    for (int y = 0; y < disp->values.height(); ++y) {
      for (int x = 0; x < disp->values.width(); ++x) {
        if (!disp->mask.at(x, y) || !disp_gt->mask.at(x, y)) continue;
        epe_sum += std::abs(disp->values(x, y) - disp_gt->values(x, y));
        ++report.epe_pixel_count;
      }
    }
    if (report.epe_pixel_count == 0) throw ConfigError("compute_metrics: empty disparity mask");
    report.epe = epe_sum / static_cast<double>(report.epe_pixel_count);
  }
  return report;
}

MetricReport aggregate(const std::vector<MetricReport>& reports, AggregateWeighting weighting) {
  if (reports.empty()) throw ConfigError("aggregate: empty report list");

  MetricReport out;
  const bool pooled = weighting == AggregateWeighting::kPixelPooled;
  double mae = 0, rmse_sq = 0, rel = 0, epe = 0;
  double weight_sum = 0, epe_weight_sum = 0;
  std::map<double, double> delta_sum;

  for (const auto& r : reports) {
    const double w = pooled ? static_cast<double>(r.valid_pixel_count) : 1.0;
    mae += w * r.mae;
    rmse_sq += w * r.rmse * r.rmse;
    rel += w * r.rel;
    for (const auto& [t, v] : r.delta) delta_sum[t] += w * v;
    weight_sum += w;
    out.valid_pixel_count += r.valid_pixel_count;
    if (r.epe) {
      const double we = pooled ? static_cast<double>(r.epe_pixel_count) : 1.0;
      epe += we * *r.epe;
      epe_weight_sum += we;
      out.epe_pixel_count += r.epe_pixel_count;
    }
  }
  out.mae = mae / weight_sum;
  out.rmse = std::sqrt(rmse_sq / weight_sum);
  out.rel = rel / weight_sum;
  for (auto& [t, v] : delta_sum) out.delta[t] = v / weight_sum;
  if (epe_weight_sum > 0.0) out.epe = epe / epe_weight_sum;
  return out;
}

std::string format_metric_table(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  std::size_t name_width = 6;
  for (const auto& [name, _] : rows) name_width = std::max(name_width, name.size());

  std::ostringstream out;
  auto cell = [&out](const std::string& s) {
    out << s;
    for (std::size_t i = s.size(); i < 10; ++i) out << ' ';
  };
  out << std::string(name_width + 2, ' ').replace(0, 6, "Method");
  for (const char* col : {"MAE(m)", "RMSE", "REL", "d1.25", "d1.10", "d1.05", "EPE"}) cell(col);
  out << '\n';

  char buf[32];
  for (const auto& [name, r] : rows) {
    out << name << std::string(name_width + 2 - name.size(), ' ');
    auto num = [&](double v) {
      std::snprintf(buf, sizeof(buf), "%.4f", v);
      cell(buf);
    };
    num(r.mae);
    num(r.rmse);
    num(r.rel);
    for (double t : {1.25, 1.10, 1.05}) {
      auto it = r.delta.find(t);
      if (it != r.delta.end()) {
        num(it->second);
      } else {
        cell("-");
      }
    }
    if (r.epe) {
      num(*r.epe);
    } else {
      cell("-");
    }
    out << '\n';
  }
  return out.str();
}

std::string metric_report_to_json(const MetricReport& report) {
  json j;
  j["mae"] = report.mae;
  j["rmse"] = report.rmse;
  j["rel"] = report.rel;
  json deltas = json::object();
  for (const auto& [t, v] : report.delta) {
    char key[16];
    std::snprintf(key, sizeof(key), "%.2f", t);
    deltas[key] = v;
  }
  j["delta"] = deltas;
  if (report.epe) j["epe"] = *report.epe;
  j["valid_pixel_count"] = report.valid_pixel_count;
  j["epe_pixel_count"] = report.epe_pixel_count;
  return j.dump(2);
}

MetricReport metric_report_from_json(const std::string& text) {
  json j = json::parse(text);
  MetricReport r;
  r.mae = j.at("mae").get<double>();
  r.rmse = j.at("rmse").get<double>();
  r.rel = j.at("rel").get<double>();
  for (const auto& [key, value] : j.at("delta").items()) {
    r.delta[std::stod(key)] = value.get<double>();
  }
  if (j.contains("epe")) r.epe = j["epe"].get<double>();
  r.valid_pixel_count = j.value("valid_pixel_count", std::size_t{0});
  r.epe_pixel_count = j.value("epe_pixel_count", std::size_t{0});
  return r;
}

}  // namespace nsl
