#pragma once

#include <map>
#include <string>
#include <vector>

#include "cmet/eval.hpp"
#include "cmet/trainer.hpp"

namespace cmet {

// CSV files are the authoritative record; the SVGs are a convenience view
// rendered from the same rows. Nothing here embeds timestamps or hostnames,
// so regenerating a report from identical inputs is byte-identical. The
// metrics SVG deliberately omits the wall-time column for the same reason.

void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows);
void write_metrics_svg(const std::string& path, const std::vector<MetricRow>& rows);

void write_confusion_csv(const std::string& path, const std::vector<std::string>& emotions,
                         const std::vector<long long>& confusion);
void write_confusion_svg(const std::string& path, const std::vector<std::string>& emotions,
                         const std::vector<long long>& confusion);

void write_kshot_csv(const std::string& path, const std::vector<KshotRow>& rows);
void write_kshot_svg(const std::string& path, const std::vector<KshotRow>& rows);

void write_sampler_audit_csv(const std::string& path, const std::vector<std::string>& emotions,
                             const std::map<std::pair<int, int>, long long>& counts);

// Convenience bundle: metrics.csv/svg (+ confusion / kshot when present).
void emit_report(const std::string& dir, const std::vector<MetricRow>& metrics,
                 const std::vector<std::string>& emotions, const std::vector<long long>* confusion,
                 const std::vector<KshotRow>* kshot);

}  // namespace cmet
