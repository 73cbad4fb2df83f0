/*
 * Copyright 2026 The xppa Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef XPPA_REPORT_H_
#define XPPA_REPORT_H_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "xppa/kpi.h"
#include "xppa/pipeline.h"
#include "xppa/shapley.h"

namespace xppa {

struct ChartOptions {
  std::size_t top_n = 15;
  // Axis caption, e.g. "days".
  std::string unit;
  // Fixes the axis to [-1, +1].
  bool boolean = false;
  // Global charts draw the median instead of the mean.
  bool use_median = false;
};

struct Bar {
  std::string label;
  double value = 0;
  // 0 (lightest) .. 1 (darkest).
  double shade = 1;
};

// Horizontal signed bars, left for negative values and right for positive.
std::string RenderBarChart(const std::vector<Bar>& bars,
                           const ChartOptions& options);

// Top-N labels by the list order; shade is the count quantile.
std::string RenderGlobalChart(const std::vector<GlobalExplanation>& globals,
                              const ChartOptions& options);

// "+2.0 vs AVG".
std::string FormatDelta(double delta);

struct ReportContext {
  KpiSpec kpi;
  ChartOptions chart;
  // Mean final KPI of the training traces in display units.
  double average_final_kpi = 0;
};

// HTML page for one explained prefix.
std::string RenderCasePanel(const CaseExplanation& c,
                            const ReportContext& context);

struct ReportOptions {
  SortKey sort = SortKey::kMean;
  // Keeps only labels containing this text.
  std::optional<std::string> filter_label;
  std::size_t top_n = 15;
};

struct ReportInputs {
  ReportContext context;
  std::vector<GlobalExplanation> globals;
  std::vector<CaseExplanation> locals;
  // Optional report.json content for the overview section.
  nlohmann::json run_report;
};

// Reads report.json (optional), model.json, global.json and
// explanations.json from `artifact_dir`.
ReportInputs LoadReportInputs(const std::filesystem::path& artifact_dir);

// Writes index.html, global.svg, global_derived.svg (when derived labels
// exist) and cases/<id>.html under `report_dir`. Each case panel shows the
// longest explained prefix of that case.
void WriteReport(const ReportInputs& inputs, const ReportOptions& options,
                 const std::filesystem::path& report_dir);

// File-name-safe version of a case id.
std::string SafeFileName(const std::string& id);

}  // namespace xppa

#endif  // XPPA_REPORT_H_
