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

#include "xppa/report.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <fmt/format.h>

#include "xppa/error.h"

namespace xppa {
namespace {

constexpr int kWidth = 760;
constexpr int kLabelWidth = 300;
constexpr int kPlotWidth = 420;
constexpr int kBarHeight = 18;
constexpr int kBarGap = 6;
constexpr int kTop = 28;
constexpr int kAxisHeight = 36;

std::string Escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string Fixed(double v) { return fmt::format("{:.2f}", v); }

// Fill for positive (increasing) and negative (decreasing) bars.
std::string BarColor(double value, double shade) {
  const double t = 0.3 + 0.7 * std::clamp(shade, 0.0, 1.0);
  int r, g, b;
  if (value >= 0) {
    r = static_cast<int>(std::lround(255 - t * (255 - 178)));
    g = static_cast<int>(std::lround(255 - t * (255 - 24)));
    b = static_cast<int>(std::lround(255 - t * (255 - 43)));
  } else {
    r = static_cast<int>(std::lround(255 - t * (255 - 33)));
    g = static_cast<int>(std::lround(255 - t * (255 - 102)));
    b = static_cast<int>(std::lround(255 - t * (255 - 172)));
  }
  return fmt::format("#{:02x}{:02x}{:02x}", r, g, b);
}

std::vector<double> Ticks(double limit) {
  return {-limit, -limit / 2, 0.0, limit / 2, limit};
}

std::string SignedNumber(double v) {
  const std::string s = FormatNumber(v);
  return v > 0 ? "+" + s : s;
}

std::vector<GlobalExplanation> Filtered(std::vector<GlobalExplanation> globals,
                                        const ReportOptions& options) {
  if (options.filter_label) {
    std::erase_if(globals, [&](const GlobalExplanation& g) {
      return g.label.find(*options.filter_label) == std::string::npos;
    });
  }
  auto key = [&](const GlobalExplanation& g) {
    return std::abs(options.sort == SortKey::kMean ? g.mean_influence
                                                   : g.median_influence);
  };
  std::stable_sort(globals.begin(), globals.end(),
                   [&](const GlobalExplanation& a, const GlobalExplanation& b) {
                     return key(a) > key(b);
                   });
  return globals;
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("report", fmt::format("cannot write {}", path.string()));
  out << text;
}

const char* kStyle = R"(<style>
body { font-family: sans-serif; margin: 2em; color: #222; }
table { border-collapse: collapse; }
td, th { padding: 2px 10px; text-align: left; border-bottom: 1px solid #ddd; }
.note { color: #666; font-size: 0.9em; }
.derived { border-left: 4px solid #bbb; padding-left: 1em; margin-top: 2em; }
</style>
)";

std::string ChartSection(const std::vector<Bar>& bars,
                         const ChartOptions& options) {
  if (bars.empty()) return "<p class=\"note\">No explanations.</p>\n";
  return RenderBarChart(bars, options);
}

}  // namespace

std::string RenderBarChart(const std::vector<Bar>& bars,
                           const ChartOptions& options) {
  const std::size_t n = std::min(bars.size(), std::max<std::size_t>(1, options.top_n));
  double limit = 1.0;
  if (!options.boolean) {
    double max_abs = 0;
    for (std::size_t i = 0; i < n; ++i) max_abs = std::max(max_abs, std::abs(bars[i].value));
    limit = max_abs > 0 ? max_abs : 1.0;
  }
  const double zero_x = kLabelWidth + kPlotWidth / 2.0;
  const double half = kPlotWidth / 2.0;
  const int height = kTop + static_cast<int>(n) * (kBarHeight + kBarGap) + kAxisHeight;

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
      "viewBox=\"0 0 {} {}\" font-family=\"sans-serif\" font-size=\"12\">\n",
      kWidth, height, kWidth, height);
  svg += fmt::format(
      "<text x=\"{}\" y=\"16\" text-anchor=\"middle\" fill=\"#555\">decreases "
      "KPI | increases KPI</text>\n",
      Fixed(zero_x));
  const int axis_y = kTop + static_cast<int>(n) * (kBarHeight + kBarGap);
  for (double t : Ticks(limit)) {
    const double x = zero_x + t / limit * half;
    svg += fmt::format(
        "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#e5e5e5\"/>\n",
        Fixed(x), kTop - 4, axis_y);
    svg += fmt::format(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"#555\">{}</text>\n",
        Fixed(x), axis_y + 14, Escape(SignedNumber(t)));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Bar& b = bars[i];
    const int y = kTop + static_cast<int>(i) * (kBarHeight + kBarGap);
    const double len = std::min(1.0, std::abs(b.value) / limit) * half;
    const double x = b.value >= 0 ? zero_x : zero_x - len;
    svg += fmt::format(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
        kLabelWidth - 8, y + 13, Escape(b.label));
    svg += fmt::format(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"><title>{}: "
        "{}</title></rect>\n",
        Fixed(x), y, Fixed(len), kBarHeight, BarColor(b.value, b.shade),
        Escape(b.label), Escape(SignedNumber(b.value)));
    const double text_x = b.value >= 0 ? x + len + 4 : x - 4;
    svg += fmt::format(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"{}\" fill=\"#333\">{}</text>\n",
        Fixed(text_x), y + 13, b.value >= 0 ? "start" : "end",
        Escape(SignedNumber(b.value)));
  }
  svg += fmt::format(
      "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#333\"/>\n",
      Fixed(zero_x), kTop - 4, axis_y);
  svg += fmt::format(
      "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"#555\">{}</text>\n",
      Fixed(zero_x), axis_y + 30,
      Escape(options.boolean ? "influence on [-1, +1]" : "influence (" + options.unit + ")"));
  svg += "</svg>\n";
  return svg;
}

std::string RenderGlobalChart(const std::vector<GlobalExplanation>& globals,
                              const ChartOptions& options) {
  std::vector<std::size_t> counts;
  for (const auto& g : globals) counts.push_back(g.count);
  std::sort(counts.begin(), counts.end());
  std::vector<Bar> bars;
  for (const auto& g : globals) {
    const auto below = static_cast<double>(
        std::lower_bound(counts.begin(), counts.end(), g.count) - counts.begin());
    const double shade =
        counts.size() <= 1 ? 1.0 : below / static_cast<double>(counts.size() - 1);
    bars.push_back(
        {g.label, options.use_median ? g.median_influence : g.mean_influence, shade});
  }
  return RenderBarChart(bars, options);
}

std::string FormatDelta(double delta) {
  const double a = std::abs(delta);
  const std::string body =
      a >= 1 || a == 0 ? fmt::format("{:+.1f}", delta) : fmt::format("{:+.3f}", delta);
  return body + " vs AVG";
}

std::string RenderCasePanel(const CaseExplanation& c,
                            const ReportContext& context) {
  std::vector<Bar> process, derived;
  double sum = 0;
  std::vector<Explanation> sorted = c.explanations;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Explanation& a, const Explanation& b) {
                     return std::abs(a.shapley_value) > std::abs(b.shapley_value);
                   });
  for (const Explanation& e : sorted) {
    sum += e.shapley_value;
    (e.derived ? derived : process).push_back({e.label, e.shapley_value, 1.0});
  }
  ChartOptions chart = context.chart;
  chart.top_n = std::max(process.size(), derived.size());
  const std::string unit = context.chart.boolean ? "" : " " + context.chart.unit;
  const std::string id = c.vector.provenance.case_id;
  std::string html = "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">\n";
  html += fmt::format("<title>Case {}</title>\n", Escape(id));
  html += kStyle;
  html += "</head><body>\n";
  html += fmt::format("<h1>Case {}</h1>\n", Escape(id));
  html += "<table>\n";
  html += fmt::format("<tr><th>Prefix length</th><td>{}</td></tr>\n",
                      c.vector.provenance.prefix_length);
  html += fmt::format("<tr><th>Last activity</th><td>{}</td></tr>\n",
                      Escape(c.last_activity));
  html += fmt::format("<tr><th>Current KPI</th><td>{}</td></tr>\n",
                      c.current_kpi ? FormatNumber(*c.current_kpi) + unit : "n/a");
  html += fmt::format("<tr><th>Predicted final KPI</th><td>{}{} ({})</td></tr>\n",
                      FormatNumber(c.predicted_final), unit,
                      FormatDelta(c.delta_vs_average));
  html += fmt::format("<tr><th>Prediction</th><td>{}</td></tr>\n",
                      FormatNumber(c.vector.prediction));
  html += fmt::format("<tr><th>Base value</th><td>{}</td></tr>\n",
                      FormatNumber(c.vector.base_value));
  html += "</table>\n<h2>Influencers</h2>\n";
  html += ChartSection(process, chart);
  if (!derived.empty()) {
    html += "<div class=\"derived\">\n<h2>Derived attributes</h2>\n";
    html += "<p class=\"note\">Computed from the trace (elapsed time, weekday, "
            "running totals), not recorded on events.</p>\n";
    html += ChartSection(derived, chart);
    html += "</div>\n";
  }
  html += fmt::format(
      "<p class=\"note\">Sum of bars: {} (prediction - base value: {})</p>\n",
      SignedNumber(sum), SignedNumber(c.vector.prediction - c.vector.base_value));
  html += "<p><a href=\"../index.html\">Back to overview</a></p>\n";
  html += "</body></html>\n";
  return html;
}

std::string SafeFileName(const std::string& id) {
  std::string out;
  for (unsigned char ch : id) {
    if (std::isalnum(ch) || ch == '-' || ch == '.') {
      out += static_cast<char>(ch);
    } else {
      out += fmt::format("_{:02X}", ch);
    }
  }
  if (out.empty() || out[0] == '.') out = "_" + out;
  return out;
}

ReportInputs LoadReportInputs(const std::filesystem::path& dir) {
  ReportInputs in;
  const ModelBundle bundle = ModelBundle::FromJson(ReadJsonFile(dir / "model.json"));
  in.context.kpi = bundle.kpi;
  const bool boolean = bundle.kpi.value_kind == KpiValueKind::kBoolean;
  in.context.chart.boolean = boolean;
  in.context.chart.unit = boolean ? "probability" : KpiDisplayUnit(bundle.kpi);
  in.context.average_final_kpi =
      bundle.average_final_kpi * (boolean ? 1.0 : KpiDisplayScale(bundle.kpi));
  in.globals = GlobalExplanationsFromJson(ReadJsonFile(dir / "global.json"));
  for (const auto& j : ReadJsonFile(dir / "explanations.json")) {
    in.locals.push_back(CaseExplanationFromJson(j));
  }
  if (std::filesystem::exists(dir / "report.json")) {
    in.run_report = ReadJsonFile(dir / "report.json");
  }
  return in;
}

void WriteReport(const ReportInputs& inputs, const ReportOptions& options,
                 const std::filesystem::path& report_dir) {
  const std::vector<GlobalExplanation> globals = Filtered(inputs.globals, options);
  std::vector<GlobalExplanation> process, derived;
  for (const auto& g : globals) (g.derived ? derived : process).push_back(g);
  ChartOptions chart = inputs.context.chart;
  chart.top_n = options.top_n;
  chart.use_median = options.sort == SortKey::kMedian;

  std::filesystem::create_directories(report_dir / "cases");
  if (process.empty()) {
    WriteText(report_dir / "global.svg", RenderBarChart({}, chart));
  } else {
    WriteText(report_dir / "global.svg", RenderGlobalChart(process, chart));
  }
  if (!derived.empty()) {
    WriteText(report_dir / "global_derived.svg", RenderGlobalChart(derived, chart));
  }

  // Longest explained prefix per case, in first-seen order.
  std::vector<std::string> order;
  std::map<std::string, const CaseExplanation*> latest;
  for (const CaseExplanation& c : inputs.locals) {
    const std::string& id = c.vector.provenance.case_id;
    auto [it, inserted] = latest.emplace(id, &c);
    if (inserted) {
      order.push_back(id);
    } else if (c.vector.provenance.prefix_length >
               it->second->vector.provenance.prefix_length) {
      it->second = &c;
    }
  }

  std::string rows;
  for (const std::string& id : order) {
    CaseExplanation c = *latest.at(id);
    if (options.filter_label) {
      std::erase_if(c.explanations, [&](const Explanation& e) {
        return e.label.find(*options.filter_label) == std::string::npos;
      });
      if (c.explanations.empty()) continue;
    }
    const std::string file = SafeFileName(id) + ".html";
    WriteText(report_dir / "cases" / file, RenderCasePanel(c, inputs.context));
    rows += fmt::format(
        "<tr><td><a href=\"cases/{}\">{}</a></td><td>{}</td><td>{}</td>"
        "<td>{}</td><td>{}</td></tr>\n",
        file, Escape(id), Escape(c.last_activity),
        c.current_kpi ? FormatNumber(*c.current_kpi) : "n/a",
        FormatNumber(c.predicted_final), FormatDelta(c.delta_vs_average));
  }

  const std::string unit = inputs.context.chart.unit;
  std::string html = "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">\n";
  html += "<title>Prediction explanations</title>\n";
  html += kStyle;
  html += "</head><body>\n<h1>Prediction explanations</h1>\n";
  html += fmt::format("<p>KPI: {} {} ({})</p>\n",
                      Escape(std::string(KpiKindName(inputs.context.kpi.kind))),
                      Escape(inputs.context.kpi.target), Escape(unit));
  const nlohmann::json& r = inputs.run_report;
  if (r.is_object()) {
    html += "<h2>Overview</h2>\n<table>\n";
    const auto& s = r.at("log_stats");
    html += fmt::format("<tr><th>Traces</th><td>{}</td></tr>\n", s.at("n_traces").dump());
    html += fmt::format("<tr><th>Events</th><td>{}</td></tr>\n", s.at("n_events").dump());
    html += fmt::format("<tr><th>Activities</th><td>{}</td></tr>\n",
                        s.at("n_activities").dump());
    html += fmt::format("<tr><th>Mean events per trace</th><td>{}</td></tr>\n",
                        FormatNumber(s.at("mean_events_per_trace").get<double>()));
    const auto& e = r.at("evaluation");
    html += fmt::format("<tr><th>Test {}</th><td>{}</td></tr>\n",
                        Escape(e.at("metric").get<std::string>()),
                        FormatNumber(e.at("test_score").get<double>()));
    html += fmt::format("<tr><th>Baseline {}</th><td>{}</td></tr>\n",
                        Escape(e.at("metric").get<std::string>()),
                        FormatNumber(e.at("baseline_score").get<double>()));
    html += fmt::format("<tr><th>History</th><td>{}</td></tr>\n",
                        Escape(r.at("final_model").at("history").get<std::string>()));
    html += "</table>\n";
  }
  html += fmt::format(
      "<h2>Global influencers</h2>\n<p class=\"note\">Mean signed influence "
      "over the explained prefixes carrying each label, sorted by |{}|. Darker "
      "bars are carried by more prefixes.</p>\n",
      options.sort == SortKey::kMean ? "mean" : "median");
  html += "<img src=\"global.svg\" alt=\"global influencers\">\n";
  if (!derived.empty()) {
    html += "<div class=\"derived\">\n<h2>Derived attributes</h2>\n";
    html += "<p class=\"note\">Computed from the trace (elapsed time, weekday, "
            "running totals), not recorded on events.</p>\n";
    html += "<img src=\"global_derived.svg\" alt=\"derived attributes\">\n</div>\n";
  }
  html += "<h2>Cases</h2>\n<table>\n<tr><th>Case</th><th>Last activity</th>"
          "<th>Current</th><th>Expected</th><th>Expected vs AVG</th></tr>\n";
  html += rows;
  html += "</table>\n</body></html>\n";
  WriteText(report_dir / "index.html", html);
}

}  // namespace xppa
