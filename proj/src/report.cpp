#include <fstream>
#include <sstream>

#include <json.hpp>

#include "depthkit/error.hpp"
#include "depthkit/filterpipe.hpp"
#include "depthkit/util/atomic_file.hpp"
#include "depthkit/util/csv.hpp"

namespace depthkit {
namespace {

using nlohmann::json;

constexpr const char* kReportHeader = "dataset,total,good,bad,mean_s_dist,mean_s_grad,mean_s_total";

std::string policy_comment(const FilterPolicy& p) {
  std::ostringstream ss;
  ss << "# grouping=" << to_string(p.grouping) << " cut_mode=" << to_string(p.cut_mode)
     << " valid_ratio_min=" << csv::number(p.valid_ratio_min)
     << " cut_fraction=" << csv::number(p.cut_fraction) << " bins=" << p.quality.bins
     << " range=" << (p.quality.range == HistogramRange::kFixed ? "fixed" : "per_sample");
  if (p.quality.range == HistogramRange::kFixed) {
    ss << " lo=" << csv::number(p.quality.lo) << " hi=" << csv::number(p.quality.hi);
  }
  ss << " far_plane=" << csv::number(p.far_plane);
  return ss.str();
}

std::string csv_row(const DatasetRow& r) {
  return csv::join({csv::field(r.dataset), std::to_string(r.total), std::to_string(r.good),
                    std::to_string(r.bad), csv::number(r.mean_s_dist), csv::number(r.mean_s_grad),
                    csv::number(r.mean_s_total)});
}

// JSON carries the same rounded values as the CSV so both encodings agree exactly.
double rounded(double v) { return csv::parse_number(csv::number(v)); }

json json_row(const DatasetRow& r) {
  return json{{"dataset", r.dataset},
              {"total", r.total},
              {"good", r.good},
              {"bad", r.bad},
              {"mean_s_dist", rounded(r.mean_s_dist)},
              {"mean_s_grad", rounded(r.mean_s_grad)},
              {"mean_s_total", rounded(r.mean_s_total)}};
}

}  // namespace

std::string format_report(const FilterReport& report, ReportFormat format) {
  if (format == ReportFormat::kCsv) {
    std::string out = policy_comment(report.policy) + "\n" + kReportHeader + "\n";
    for (const auto& r : report.rows) out += csv_row(r) + "\n";
    out += csv_row(report.summary) + "\n";
    return out;
  }
  const FilterPolicy& p = report.policy;
  json policy{{"grouping", std::string(to_string(p.grouping))},
              {"cut_mode", std::string(to_string(p.cut_mode))},
              {"valid_ratio_min", p.valid_ratio_min},
              {"cut_fraction", p.cut_fraction},
              {"bins", p.quality.bins},
              {"range", p.quality.range == HistogramRange::kFixed ? "fixed" : "per_sample"},
              {"far_plane", p.far_plane}};
  if (p.quality.range == HistogramRange::kFixed) {
    policy["lo"] = p.quality.lo;
    policy["hi"] = p.quality.hi;
  }
  json rows = json::array();
  for (const auto& r : report.rows) rows.push_back(json_row(r));
  json doc{{"policy", policy}, {"rows", rows}, {"summary", json_row(report.summary)}};
  return doc.dump(2) + "\n";
}

void emit_report(const FilterReport& report, const std::filesystem::path& path, ReportFormat format) {
  write_file_atomic(path, format_report(report, format));
}

std::string format_scores_csv(std::span<const SampleRecord> records) {
  std::string out = std::string(kScoresHeader) + "\n";
  for (const auto& r : records) {
    const auto& s = r.scores;
    out += csv::join({csv::field(s.id), csv::field(s.dataset), csv::exact(s.valid_ratio),
                      csv::exact(s.s_chi2), csv::exact(s.s_conc), csv::exact(s.s_range),
                      csv::exact(s.s_dist), csv::exact(s.s_grad), csv::exact(s.s_total),
                      r.kept ? "1" : "0", r.drop_reason});
    out += '\n';
  }
  return out;
}

void write_scores_csv(const std::filesystem::path& path, std::span<const SampleRecord> records) {
  write_file_atomic(path, format_scores_csv(records));
}

std::vector<SampleRecord> parse_scores_csv(std::string_view text) {
  std::vector<SampleRecord> records;
  std::size_t line_no = 0;
  std::size_t start = 0;
  bool header_seen = false;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kScoresHeader) {
        throw FormatError("scores line " + std::to_string(line_no) + ": unexpected header");
      }
      header_seen = true;
      continue;
    }
    const auto f = csv::split(line);
    if (f.size() != 11) {
      throw FormatError("scores line " + std::to_string(line_no) + ": expected 11 fields, got " +
                        std::to_string(f.size()));
    }
    SampleRecord r;
    try {
      r.scores.id = f[0];
      r.scores.dataset = f[1];
      r.scores.valid_ratio = csv::parse_number(f[2]);
      r.scores.s_chi2 = csv::parse_number(f[3]);
      r.scores.s_conc = csv::parse_number(f[4]);
      r.scores.s_range = csv::parse_number(f[5]);
      r.scores.s_dist = csv::parse_number(f[6]);
      r.scores.s_grad = csv::parse_number(f[7]);
      r.scores.s_total = csv::parse_number(f[8]);
    } catch (const FormatError& e) {
      throw FormatError("scores line " + std::to_string(line_no) + ": " + e.what());
    }
    r.kept = f[9] == "1";
    r.drop_reason = f[10];
    if (r.drop_reason == "error") r.error = "sample failed to load during audit";
    records.push_back(std::move(r));
  }
  if (!header_seen) throw FormatError("scores file has no header");
  return records;
}

std::vector<SampleRecord> read_scores_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open scores file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scores_csv(ss.str());
}

}  // namespace depthkit
