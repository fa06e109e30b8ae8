#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "depthkit/depthio.hpp"
#include "depthkit/quality.hpp"

namespace depthkit {

enum class Grouping { kPerDataset, kGlobal };

/// kParallel ranks both metrics on the same survivor pool and drops the union;
/// kSequential re-ranks the survivors of the distribution cut before the
/// gradient cut.
enum class CutMode { kParallel, kSequential };

enum class Metric { kDistribution, kGradient };

std::string_view to_string(Grouping g);
std::string_view to_string(CutMode m);
Grouping parse_grouping(std::string_view name);
CutMode parse_cut_mode(std::string_view name);

struct FilterPolicy {
  double valid_ratio_min = 0.2;
  double cut_fraction = 0.2;
  Grouping grouping = Grouping::kPerDataset;
  CutMode cut_mode = CutMode::kParallel;
  QualitySettings quality;
  double far_plane = kDefaultFarPlane;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

/// One audited sample. `drop_reason` is empty for kept samples, otherwise one
/// of: error, valid_ratio, degenerate, s_dist, s_grad, s_dist+s_grad.
struct SampleRecord {
  QualityScores scores;
  bool kept = false;
  std::string drop_reason;
  std::string error;
};

/// Indices into the input sequence, each list in ascending order.
struct Partition {
  std::vector<std::size_t> kept;
  std::vector<std::size_t> dropped;
};

/// Drops every entry whose valid ratio is strictly below `threshold`.
Partition valid_ratio_cut(std::span<const QualityScores> scores, double threshold);

/// Within each group, drops the floor(fraction * n) entries with the lowest
/// metric value; ties go to the lexicographically smaller id.
Partition percentile_cut(std::span<const QualityScores> scores, Metric metric, double fraction,
                         Grouping grouping);

/// Decides kept/drop_reason for every record from its scores alone.
void apply_filter(std::vector<SampleRecord>& records, const FilterPolicy& policy);

struct DatasetRow {
  std::string dataset;
  std::int64_t total = 0;
  std::int64_t good = 0;
  std::int64_t bad = 0;
  double mean_s_dist = 0.0;
  double mean_s_grad = 0.0;
  double mean_s_total = 0.0;
};

struct FilterReport {
  FilterPolicy policy;
  std::vector<DatasetRow> rows;  // sorted by dataset name
  DatasetRow summary;            // dataset == "Summary"
};

/// Aggregates records into per-dataset rows. Means skip undefined scores and
/// are 0 for groups without any defined value. The result does not depend on
/// the order of `records`.
FilterReport build_report(std::span<const SampleRecord> records, const FilterPolicy& policy);

struct AuditResult {
  std::vector<SampleRecord> records;  // sorted by id
  FilterReport report;
  std::size_t errors = 0;
};

/// Loads and scores every manifest entry on `threads` workers, then filters and
/// aggregates. A sample that fails to load becomes an error row; the call
/// throws only when the manifest is empty or every sample failed.
AuditResult audit(std::span<const ManifestEntry> manifest, const FilterPolicy& policy,
                  std::size_t threads = 1);

/// Same as `audit` for samples already in memory.
AuditResult audit_samples(std::span<const DepthSample> samples, const FilterPolicy& policy,
                          std::size_t threads = 1);

enum class ReportFormat { kCsv, kJson };

std::string format_report(const FilterReport& report, ReportFormat format);
void emit_report(const FilterReport& report, const std::filesystem::path& path, ReportFormat format);

inline constexpr const char* kScoresHeader =
    "id,dataset,valid_ratio,s_chi2,s_conc,s_range,s_dist,s_grad,s_total,kept,drop_reason";

std::string format_scores_csv(std::span<const SampleRecord> records);
void write_scores_csv(const std::filesystem::path& path, std::span<const SampleRecord> records);
std::vector<SampleRecord> read_scores_csv(const std::filesystem::path& path);
std::vector<SampleRecord> parse_scores_csv(std::string_view text);

}  // namespace depthkit
