#include "depthkit/filterpipe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "depthkit/error.hpp"
#include "depthkit/util/parallel.hpp"

namespace depthkit {

std::string_view to_string(Grouping g) {
  return g == Grouping::kPerDataset ? "per_dataset" : "global";
}

std::string_view to_string(CutMode m) { return m == CutMode::kParallel ? "parallel" : "sequential"; }

Grouping parse_grouping(std::string_view name) {
  if (name == "per_dataset") return Grouping::kPerDataset;
  if (name == "global") return Grouping::kGlobal;
  throw ConfigError("unknown grouping \"" + std::string(name) + "\" (expected per_dataset or global)");
}

CutMode parse_cut_mode(std::string_view name) {
  if (name == "parallel") return CutMode::kParallel;
  if (name == "sequential") return CutMode::kSequential;
  throw ConfigError("unknown cut mode \"" + std::string(name) + "\" (expected parallel or sequential)");
}

void FilterPolicy::validate() const {
  if (!(valid_ratio_min >= 0.0 && valid_ratio_min <= 1.0)) {
    throw ConfigError("valid_ratio_min must lie in [0, 1]");
  }
  if (!(cut_fraction >= 0.0 && cut_fraction < 1.0)) throw ConfigError("cut_fraction must lie in [0, 1)");
  if (quality.bins <= 4) throw ConfigError("bins must exceed 4");
  if (quality.range == HistogramRange::kFixed && !(quality.lo < quality.hi)) {
    throw ConfigError("histogram range must satisfy lo < hi");
  }
  if (!(far_plane > 0.0)) throw ConfigError("far_plane must be positive");
}

Partition valid_ratio_cut(std::span<const QualityScores> scores, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("valid ratio threshold must lie in [0, 1]");
  Partition p;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    (scores[i].valid_ratio < threshold ? p.dropped : p.kept).push_back(i);
  }
  return p;
}

namespace {

double metric_value(const QualityScores& s, Metric m) {
  return m == Metric::kDistribution ? s.s_dist : s.s_grad;
}

std::size_t cut_count(double fraction, std::size_t n) {
  // The relative nudge keeps products such as 0.29 * 100 from flooring one short.
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) * (1.0 + 1e-12)));
}

}  // namespace

Partition percentile_cut(std::span<const QualityScores> scores, Metric metric, double fraction,
                         Grouping grouping) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("cut fraction must lie in [0, 1)");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    groups[grouping == Grouping::kPerDataset ? scores[i].dataset : std::string()].push_back(i);
  }

  std::vector<bool> drop(scores.size(), false);
  for (auto& [name, members] : groups) {
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      const double va = metric_value(scores[a], metric);
      const double vb = metric_value(scores[b], metric);
      if (va != vb) return va < vb;
      return scores[a].id < scores[b].id;
    });
    const std::size_t n_drop = cut_count(fraction, members.size());
    for (std::size_t r = 0; r < n_drop; ++r) drop[members[r]] = true;
  }

  Partition p;
  for (std::size_t i = 0; i < scores.size(); ++i) (drop[i] ? p.dropped : p.kept).push_back(i);
  return p;
}

void apply_filter(std::vector<SampleRecord>& records, const FilterPolicy& policy) {
  policy.validate();
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& r = records[i];
    r.kept = false;
    if (!r.error.empty()) {
      r.drop_reason = "error";
    } else if (r.scores.valid_ratio < policy.valid_ratio_min) {
      r.drop_reason = "valid_ratio";
    } else if (!std::isfinite(r.scores.s_dist) || !std::isfinite(r.scores.s_grad)) {
      r.drop_reason = "degenerate";
    } else {
      r.drop_reason.clear();
      pool.push_back(i);
    }
  }

  auto gather = [&](const std::vector<std::size_t>& idx) {
    std::vector<QualityScores> s;
    s.reserve(idx.size());
    for (auto i : idx) s.push_back(records[i].scores);
    return s;
  };

  std::vector<bool> dist_drop(records.size(), false);
  std::vector<bool> grad_drop(records.size(), false);
  const auto pool_scores = gather(pool);
  const Partition by_dist =
      percentile_cut(pool_scores, Metric::kDistribution, policy.cut_fraction, policy.grouping);
  for (auto j : by_dist.dropped) dist_drop[pool[j]] = true;

  if (policy.cut_mode == CutMode::kParallel) {
    const Partition by_grad =
        percentile_cut(pool_scores, Metric::kGradient, policy.cut_fraction, policy.grouping);
    for (auto j : by_grad.dropped) grad_drop[pool[j]] = true;
  } else {
    std::vector<std::size_t> survivors;
    for (auto j : by_dist.kept) survivors.push_back(pool[j]);
    const Partition by_grad =
        percentile_cut(gather(survivors), Metric::kGradient, policy.cut_fraction, policy.grouping);
    for (auto j : by_grad.dropped) grad_drop[survivors[j]] = true;
  }

  for (auto i : pool) {
    auto& r = records[i];
    if (dist_drop[i] && grad_drop[i]) {
      r.drop_reason = "s_dist+s_grad";
    } else if (dist_drop[i]) {
      r.drop_reason = "s_dist";
    } else if (grad_drop[i]) {
      r.drop_reason = "s_grad";
    } else {
      r.kept = true;
    }
  }
}

namespace {

struct MeanAccumulator {
  double sum = 0.0;
  std::int64_t count = 0;
  void add(double v) {
    if (std::isfinite(v)) {
      sum += v;
      ++count;
    }
  }
  double mean() const { return count == 0 ? 0.0 : sum / static_cast<double>(count); }
};

struct RowAccumulator {
  DatasetRow row;
  MeanAccumulator dist, grad, total;
  void add(const SampleRecord& r) {
    ++row.total;
    ++(r.kept ? row.good : row.bad);
    dist.add(r.scores.s_dist);
    grad.add(r.scores.s_grad);
    total.add(r.scores.s_total);
  }
  DatasetRow finish() {
    row.mean_s_dist = dist.mean();
    row.mean_s_grad = grad.mean();
    row.mean_s_total = total.mean();
    return row;
  }
};

}  // namespace

FilterReport build_report(std::span<const SampleRecord> records, const FilterPolicy& policy) {
  // Summation order is fixed by id so the floating-point means are reproducible.
  std::vector<const SampleRecord*> ordered;
  ordered.reserve(records.size());
  for (const auto& r : records) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(),
            [](const SampleRecord* a, const SampleRecord* b) { return a->scores.id < b->scores.id; });

  std::map<std::string, RowAccumulator> per_dataset;
  RowAccumulator summary;
  summary.row.dataset = "Summary";
  for (const SampleRecord* r : ordered) {
    auto& acc = per_dataset[r->scores.dataset];
    acc.row.dataset = r->scores.dataset;
    acc.add(*r);
    summary.add(*r);
  }

  FilterReport report;
  report.policy = policy;
  for (auto& [name, acc] : per_dataset) report.rows.push_back(acc.finish());
  report.summary = summary.finish();
  return report;
}

namespace {

AuditResult finish_audit(std::vector<SampleRecord> records, const FilterPolicy& policy) {
  AuditResult result;
  result.errors = static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.error.empty(); }));
  if (!records.empty() && result.errors == records.size()) {
    throw Error("every sample failed to load; first error: " + records.front().error);
  }
  std::sort(records.begin(), records.end(),
            [](const SampleRecord& a, const SampleRecord& b) { return a.scores.id < b.scores.id; });
  apply_filter(records, policy);
  result.report = build_report(records, policy);
  result.records = std::move(records);
  return result;
}

SampleRecord error_record(const std::string& id, const std::string& dataset, const std::string& what) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  SampleRecord r;
  r.scores.id = id;
  r.scores.dataset = dataset;
  r.scores.valid_ratio = nan;
  r.scores.s_chi2 = r.scores.s_conc = r.scores.s_range = nan;
  r.scores.s_dist = r.scores.s_grad = r.scores.s_total = nan;
  r.error = what;
  return r;
}

}  // namespace

AuditResult audit(std::span<const ManifestEntry> manifest, const FilterPolicy& policy,
                  std::size_t threads) {
  policy.validate();
  if (manifest.empty()) throw ConfigError("manifest is empty");
  std::vector<SampleRecord> records(manifest.size());
  parallel_for(manifest.size(), threads, [&](std::size_t i) {
    const ManifestEntry& entry = manifest[i];
    try {
      const DepthSample sample = load_depth(entry, policy.far_plane);
      records[i].scores = score_sample(sample, policy.quality);
    } catch (const std::exception& e) {
      records[i] = error_record(entry.id, entry.dataset, e.what());
    }
  });
  return finish_audit(std::move(records), policy);
}

AuditResult audit_samples(std::span<const DepthSample> samples, const FilterPolicy& policy,
                          std::size_t threads) {
  policy.validate();
  if (samples.empty()) throw ConfigError("no samples to audit");
  std::vector<SampleRecord> records(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    try {
      records[i].scores = score_sample(samples[i], policy.quality);
    } catch (const std::exception& e) {
      records[i] = error_record(samples[i].id, samples[i].dataset, e.what());
    }
  });
  return finish_audit(std::move(records), policy);
}

}  // namespace depthkit
