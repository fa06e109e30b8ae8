#include "depthkit/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

#include "depthkit/depthio.hpp"
#include "depthkit/error.hpp"
#include "depthkit/evalkit.hpp"
#include "depthkit/filterpipe.hpp"
#include "depthkit/sdt/bench.hpp"
#include "depthkit/sdt/counters.hpp"
#include "depthkit/sdt/decoder.hpp"
#include "depthkit/util/atomic_file.hpp"
#include "depthkit/util/csv.hpp"
#include "depthkit/util/parallel.hpp"

namespace depthkit::cli {
namespace {

constexpr const char* kVersion = "1.0.0";

struct PolicyFlags {
  FilterPolicy policy;
  std::string grouping = "per_dataset";
  std::string cut_mode = "parallel";
  std::string histogram_range = "fixed";

  void add_to(CLI::App& app) {
    app.add_option("--valid-ratio-min", policy.valid_ratio_min, "drop samples with fewer valid pixels")
        ->capture_default_str();
    app.add_option("--cut-fraction", policy.cut_fraction, "fraction dropped per metric and group")
        ->capture_default_str();
    app.add_option("--bins,--k", policy.quality.bins, "histogram bins")->capture_default_str();
    app.add_option("--lo", policy.quality.lo, "histogram lower bound")->capture_default_str();
    app.add_option("--hi", policy.quality.hi, "histogram upper bound (default: far plane)");
    app.add_option("--histogram-range", histogram_range, "fixed or per_sample")
        ->check(CLI::IsMember({"fixed", "per_sample"}))
        ->capture_default_str();
    app.add_option("--grouping", grouping, "per_dataset or global")
        ->check(CLI::IsMember({"per_dataset", "global"}))
        ->capture_default_str();
    app.add_option("--cut-mode", cut_mode, "parallel or sequential")
        ->check(CLI::IsMember({"parallel", "sequential"}))
        ->capture_default_str();
    app.add_option("--far-plane", policy.far_plane, "maximum valid depth")->capture_default_str();
  }

  FilterPolicy resolve(const CLI::App& app) {
    policy.grouping = parse_grouping(grouping);
    policy.cut_mode = parse_cut_mode(cut_mode);
    policy.quality.range = histogram_range == "fixed" ? HistogramRange::kFixed : HistogramRange::kPerSample;
    if (app.count("--hi") == 0) policy.quality.hi = policy.far_plane;
    policy.validate();
    return policy;
  }
};

std::pair<long, long> parse_resolution(const std::string& text) {
  const auto x = text.find_first_of("xX");
  long h = 0, w = 0;
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    std::size_t used = 0;
    h = std::stol(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(text);
    w = std::stol(text.substr(x + 1), &used);
    if (used != text.size() - x - 1) throw std::invalid_argument(text);
  } catch (const std::logic_error&) {
    throw ConfigError("resolution must look like HxW, got \"" + text + "\"");
  }
  return {h, w};
}

sdt::DecoderConfig decoder_config(const std::string& name, int width) {
  sdt::DecoderConfig config = sdt::preset(name);
  if (width != sdt::kDefaultWidth) {
    const sdt::DecoderConfig resized = sdt::make_config(config.d_enc, width);
    config.width = resized.width;
    config.head_mid = resized.head_mid;
  }
  config.validate();
  return config;
}

// --- audit -----------------------------------------------------------------

struct AuditCommand {
  std::string manifest, scores_out, report_out, format = "csv";
  std::size_t threads = 1;
  bool strict = false;
  PolicyFlags flags;

  void add(CLI::App& root) {
    CLI::App* app = root.add_subcommand("audit", "score every sample of a manifest and build the filter report");
    app->set_config("--config", "", "key=value file with default flag values");
    app->add_option("--manifest", manifest, "JSONL manifest")->required();
    app->add_option("--out", scores_out, "per-sample scores CSV")->required();
    app->add_option("--report", report_out, "per-dataset report");
    app->add_option("--format", format, "report format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    app->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_flag("--strict", strict, "exit 2 when any sample fails");
    flags.add_to(*app);
    app->callback([this, app] { policy = flags.resolve(*app); });
  }

  int run(std::ostream& out, std::ostream& err) const {
    const auto entries = read_manifest(manifest);
    const AuditResult result = audit(entries, policy, threads);
    write_scores_csv(scores_out, result.records);
    if (!report_out.empty()) {
      emit_report(result.report, report_out, format == "json" ? ReportFormat::kJson : ReportFormat::kCsv);
    }
    for (const auto& r : result.records) {
      if (!r.error.empty()) err << "sample " << r.scores.id << ": " << r.error << "\n";
    }
    const auto& s = result.report.summary;
    out << "audited " << s.total << " samples: " << s.good << " good, " << s.bad << " bad, " << result.errors
        << " errors\n";
    return strict && result.errors > 0 ? kExitData : kExitOk;
  }

  FilterPolicy policy;
};

// --- filter ----------------------------------------------------------------

struct FilterCommand {
  std::string scores, manifest, good_out, bad_out, report_out, format = "csv";
  PolicyFlags flags;

  void add(CLI::App& root) {
    CLI::App* app = root.add_subcommand("filter", "split a scored corpus into good and bad manifests");
    app->set_config("--config", "", "key=value file with default flag values");
    app->add_option("--scores", scores, "scores CSV written by audit")->required();
    app->add_option("--manifest", manifest, "manifest whose entries are copied into the outputs");
    app->add_option("--good", good_out, "JSONL of kept samples")->required();
    app->add_option("--bad", bad_out, "JSONL of dropped samples")->required();
    app->add_option("--report", report_out, "per-dataset report of the re-applied policy");
    app->add_option("--format", format, "report format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    flags.add_to(*app);
    app->callback([this, app] { policy = flags.resolve(*app); });
  }

  int run(std::ostream& out, std::ostream&) const {
    std::vector<SampleRecord> records = read_scores_csv(scores);
    if (records.empty()) throw DegenerateInputError(scores + ": no score rows");
    apply_filter(records, policy);

    std::map<std::string, ManifestEntry> by_id;
    if (!manifest.empty()) {
      for (auto& e : read_manifest(manifest)) by_id.emplace(e.id, std::move(e));
    }
    std::string good, bad;
    std::size_t n_good = 0, n_bad = 0;
    for (const auto& r : records) {
      std::string line;
      if (!manifest.empty()) {
        const auto it = by_id.find(r.scores.id);
        if (it == by_id.end()) throw FormatError(scores + ": sample " + r.scores.id + " is not in " + manifest);
        line = manifest_line(it->second);
      } else {
        nlohmann::ordered_json j;
        j["id"] = r.scores.id;
        j["dataset"] = r.scores.dataset;
        if (!r.kept) j["drop_reason"] = r.drop_reason;
        line = j.dump();
      }
      (r.kept ? good : bad) += line + "\n";
      ++(r.kept ? n_good : n_bad);
    }
    write_file_atomic(good_out, good);
    write_file_atomic(bad_out, bad);
    if (!report_out.empty()) {
      emit_report(build_report(records, policy), report_out,
                  format == "json" ? ReportFormat::kJson : ReportFormat::kCsv);
    }
    out << "filtered " << records.size() << " samples: " << n_good << " good, " << n_bad << " bad\n";
    return kExitOk;
  }

  FilterPolicy policy;
};

// --- eval ------------------------------------------------------------------

struct EvalRow {
  std::string id;
  EvalResult result;
  std::string error;
};

struct EvalCommand {
  std::string pred, gt, out_path;
  double depth_cap = kDefaultFarPlane;
  double far_plane = kDefaultFarPlane;
  std::size_t threads = 1;
  bool strict = false;

  void add(CLI::App& root) {
    CLI::App* app = root.add_subcommand("eval", "affine-invariant AbsRel and delta1 of disparity predictions");
    app->set_config("--config", "", "key=value file with default flag values");
    app->add_option("--pred", pred, "JSONL manifest of predicted disparity maps")->required();
    app->add_option("--gt", gt, "JSONL manifest of ground-truth depth maps")->required();
    app->add_option("--out", out_path, "CSV output (default: standard output)");
    app->add_option("--depth-cap", depth_cap, "aligned depths are clamped to this maximum")->capture_default_str();
    app->add_option("--far-plane", far_plane, "maximum valid ground-truth depth")->capture_default_str();
    app->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_flag("--strict", strict, "exit 2 when any sample fails");
  }

  int run(std::ostream& out, std::ostream& err) const {
    if (!(depth_cap > 0.0) || !(far_plane > 0.0)) throw ConfigError("depth cap and far plane must be positive");
    std::vector<ManifestEntry> gts = read_manifest(gt);
    std::sort(gts.begin(), gts.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    std::map<std::string, ManifestEntry> preds;
    for (auto& e : read_manifest(pred)) preds.emplace(e.id, std::move(e));
    if (gts.empty()) throw DegenerateInputError(gt + ": no samples");

    std::vector<EvalRow> rows(gts.size());
    parallel_for(gts.size(), threads, [&](std::size_t i) {
      EvalRow& row = rows[i];
      row.id = gts[i].id;
      try {
        const auto it = preds.find(row.id);
        if (it == preds.end()) throw FormatError("no prediction");
        const DepthSample truth = load_depth(gts[i], far_plane);
        const DepthSample p = load_depth(it->second, std::numeric_limits<double>::infinity());
        if (p.depth.rows() != truth.depth.rows() || p.depth.cols() != truth.depth.cols()) {
          throw ShapeError("prediction and ground truth differ in size");
        }
        const Mask mask = truth.valid && p.depth.isFinite();
        row.result = evaluate_affine_invariant(p.depth, truth.depth, mask, depth_cap);
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    });

    std::string text = "id,absrel,delta1,m\n";
    double sum_absrel = 0.0, sum_delta1 = 0.0;
    long long sum_m = 0;
    std::size_t ok = 0;
    for (const auto& row : rows) {
      if (!row.error.empty()) {
        err << "sample " << row.id << ": " << row.error << "\n";
        text += csv::join({csv::field(row.id), "nan", "nan", "0"}) + "\n";
        continue;
      }
      text += csv::join({csv::field(row.id), csv::number(row.result.absrel), csv::number(row.result.delta1),
                         std::to_string(row.result.m)}) +
              "\n";
      sum_absrel += row.result.absrel;
      sum_delta1 += row.result.delta1;
      sum_m += row.result.m;
      ++ok;
    }
    if (ok == 0) throw DegenerateInputError("no sample could be evaluated");
    text += csv::join({"mean", csv::number(sum_absrel / static_cast<double>(ok)),
                       csv::number(sum_delta1 / static_cast<double>(ok)), std::to_string(sum_m)}) +
            "\n";
    if (out_path.empty()) {
      out << text;
    } else {
      write_file_atomic(out_path, text);
    }
    return strict && ok != rows.size() ? kExitData : kExitOk;
  }
};

// --- decoder ---------------------------------------------------------------

struct DecoderCommand {
  std::string tokens, config = "s", params = "seed:0", out_path, report, res, save_params;
  int width = sdt::kDefaultWidth;
  bool include_encoder = false;

  void add(CLI::App& root) {
    CLI::App* app = root.add_subcommand("decoder", "run the decoder on a token dump or report its cost");
    app->add_option("--config", config, "encoder pairing")->check(CLI::IsMember({"s", "b", "l"}))->capture_default_str();
    app->add_option("--width", width, "decoder channel width")->check(CLI::NonNegativeNumber)->capture_default_str();
    app->add_option("--tokens", tokens, "token dump to decode");
    app->add_option("--params", params, "parameter file or seed:N")->capture_default_str();
    app->add_option("--out", out_path, "PFM disparity output");
    app->add_option("--save-params", save_params, "write the parameters used to this file");
    app->add_option("--report", report, "params or flops")->check(CLI::IsMember({"params", "flops"}));
    app->add_option("--res", res, "input resolution HxW for the FLOPs report");
    app->add_flag("--include-encoder", include_encoder, "add the ViT encoder estimate to the FLOPs report");
  }

  sdt::DecoderParams<float> load(const sdt::DecoderConfig& c) const {
    if (params.rfind("seed:", 0) == 0) {
      std::uint64_t seed = 0;
      try {
        std::size_t used = 0;
        seed = std::stoull(params.substr(5), &used);
        if (used != params.size() - 5) throw std::invalid_argument(params);
      } catch (const std::logic_error&) {
        throw ConfigError("--params seed must be seed:<non-negative integer>");
      }
      return sdt::init_params<float>(c, seed);
    }
    return sdt::load_params(params, c);
  }

  int run(std::ostream& out, std::ostream&) const {
    const sdt::DecoderConfig c = decoder_config(config, width);
    if (report.empty() && tokens.empty() && save_params.empty()) {
      throw ConfigError("decoder needs --tokens, --report or --save-params");
    }
    if (report == "params") {
      const auto count = sdt::count_params(c);
      const double dpt = sdt::dpt_reference_params_millions(c.name) * 1e6;
      out << "config,d_enc,width,params,dpt_params,ratio\n"
          << csv::join({c.name, std::to_string(c.d_enc), std::to_string(c.width), std::to_string(count),
                        csv::number(dpt), csv::number(static_cast<double>(count) / dpt)})
          << "\n";
    } else if (report == "flops") {
      if (res.empty()) throw ConfigError("--report flops needs --res HxW");
      const auto [h, w] = parse_resolution(res);
      const sdt::FlopsBreakdown f = sdt::count_flops_breakdown(c, h, w, include_encoder);
      out << "# 1 multiply-add = 2 FLOPs; attention counted quadratically; elementwise ops not counted\n"
          << "component,flops\n"
          << "projection," << csv::number(f.projection) << "\n"
          << "sde," << csv::number(f.sde) << "\n"
          << "offset_generators," << csv::number(f.offset_generators) << "\n"
          << "upsample_convs," << csv::number(f.upsample_convs) << "\n"
          << "head," << csv::number(f.head) << "\n"
          << "decoder," << csv::number(f.decoder()) << "\n"
          << "encoder," << csv::number(f.encoder) << "\n"
          << "total," << csv::number(f.total()) << "\n";
    }
    if (tokens.empty() && save_params.empty()) return kExitOk;

    const sdt::DecoderParams<float> p = load(c);
    if (!save_params.empty()) sdt::save_params(save_params, p);
    if (!tokens.empty()) {
      if (out_path.empty()) throw ConfigError("--tokens needs --out");
      const sdt::TokenSet set = sdt::read_tokens(tokens);
      const Image<float> disparity = sdt::forward(set, p);
      write_pfm(out_path, disparity);
    }
    return kExitOk;
  }
};

// --- bench -----------------------------------------------------------------

struct BenchCommand {
  std::string config = "s", res = "768x768";
  int width = sdt::kDefaultWidth;
  int runs = 5, warmup = 1;
  std::uint64_t seed = 0;

  void add(CLI::App& root) {
    CLI::App* app = root.add_subcommand("bench", "time single-threaded decoder forward passes");
    app->add_option("--config", config, "encoder pairing")->check(CLI::IsMember({"s", "b", "l"}))->capture_default_str();
    app->add_option("--width", width, "decoder channel width")->check(CLI::NonNegativeNumber)->capture_default_str();
    app->add_option("--res", res, "input resolution HxW")->capture_default_str();
    app->add_option("--runs", runs, "timed runs")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--warmup", warmup, "untimed runs")->check(CLI::NonNegativeNumber)->capture_default_str();
    app->add_option("--seed", seed, "seed for tokens and parameters")->capture_default_str();
  }

  int run(std::ostream& out, std::ostream&) const {
    const sdt::DecoderConfig c = decoder_config(config, width);
    const auto [h, w] = parse_resolution(res);
    const sdt::BenchResult r = sdt::bench(c, h, w, runs, warmup, seed);
    out << "config=" << c.name << " res=" << h << "x" << w << " runs=" << r.runs
        << " latency=" << sdt::format_latency(r) << "\n";
    return kExitOk;
  }
};

// --- synth -----------------------------------------------------------------

struct SynthCommand {
  SynthOptions options;
  std::string size = "48x64";

  void add(CLI::App& root) {
    CLI::App* app = root.add_subcommand("synth", "write a synthetic multi-dataset corpus");
    app->add_option("--out", options.out_dir, "output directory")->required();
    app->add_option("--count", options.count, "number of samples")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--size", size, "map size HxW")->capture_default_str();
    app->add_option("--seed", options.seed, "random seed")->capture_default_str();
    app->add_flag("--predictions", options.with_predictions, "also write disparity predictions");
    app->add_option("--prediction-noise", options.prediction_noise, "relative noise on predictions")
        ->check(CLI::Range(0.0, 0.9))
        ->capture_default_str();
  }

  int run(std::ostream& out, std::ostream&) {
    const auto [h, w] = parse_resolution(size);
    if (h <= 0 || w <= 0 || h > 65535 || w > 65535) throw ConfigError("--size out of range");
    options.height = static_cast<int>(h);
    options.width = static_cast<int>(w);
    synthesize_corpus(options);
    out << "wrote " << options.count << " samples to " << options.out_dir << "\n";
    return kExitOk;
  }
};

// CLI11 only reads config files attached to the root app, so a subcommand's
// --config file is expanded into flags here. Flags given on the command line win.
std::vector<std::string> expand_config(CLI::App& app, const std::vector<std::string>& args) {
  if (args.empty()) return args;
  CLI::App* sub = app.get_subcommand_no_throw(args.front());
  if (sub == nullptr || sub->get_config_ptr() == nullptr) return args;
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;

  const auto given = [&](const std::string& flag) {
    return std::any_of(args.begin(), args.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
  };
  std::vector<std::string> expanded = args;
  for (const CLI::ConfigItem& item : CLI::ConfigINI().from_file(path)) {
    if (!item.parents.empty() && item.parents != std::vector<std::string>{sub->get_name()}) continue;
    std::string name = item.name;
    std::replace(name.begin(), name.end(), '_', '-');
    const std::string flag = "--" + name;
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    if (opt == nullptr || opt == sub->get_config_ptr()) {
      throw CLI::ConfigError("unknown key \"" + item.name + "\" in " + path);
    }
    if (given(flag)) continue;
    if (opt->get_expected_min() == 0) {
      if (!item.inputs.empty() && CLI::detail::to_flag_value(item.inputs.front()) > 0) expanded.push_back(flag);
      continue;
    }
    expanded.push_back(flag);
    expanded.insert(expanded.end(), item.inputs.begin(), item.inputs.end());
  }
  return expanded;
}

}  // namespace

std::string version_text() {
  return std::string("depthkit ") + kVersion + "\n" + sdt::counting_conventions() + "\n";
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Depth dataset auditing, affine-invariant evaluation and a lightweight depth decoder", "depthkit"};
  app.require_subcommand(0, 1);
  bool version = false;
  app.add_flag("--version", version, "print version and counting conventions");

  AuditCommand audit_cmd;
  FilterCommand filter_cmd;
  EvalCommand eval_cmd;
  DecoderCommand decoder_cmd;
  BenchCommand bench_cmd;
  SynthCommand synth_cmd;
  audit_cmd.add(app);
  filter_cmd.add(app);
  eval_cmd.add(app);
  decoder_cmd.add(app);
  bench_cmd.add(app);
  synth_cmd.add(app);

  try {
    const std::vector<std::string> expanded = expand_config(app, args);
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  if (version) {
    out << version_text();
    return kExitOk;
  }
  try {
    if (app.got_subcommand("audit")) return audit_cmd.run(out, err);
    if (app.got_subcommand("filter")) return filter_cmd.run(out, err);
    if (app.got_subcommand("eval")) return eval_cmd.run(out, err);
    if (app.got_subcommand("decoder")) return decoder_cmd.run(out, err);
    if (app.got_subcommand("bench")) return bench_cmd.run(out, err);
    if (app.got_subcommand("synth")) return synth_cmd.run(out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace depthkit::cli
