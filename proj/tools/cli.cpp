#include "cli.hpp"

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "presel/presel.hpp"

namespace presel::cli {
namespace {

// Flags shared by the selection subcommands. Unset flags fall back to the
// config file, then to built-in defaults.
struct ConfigFlags {
  std::string config_path;
  std::optional<double> ratio, ref_ratio, clusters_per_100, tol;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k, max_iter;
  std::optional<std::string> tau;
  bool normalize = false;

  void add_to(CLI::App* app) {
    app->add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
    app->add_option("--ratio", ratio, "total selection ratio, references included");
    app->add_option("--ref-ratio", ref_ratio, "reference set ratio when drawing references");
    app->add_option("--seed", seed, "root random seed");
    app->add_option("--k", k, "neighbors for neighbor centrality");
    app->add_option("--tau", tau, "softmax temperature or 'auto'");
    app->add_option("--clusters-per-100", clusters_per_100, "k-means clusters per 100 pool samples");
    app->add_option("--max-iter", max_iter, "k-means iteration cap");
    app->add_option("--tol", tol, "k-means relative centroid-shift tolerance");
    app->add_flag("--normalize", normalize, "L2-normalize features before k-means");
  }

  [[nodiscard]] SelectionConfig resolve() const {
    SelectionConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path, cfg);
    if (ratio) cfg.ratio = *ratio;
    if (ref_ratio) cfg.ref_ratio = *ref_ratio;
    if (seed) cfg.seed = *seed;
    if (k) cfg.k = *k;
    if (tau) apply_config_value(cfg, "tau", *tau);
    if (clusters_per_100) cfg.clusters_per_100 = *clusters_per_100;
    if (max_iter) cfg.max_iter = *max_iter;
    if (tol) cfg.tol = *tol;
    if (normalize) cfg.normalize = true;
    cfg.validate();
    return cfg;
  }
};

struct Outputs {
  std::string out, report, cluster_dump, irs_report, budget_report;
};

void write_outcome(const SelectionOutcome& o, const SelectionConfig& cfg, const Outputs& paths, std::ostream& out) {
  save_selection(o.selection, paths.out);
  const std::string report = paths.report.empty() ? paths.out + ".report.jsonl" : paths.report;
  write_text(report, serialize_run_report(o, cfg));
  if (!paths.cluster_dump.empty()) write_text(paths.cluster_dump, serialize_cluster_dump(o.clusters));
  if (!paths.budget_report.empty()) write_text(paths.budget_report, serialize_budget_plan(o.plan));
  nlohmann::ordered_json j;
  j["selection"] = paths.out;
  j["report"] = report;
  j["entries"] = o.selection.entries.size();
  j["references"] = o.selection.count(Provenance::Reference);
  j["selected"] = o.selection.count(Provenance::Selected);
  out << j.dump() << '\n';
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    double d = 0.0;
    try {
      d = std::stod(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != item.size()) throw Error(ErrorKind::InvalidConfig, "bad number '" + item + "' in list");
    v.push_back(d);
  }
  return v;
}

int print_report(const std::string& path, std::ostream& out) {
  auto lines = read_lines(path);
  for (const auto& line : lines) {
    auto j = nlohmann::ordered_json::parse(line);
    const auto kind = j.value("kind", std::string{});
    if (kind == "config") {
      out << "configuration\n";
      for (auto& [k, v] : j.items())
        if (k != "kind") out << "  " << std::left << std::setw(18) << k << v.dump() << '\n';
    } else if (kind == "plan") {
      out << "budget: |D|=" << j["image_count"] << " total=" << j["total_size"] << " references=" << j["ref_count"]
          << " engine-selected=" << j["target_total"] << " tau=" << j["tau"] << " tasks=" << j["task_count"] << '\n';
      out << std::left << std::setw(24) << "task" << std::right << std::setw(10) << "score" << std::setw(10) << "weight"
          << std::setw(8) << "quota" << std::setw(8) << "refs" << std::setw(8) << "pool" << std::setw(8) << "C"
          << std::setw(9) << "selected" << "\n";
    } else if (kind == "task") {
      out << std::left << std::setw(24) << j["task_id"].get<std::string>() << std::right << std::fixed << std::setprecision(4)
          << std::setw(10) << j["score_s"].get<double>() << std::setw(10) << j["weight_w"].get<double>() << std::setw(8)
          << j["quota"].get<std::size_t>() << std::setw(8) << j["ref_count"].get<std::size_t>() << std::setw(8)
          << j["pool_size"].get<std::size_t>() << std::setw(8) << j["clusters"].get<std::size_t>() << std::setw(9)
          << j["selected"].get<std::size_t>() << (j["fallback"].get<bool>() ? "  (fallback score)" : "") << '\n';
      out.unsetf(std::ios::floatfield);
    } else if (kind == "timing") {
      out << "timing:";
      for (auto& [k, v] : j.items())
        if (k != "kind") out << ' ' << k << '=' << v.dump();
      out << '\n';
    } else if (kind == "summary") {
      out << "summary: entries=" << j["entries"] << " references=" << j["references"] << " selected=" << j["selected"] << '\n';
    }
  }
  return kExitOk;
}

void emit_error(std::ostream& err, std::string_view kind, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  err << j.dump() << '\n';
}

}  // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pre-instruction coreset selection engine", "presel"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // run / baseline
  std::string manifest_path, features_path, losses_path, strategy_name_flag;
  Outputs outputs;
  ConfigFlags flags;
  auto* run = app.add_subcommand("run", "full pipeline: IRS, task budgets, clustering, neighbor centrality, assembly");
  auto* baseline = app.add_subcommand("baseline", "comparison selector sharing the assembly machinery");
  for (auto* sub : {run, baseline}) {
    sub->add_option("--manifest", manifest_path, "manifest (JSON lines)")->required()->check(CLI::ExistingFile);
    sub->add_option("--features", features_path, "binary feature file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", outputs.out, "selection manifest output")->required();
    sub->add_option("--report", outputs.report, "run report output (default: <out>.report.jsonl)");
    sub->add_option("--cluster-dump", outputs.cluster_dump, "per-task cluster dump output");
    sub->add_option("--budget-report", outputs.budget_report, "budget report output");
    flags.add_to(sub);
  }
  run->add_option("--losses", losses_path, "reference loss records (JSON lines)")->required()->check(CLI::ExistingFile);
  run->add_option("--irs-report", outputs.irs_report, "IRS report output");
  baseline->add_option("--losses", losses_path, "reference loss records (needed for task_importance)")->check(CLI::ExistingFile);
  baseline->add_option("--strategy", strategy_name_flag, "random | uniform | size_balanced | task_importance")
      ->required()
      ->check(CLI::IsMember({"random", "uniform", "size_balanced", "task_importance"}));

  // score
  std::string score_losses, score_manifest, score_out;
  auto* score = app.add_subcommand("score", "IRS report from reference loss records");
  score->add_option("--losses", score_losses)->required()->check(CLI::ExistingFile);
  score->add_option("--manifest", score_manifest, "only score reference samples of this manifest")->check(CLI::ExistingFile);
  score->add_option("--out", score_out)->required();

  // budget
  std::string budget_manifest, budget_irs, budget_out;
  ConfigFlags budget_flags;
  auto* budget = app.add_subcommand("budget", "task scores, weights and quotas from an IRS report");
  budget->add_option("--manifest", budget_manifest)->required()->check(CLI::ExistingFile);
  budget->add_option("--irs", budget_irs, "IRS report from `score`")->required()->check(CLI::ExistingFile);
  budget->add_option("--out", budget_out)->required();
  budget_flags.add_to(budget);

  // select
  std::string select_manifest, select_features, select_budget;
  Outputs select_outputs;
  ConfigFlags select_flags;
  auto* select = app.add_subcommand("select", "clustering, ranking and assembly from a budget report");
  select->add_option("--manifest", select_manifest)->required()->check(CLI::ExistingFile);
  select->add_option("--features", select_features)->required()->check(CLI::ExistingFile);
  select->add_option("--budget", select_budget, "budget report from `budget`")->required()->check(CLI::ExistingFile);
  select->add_option("--out", select_outputs.out)->required();
  select->add_option("--report", select_outputs.report);
  select->add_option("--cluster-dump", select_outputs.cluster_dump);
  select_flags.add_to(select);

  // synth
  SynthSpec spec;
  std::string synth_sizes = "500,500", synth_planted = "0.5,1.5", synth_dir;
  auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark (manifest, features, losses, truth)");
  synth->add_option("--n-tasks", spec.n_tasks)->capture_default_str();
  synth->add_option("--samples-per-task", synth_sizes, "comma list, or one value for every task")->capture_default_str();
  synth->add_option("--d", spec.d)->capture_default_str();
  synth->add_option("--blobs-per-task", spec.blobs_per_task)->capture_default_str();
  synth->add_option("--blob-stddev", spec.blob_stddev)->capture_default_str();
  synth->add_option("--center-scale", spec.center_scale)->capture_default_str();
  synth->add_option("--overlap", spec.overlap_fraction)->capture_default_str();
  synth->add_option("--planted-irs", synth_planted, "comma list, or one value for every task")->capture_default_str();
  synth->add_option("--ref-ratio", spec.ref_ratio)->capture_default_str();
  synth->add_option("--seed", spec.seed)->capture_default_str();
  synth->add_option("--out-dir", synth_dir)->required();

  // validate
  std::string val_manifest, val_features, val_losses, val_selection;
  bool strict = false;
  auto* validate = app.add_subcommand("validate", "check input and output file formats");
  validate->add_option("--manifest", val_manifest)->required()->check(CLI::ExistingFile);
  validate->add_option("--features", val_features)->check(CLI::ExistingFile);
  validate->add_option("--losses", val_losses)->check(CLI::ExistingFile);
  validate->add_option("--selection", val_selection)->check(CLI::ExistingFile);
  validate->add_flag("--strict", strict, "non-empty consistency report is an error");

  // report
  std::string report_path;
  auto* report = app.add_subcommand("report", "pretty-print a run report");
  report->add_option("--report", report_path)->required()->check(CLI::ExistingFile);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("presel");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    emit_error(err, "UsageError", e.what());
    return kExitUsage;
  }

  try {
    if (*run || *baseline) {
      SelectionConfig cfg = flags.resolve();
      if (*baseline) cfg.strategy = parse_strategy(strategy_name_flag);
      if (cfg.strategy == Strategy::TaskImportance && losses_path.empty())
        throw Error(ErrorKind::InvalidConfig, "task_importance needs --losses");
      auto manifest = load_manifest(manifest_path);
      auto features = load_features(features_path, manifest);
      std::vector<LossRecord> losses = losses_path.empty() ? std::vector<LossRecord>{} : load_losses(losses_path);
      auto outcome = run_pipeline(manifest, features, losses, cfg);
      if (!outputs.irs_report.empty()) {
        auto refs = prepare_reference(manifest, cfg);
        write_text(outputs.irs_report, serialize_irs_report(compute_irs_records(usable_losses(refs, losses))));
      }
      write_outcome(outcome, cfg, outputs, out);
    } else if (*score) {
      auto losses = load_losses(score_losses);
      if (!score_manifest.empty()) losses = usable_losses(load_manifest(score_manifest), losses);
      auto result = compute_irs_records(losses);
      write_text(score_out, serialize_irs_report(result));
      out << nlohmann::ordered_json{{"scored", result.records.size()}, {"excluded", result.excluded.size()}}.dump() << '\n';
    } else if (*budget) {
      SelectionConfig cfg = budget_flags.resolve();
      auto manifest = load_manifest(budget_manifest);
      if (!manifest.has_reference_flags())
        throw Error(ErrorKind::StageMismatch, "manifest has no reference flags; run budgeting on the manifest the losses were scored for");
      auto irs_result = load_irs_report(budget_irs);
      for (const auto& r : irs_result.records)
        if (!manifest.contains(r.sample_id) || !manifest.record(manifest.index_of(r.sample_id)).is_reference)
          throw Error(ErrorKind::StageMismatch, "IRS record '" + r.sample_id + "' is not a reference sample of this manifest");
      auto plan = plan_budget(manifest, irs_result.records, cfg.ratio, cfg.tau);
      write_text(budget_out, serialize_budget_plan(plan));
      out << nlohmann::ordered_json{{"tasks", plan.tasks.size()}, {"target_total", plan.target_total}, {"tau", plan.tau}}.dump()
          << '\n';
    } else if (*select) {
      SelectionConfig cfg = select_flags.resolve();
      auto manifest = load_manifest(select_manifest);
      auto features = load_features(select_features, manifest);
      auto plan = load_budget_plan(select_budget);
      cfg.ratio = plan.ratio;
      cfg.tau = plan.tau_auto ? std::nullopt : std::optional<double>(plan.tau);
      auto outcome = select_with_plan(manifest, features, plan, cfg);
      write_outcome(outcome, cfg, select_outputs, out);
    } else if (*synth) {
      auto sizes = parse_double_list(synth_sizes);
      auto planted = parse_double_list(synth_planted);
      if (sizes.size() == 1) sizes.assign(spec.n_tasks, sizes[0]);
      if (planted.size() == 1) planted.assign(spec.n_tasks, planted[0]);
      spec.samples_per_task.clear();
      for (double s : sizes) {
        if (s < 0 || s != std::floor(s)) throw Error(ErrorKind::SynthSpecError, "sample counts must be non-negative integers");
        spec.samples_per_task.push_back(static_cast<std::size_t>(s));
      }
      spec.planted_task_irs = planted;
      auto data = synth_generate(spec);
      auto paths = write_synth(data, synth_dir);
      nlohmann::ordered_json j;
      j["manifest"] = paths.manifest;
      j["features"] = paths.features;
      j["losses"] = paths.losses;
      j["truth"] = paths.truth;
      j["samples"] = data.manifest.image_count();
      j["references"] = data.manifest.reference_count();
      out << j.dump() << '\n';
    } else if (*validate) {
      auto manifest = load_manifest(val_manifest);
      std::optional<FeatureMatrix> features;
      if (!val_features.empty()) features = load_features(val_features, manifest);
      std::vector<LossRecord> losses;
      if (!val_losses.empty()) losses = load_losses(val_losses);
      auto rep = validate_inputs(manifest, features ? &*features : nullptr, losses);
      nlohmann::ordered_json j;
      j["ok"] = true;
      j["records"] = manifest.size();
      j["images"] = manifest.image_count();
      j["tasks"] = manifest.task_count();
      j["references"] = manifest.reference_count();
      if (features) j["dim"] = features->cols();
      if (!val_losses.empty()) j["report"] = rep.to_json();
      if (!val_selection.empty()) {
        auto sel = load_selection(val_selection);
        for (const auto& e : sel.entries)
          if (!manifest.contains(e.sample_id)) throw Error(ErrorKind::UnknownSample, "selection entry '" + e.sample_id + "' is not in the manifest");
        j["selection_entries"] = sel.entries.size();
      }
      if (strict && !val_losses.empty() && !rep.empty()) {
        j["ok"] = false;
        out << j.dump() << '\n';
        emit_error(err, "ValidationReport", "inputs are inconsistent; see report");
        return kExitData;
      }
      out << j.dump() << '\n';
    } else if (*report) {
      return print_report(report_path, out);
    }
  } catch (const Error& e) {
    emit_error(err, e.name(), e.what());
    switch (e.kind()) {
      case ErrorKind::InvalidConfig:
      case ErrorKind::StageMismatch:
        return kExitUsage;
      case ErrorKind::IoError:
        return std::filesystem::exists(e.what()) ? kExitData : kExitUsage;
      default:
        return kExitData;
    }
  } catch (const std::exception& e) {
    emit_error(err, "InternalError", e.what());
    return kExitData;
  }
  return kExitOk;
}

}  // namespace presel::cli
