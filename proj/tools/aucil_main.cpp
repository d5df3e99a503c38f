// aucil command-line front end: synthetic benchmark generation, incremental
// training with per-task checkpoints, and evaluation reports.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aucil/engine.hpp"
#include "aucil/evaluation.hpp"
#include "aucil/seeding.hpp"
#include "aucil/synthetic.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace aucil;

namespace {

constexpr const char* kDefaultLabelPattern = "^(.*)_([^_]+)$";

std::string default_out_dir() {
  const char* env = std::getenv("AUCIL_OUT_DIR");
  return env && *env ? env : "aucil_out";
}

struct FitFlags {
  int max_components = 10;
  int max_iters = 200;
  double rel_tol = 1e-6;
  int restarts = 5;
  double reg_eps = kDefaultRegEps;
  std::string covariance = "full";
  std::uint64_t seed = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--max-components", max_components, "mixture size cap per class");
    cmd->add_option("--max-iters", max_iters, "iteration cap per fit");
    cmd->add_option("--rel-tol", rel_tol, "relative convergence tolerance");
    cmd->add_option("--restarts", restarts, "fit restarts, best kept");
    cmd->add_option("--reg-eps", reg_eps, "diagonal regularization on factorization failure");
    cmd->add_option("--covariance", covariance, "covariance kind: full|diagonal")
        ->check(CLI::IsMember({"full", "diagonal"}));
    cmd->add_option("--seed", seed, "global seed");
  }

  FitConfig to_config() const {
    FitConfig cfg;
    cfg.max_components = max_components;
    cfg.max_iters = max_iters;
    cfg.rel_tol = rel_tol;
    cfg.n_restarts = restarts;
    cfg.reg_eps = reg_eps;
    cfg.covariance_kind = covariance_kind_from_string(covariance);
    cfg.seed = seed;
    return cfg;
  }
};

Dataset load_dataset(const std::string& path, const std::string& format,
                     const std::string& manifest, const std::string& pattern,
                     const TaskSchedule& schedule) {
  LabelMap labels = manifest.empty()
                        ? LabelMap::from_pattern(pattern, schedule)
                        : LabelMap::from_manifest(manifest, schedule);
  if (format == "openface") return parse_openface_csv(path, labels);
  return parse_feature_csv(path, labels);
}

void print_warnings(const Dataset& ds, const std::string& what) {
  if (ds.stats.values_clamped > 0) {
    std::cerr << "aucil: " << what << ": clamped " << ds.stats.values_clamped
              << " out-of-range values\n";
  }
  if (ds.stats.rows_dropped_unsuccessful > 0) {
    std::cerr << "aucil: " << what << ": dropped " << ds.stats.rows_dropped_unsuccessful
              << " unsuccessful rows\n";
  }
  for (const auto& w : ds.stats.warnings) {
    std::cerr << "aucil: " << what << ": " << w << '\n';
  }
}

std::vector<int> parse_task_order(const std::string& text, const TaskSchedule& schedule) {
  if (text.empty()) {
    std::vector<int> order;
    for (const auto& t : schedule.tasks()) order.push_back(t.task_id);
    return order;
  }
  std::vector<int> order;
  std::string cur;
  auto flush = [&]() {
    if (cur.empty()) return;
    order.push_back(std::stoi(cur));
    cur.clear();
  };
  for (char ch : text) {
    if (ch == ',') {
      flush();
    } else {
      cur += ch;
    }
  }
  flush();
  std::set<int> seen(order.begin(), order.end());
  if (order.size() != static_cast<std::size_t>(schedule.task_count()) ||
      seen.size() != order.size()) {
    throw ContractViolation("--task-order must list every task id exactly once");
  }
  for (int t : order) {
    if (!schedule.has_task(t)) {
      throw ScheduleError("--task-order names unknown task " + std::to_string(t));
    }
  }
  return order;
}

// ---------------------------------------------------------------------------
// synth

int run_synth(const std::string& out_dir, const std::string& preset, int classes,
              int components, int dim, int samples, int subjects, double separation,
              std::uint64_t seed) {
  SynthSpec spec =
      preset == "cfee6"
          ? SynthSpec::cfee6(seed, samples, components, subjects, separation)
          : SynthSpec::clustered(classes, components, dim, samples, subjects, separation,
                                 seed);
  SynthData data = gen_synthetic(spec);
  write_synthetic(data, out_dir);
  std::cout << "wrote " << data.dataset.samples.size() << " samples, "
            << spec.schedule.total_classes() << " classes, "
            << spec.schedule.task_count() << " tasks to " << out_dir << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainedLog {
  nlohmann::json tasks = nlohmann::json::array();
};

void log_task(TrainedLog& log, const EnsembleModel& model, int task_id,
              const Dataset& data) {
  nlohmann::json jt;
  jt["task_id"] = task_id;
  nlohmann::json classes = nlohmann::json::array();
  const auto hist = data.class_histogram();
  for (const auto& expert : model.experts()) {
    for (const auto& [class_id, cm] : expert.class_models) {
      bool in_task = false;
      for (const auto& c : model.schedule().task(task_id).classes) {
        if (c.id == class_id) in_task = true;
      }
      if (!in_task) continue;
      nlohmann::json jc;
      jc["class_id"] = class_id;
      jc["label"] = model.schedule().class_info(class_id).label;
      jc["samples"] = hist.count(class_id) ? hist.at(class_id) : 0;
      jc["components"] = class_model_components(cm);
      if (const auto* g = std::get_if<GmmModel>(&cm)) {
        jc["iterations"] = g->fit_log().size();
        jc["converged"] = g->converged();
      } else {
        const auto& b = std::get<BgmmModel>(cm);
        jc["iterations"] = b.elbo_log().size();
        jc["converged"] = b.converged();
      }
      classes.push_back(std::move(jc));
    }
  }
  jt["classes"] = std::move(classes);
  log.tasks.push_back(std::move(jt));
}

Dataset subset_for_task(const Dataset& full, const TaskSchedule& schedule, int task_id) {
  std::set<int> wanted;
  for (const auto& c : schedule.task(task_id).classes) wanted.insert(c.id);
  Dataset out;
  out.feature_space_id = full.feature_space_id;
  out.dim = full.dim;
  for (const auto& s : full.samples) {
    if (wanted.count(s.class_id)) out.samples.push_back(s);
  }
  return out;
}

int run_train(const std::string& data_path, const std::vector<std::string>& task_data,
              const std::string& format, const std::string& manifest,
              const std::string& pattern, const std::string& schedule_arg,
              const std::string& family_arg, const std::string& mode_arg,
              const FitFlags& fit, const std::string& out_dir,
              const std::string& task_order_arg, double holdout,
              std::uint64_t holdout_seed, bool row_split) {
  const TaskSchedule schedule = load_task_schedule(schedule_arg);
  const ModelFamily family = model_family_from_string(family_arg);
  const InferenceMode mode = mode_arg == "multi" ? InferenceMode::SoftmaxMultiExpert
                                                 : InferenceMode::ArgmaxSingleSpace;
  const FitConfig cfg = fit.to_config();
  const std::vector<int> order = parse_task_order(task_order_arg, schedule);
  fs::create_directories(out_dir);

  // Per-task training data.
  std::map<int, Dataset> per_task;
  if (!task_data.empty()) {
    for (const auto& spec : task_data) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos) {
        throw ContractViolation("--task-data expects <task_id>=<csv-path>");
      }
      const int task_id = std::stoi(spec.substr(0, eq));
      Dataset ds = load_dataset(spec.substr(eq + 1), format, manifest, pattern, schedule);
      print_warnings(ds, spec.substr(eq + 1));
      per_task.emplace(task_id, subset_for_task(ds, schedule, task_id));
    }
    for (int t : order) {
      if (!per_task.count(t)) {
        throw ContractViolation("--task-data gives no data for task " + std::to_string(t));
      }
    }
  } else {
    if (data_path.empty()) throw ContractViolation("train needs --data or --task-data");
    Dataset full = load_dataset(data_path, format, manifest, pattern, schedule);
    print_warnings(full, data_path);
    if (holdout > 0.0) {
      auto [train_side, test_side] =
          split_dataset(full, 1.0 - holdout, holdout_seed, !row_split);
      print_warnings(train_side, "train split");
      print_warnings(test_side, "holdout split");
      write_feature_csv(test_side, fs::path(out_dir) / "holdout_features.csv",
                        fs::path(out_dir) / "holdout_manifest.csv", schedule);
      full = std::move(train_side);
    }
    for (int t : order) per_task.emplace(t, subset_for_task(full, schedule, t));
  }

  EnsembleModel model(schedule, mode, family, fit.seed);
  TrainedLog log;
  int prefix = 0;
  for (int task_id : order) {
    model.train_task(task_id, per_task.at(task_id), cfg);
    ++prefix;
    const fs::path checkpoint = fs::path(out_dir) / ("model_t" + std::to_string(prefix) +
                                                     ".json");
    model.save(checkpoint);
    log_task(log, model, task_id, per_task.at(task_id));
    std::cout << "task " << task_id << " trained (" << prefix << "/" << order.size()
              << "), checkpoint " << checkpoint.string() << '\n';
  }

  nlohmann::json jlog;
  jlog["format_version"] = 1;
  jlog["seed"] = fit.seed;
  jlog["family"] = family_arg;
  jlog["mode"] = to_string(mode);
  jlog["covariance"] = fit.covariance;
  jlog["task_order"] = order;
  jlog["tasks"] = std::move(log.tasks);
  std::ofstream out(fs::path(out_dir) / "train_log.json", std::ios::binary);
  out << jlog.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// eval

EvalReport evaluate_checkpoints(const std::vector<EnsembleModel>& checkpoints,
                                const Dataset& test, int param_components_override) {
  const EnsembleModel& final_model = checkpoints.back();
  const TaskSchedule& schedule = final_model.schedule();

  EvalReport report;
  report.schedule = schedule;

  for (const auto& model : checkpoints) {
    std::set<int> learned_classes;
    for (const auto& e : model.experts()) {
      for (const auto& [class_id, cm] : e.class_models) {
        (void)cm;
        learned_classes.insert(class_id);
      }
    }
    long long n = 0;
    long long correct = 0;
    std::map<int, std::pair<long long, long long>> per_task;  // task -> (n, correct)
    for (const auto& s : test.samples) {
      if (!learned_classes.count(s.class_id)) continue;
      const Prediction p = model.predict_agnostic(s.features);
      ++n;
      auto& bucket = per_task[schedule.task_of_class(s.class_id)];
      ++bucket.first;
      if (p.class_id == s.class_id) {
        ++correct;
        ++bucket.second;
      }
    }
    if (n == 0) throw Error("no test samples fall inside the learned classes");
    report.acc_curve.push_back(static_cast<double>(correct) / static_cast<double>(n));
    report.n_t.push_back(static_cast<int>(n));
    double mean = 0.0;
    for (const auto& [task_id, counts] : per_task) {
      (void)task_id;
      mean += static_cast<double>(counts.second) / static_cast<double>(counts.first);
    }
    report.acc_curve_task_mean.push_back(mean / static_cast<double>(per_task.size()));
  }

  // Final-model per-task accuracies and confusion matrix.
  std::vector<int> preds;
  std::vector<int> labels;
  std::map<int, std::pair<long long, long long>> aware;
  std::map<int, std::pair<long long, long long>> agnostic;
  for (const auto& s : test.samples) {
    const int task_id = schedule.task_of_class(s.class_id);
    if (!final_model.learned_tasks().count(task_id)) continue;
    const Prediction pa = final_model.predict_agnostic(s.features);
    const Prediction pw = final_model.predict_aware(s.features, task_id);
    preds.push_back(pa.class_id);
    labels.push_back(s.class_id);
    auto& ag = agnostic[task_id];
    ++ag.first;
    if (pa.class_id == s.class_id) ++ag.second;
    auto& aw = aware[task_id];
    ++aw.first;
    if (pw.class_id == s.class_id) ++aw.second;
  }
  for (const auto& [task_id, counts] : aware) {
    report.task_aware_acc[task_id] =
        static_cast<double>(counts.second) / static_cast<double>(counts.first);
  }
  for (const auto& [task_id, counts] : agnostic) {
    report.task_agnostic_acc[task_id] =
        static_cast<double>(counts.second) / static_cast<double>(counts.first);
  }
  report.confusion = confusion_matrix(preds, labels, schedule);

  int max_components = 1;
  Eigen::Index dim = 1;
  for (const auto& e : final_model.experts()) {
    dim = e.dim();
    for (const auto& [class_id, cm] : e.class_models) {
      (void)class_id;
      max_components = std::max(max_components, class_model_components(cm));
    }
  }
  const int c_report = param_components_override > 0 ? param_components_override
                                                     : max_components;
  report.params = param_count(static_cast<int>(dim), c_report,
                              final_model.learned_class_count());
  return report;
}

std::vector<EnsembleModel> load_checkpoints(const std::string& model_dir) {
  std::vector<EnsembleModel> checkpoints;
  for (int t = 1;; ++t) {
    const fs::path p = fs::path(model_dir) / ("model_t" + std::to_string(t) + ".json");
    if (!fs::exists(p)) break;
    checkpoints.push_back(EnsembleModel::load(p));
  }
  if (checkpoints.empty()) {
    throw IoError("no model_t<N>.json checkpoints found in '" + model_dir + "'");
  }
  return checkpoints;
}

void print_report(const EvalReport& report, const std::string& protocol) {
  std::cout.setf(std::ios::fixed);
  std::cout.precision(4);
  std::cout << "cumulative task-agnostic accuracy:";
  for (std::size_t t = 0; t < report.acc_curve.size(); ++t) {
    std::cout << "  ACC(" << (t + 1) << ")=" << report.acc_curve[t];
  }
  std::cout << '\n';
  if (protocol == "both" || protocol == "aware" || protocol == "agnostic") {
    std::cout << "per-task accuracy (final model):\n";
    for (const auto& [task_id, acc] : report.task_aware_acc) {
      std::cout << "  task " << task_id;
      if (protocol != "agnostic") std::cout << "  aware=" << acc;
      if (protocol != "aware") {
        std::cout << "  agnostic=" << report.task_agnostic_acc.at(task_id);
      }
      std::cout << '\n';
    }
  }
  std::cout << "errors: within-task " << report.confusion.within_task_errors
            << ", between-task " << report.confusion.between_task_errors << '\n';
  std::cout << "param_count nominal=" << report.params.nominal
            << " exact=" << report.params.exact
            << " bytes_at_64bit=" << report.params.bytes_at_64bit << '\n';
}

int run_eval(const std::string& model_dir, const std::string& data_path,
             const std::string& format, const std::string& manifest,
             const std::string& pattern, const std::string& out_dir,
             const std::string& protocol, int param_components, int seeds,
             const std::string& schedule_arg, const std::string& family_arg,
             const std::string& mode_arg, const FitFlags& fit, double holdout,
             bool row_split, const std::string& task_order_arg) {
  if (seeds <= 1) {
    const std::vector<EnsembleModel> checkpoints = load_checkpoints(model_dir);
    const TaskSchedule& schedule = checkpoints.back().schedule();
    Dataset test = load_dataset(data_path, format, manifest, pattern, schedule);
    print_warnings(test, data_path);
    EvalReport report = evaluate_checkpoints(checkpoints, test, param_components);
    emit_report(report, out_dir);
    print_report(report, protocol);
    std::cout << "report written to " << out_dir << '\n';
    return 0;
  }

  // Repeated-seed protocol: split + train + eval per derived seed.
  const TaskSchedule schedule = load_task_schedule(schedule_arg);
  Dataset full = load_dataset(data_path, format, manifest, pattern, schedule);
  print_warnings(full, data_path);
  const ModelFamily family = model_family_from_string(family_arg);
  const InferenceMode mode = mode_arg == "multi" ? InferenceMode::SoftmaxMultiExpert
                                                 : InferenceMode::ArgmaxSingleSpace;
  const std::vector<int> order = parse_task_order(task_order_arg, schedule);
  const double frac = holdout > 0.0 ? holdout : 0.2;

  std::vector<double> final_acc;
  EvalReport last_report;
  for (int i = 0; i < seeds; ++i) {
    const std::uint64_t run_seed = derive_seed(fit.seed, static_cast<std::uint64_t>(i));
    auto [train_side, test_side] = split_dataset(full, 1.0 - frac, run_seed, !row_split);
    FitConfig cfg = fit.to_config();
    cfg.seed = run_seed;
    EnsembleModel model(schedule, mode, family, run_seed);
    std::vector<EnsembleModel> checkpoints;
    for (int task_id : order) {
      model.train_task(task_id, subset_for_task(train_side, schedule, task_id), cfg);
      checkpoints.push_back(model);
    }
    EvalReport report = evaluate_checkpoints(checkpoints, test_side, param_components);
    final_acc.push_back(report.acc_curve.back());
    std::cout << "run " << (i + 1) << "/" << seeds << ": final ACC "
              << report.acc_curve.back() << '\n';
    last_report = std::move(report);
  }
  last_report.final_acc_by_seed = final_acc;
  emit_report(last_report, out_dir);
  const SeedSummary s = summarize_seeds(final_acc);
  std::cout.setf(std::ios::fixed);
  std::cout.precision(4);
  std::cout << "final ACC over " << s.runs << " runs: mean " << s.mean << " +- "
            << s.stddev << '\n';
  std::cout << "report written to " << out_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exemplar-free class-incremental Gaussian-mixture classifier"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark dataset");
  std::string synth_out = default_out_dir();
  std::string preset;
  int classes = 4;
  int components = 1;
  int dim = 8;
  int samples = 100;
  int subjects = 10;
  double separation = 6.0;
  std::uint64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--preset", preset, "named preset: cfee6")
      ->check(CLI::IsMember({"cfee6"}));
  synth->add_option("--classes", classes, "number of classes");
  synth->add_option("--components", components, "true components per class");
  synth->add_option("--dim", dim, "feature dimension");
  synth->add_option("--samples", samples, "samples per class");
  synth->add_option("--subjects", subjects, "number of subjects");
  synth->add_option("--separation", separation, "inter-class separation in pooled sigma");
  synth->add_option("--seed", synth_seed, "generator seed");

  // train
  auto* train = app.add_subcommand("train", "train tasks incrementally with checkpoints");
  std::string train_data;
  std::vector<std::string> task_data;
  std::string format = "features";
  std::string manifest;
  std::string pattern = kDefaultLabelPattern;
  std::string schedule_arg = "builtin:cfee6";
  std::string family_arg = "gmm";
  std::string mode_arg = "single";
  std::string train_out = default_out_dir();
  std::string task_order;
  double holdout = 0.0;
  std::uint64_t holdout_seed = 7;
  bool row_split = false;
  FitFlags train_fit;
  train->add_option("--data", train_data, "dataset CSV (single-space mode)");
  train->add_option("--task-data", task_data,
                    "<task_id>=<csv> per task (multi-expert mode)");
  train->add_option("--format", format, "input format")
      ->check(CLI::IsMember({"features", "openface"}));
  train->add_option("--manifest", manifest, "manifest CSV (sample_id,class_label,subject_id)");
  train->add_option("--label-pattern", pattern,
                    "regex over sample ids with (class)(subject) groups");
  train->add_option("--schedule", schedule_arg, "schedule JSON path or builtin:cfee6");
  train->add_option("--family", family_arg, "model family")
      ->check(CLI::IsMember({"gmm", "bgmm"}));
  train->add_option("--mode", mode_arg, "inference mode")
      ->check(CLI::IsMember({"single", "multi"}));
  train->add_option("--out", train_out, "output directory");
  train->add_option("--task-order", task_order, "comma-separated task ids");
  train->add_option("--holdout", holdout, "held-out fraction written next to checkpoints");
  train->add_option("--holdout-seed", holdout_seed, "seed for the holdout split");
  train->add_flag("--row-split", row_split, "split rows instead of subjects");
  train_fit.attach(train);

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate checkpoints and write a report");
  std::string model_dir;
  std::string eval_data;
  std::string eval_format = "features";
  std::string eval_manifest;
  std::string eval_pattern = kDefaultLabelPattern;
  std::string eval_out = default_out_dir();
  std::string protocol = "both";
  int param_components = 0;
  int seeds = 1;
  std::string eval_schedule = "builtin:cfee6";
  std::string eval_family = "gmm";
  std::string eval_mode = "single";
  double eval_holdout = 0.2;
  bool eval_row_split = false;
  std::string eval_task_order;
  FitFlags eval_fit;
  eval->add_option("--model-dir", model_dir, "directory with model_t<N>.json checkpoints");
  eval->add_option("--data", eval_data, "test CSV (full dataset with --seeds)")->required();
  eval->add_option("--format", eval_format, "input format")
      ->check(CLI::IsMember({"features", "openface"}));
  eval->add_option("--manifest", eval_manifest, "manifest CSV");
  eval->add_option("--label-pattern", eval_pattern,
                   "regex over sample ids with (class)(subject) groups");
  eval->add_option("--out", eval_out, "report directory");
  eval->add_option("--protocol", protocol, "per-task table: aware|agnostic|both")
      ->check(CLI::IsMember({"aware", "agnostic", "both"}));
  eval->add_option("--param-components", param_components,
                   "components per class used in the parameter report");
  eval->add_option("--seeds", seeds, "repeat split+train+eval N times, report mean/std");
  eval->add_option("--schedule", eval_schedule, "schedule (repeated-seed mode)");
  eval->add_option("--family", eval_family, "model family (repeated-seed mode)")
      ->check(CLI::IsMember({"gmm", "bgmm"}));
  eval->add_option("--mode", eval_mode, "inference mode (repeated-seed mode)")
      ->check(CLI::IsMember({"single", "multi"}));
  eval->add_option("--holdout", eval_holdout, "held-out fraction (repeated-seed mode)");
  eval->add_flag("--row-split", eval_row_split, "split rows instead of subjects");
  eval->add_option("--task-order", eval_task_order, "comma-separated task ids");
  eval_fit.attach(eval);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      return run_synth(synth_out, preset, classes, components, dim, samples, subjects,
                       separation, synth_seed);
    }
    if (train->parsed()) {
      return run_train(train_data, task_data, format, manifest, pattern, schedule_arg,
                       family_arg, mode_arg, train_fit, train_out, task_order, holdout,
                       holdout_seed, row_split);
    }
    if (eval->parsed()) {
      if (seeds <= 1 && model_dir.empty()) {
        throw ContractViolation("eval needs --model-dir (or --seeds N for repeat runs)");
      }
      return run_eval(model_dir, eval_data, eval_format, eval_manifest, eval_pattern,
                      eval_out, protocol, param_components, seeds, eval_schedule,
                      eval_family, eval_mode, eval_fit, eval_holdout, eval_row_split,
                      eval_task_order);
    }
  } catch (const Error& e) {
    std::cerr << "aucil: error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "aucil: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
