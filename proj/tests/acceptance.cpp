// Acceptance suite: each criterion prints one [PASS]/[FAIL] line and the
// wall time it took. Exit status is nonzero when any criterion fails.
// argv[1] must point at the CLI binary (used by the end-to-end criteria).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "aucil/engine.hpp"
#include "aucil/evaluation.hpp"
#include "aucil/seeding.hpp"
#include "aucil/synthetic.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace aucil;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool pass, double seconds,
            const std::string& detail) {
  std::cout << (pass ? "[PASS] " : "[FAIL] ") << "criterion " << number << " " << name
            << " (" << std::fixed << std::setprecision(1) << seconds << " s): " << detail
            << '\n';
  if (!pass) ++g_failures;
}

template <typename Fn>
void criterion(int number, const std::string& name, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  bool pass = false;
  std::string detail;
  try {
    std::tie(pass, detail) = fn();
  } catch (const std::exception& e) {
    pass = false;
    detail = std::string("exception: ") + e.what();
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report(number, name, pass, seconds, detail);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(const std::string& cli, const std::string& args) {
  const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

Matrix random_spd(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.2, 1.2);
  Matrix a(dim, dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) a(r, c) = g(rng);
  }
  Matrix spd = a * a.transpose() / static_cast<double>(dim);
  spd.diagonal().array() += u(rng);
  return 0.5 * (spd + spd.transpose());
}

Vector random_vec(std::mt19937_64& rng, int dim, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vector v(dim);
  for (int d = 0; d < dim; ++d) v[d] = g(rng);
  return v;
}

Matrix gaussian_rows(std::mt19937_64& rng, int n, const Vector& mean, const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  const Matrix l = llt.matrixL();
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix rows(n, mean.size());
  for (int i = 0; i < n; ++i) {
    Vector z(mean.size());
    for (Eigen::Index d = 0; d < mean.size(); ++d) z[d] = g(rng);
    rows.row(i) = (mean + l * z).transpose();
  }
  return rows;
}

Dataset task_subset(const Dataset& full, const TaskSchedule& schedule, int task_id) {
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

// ---------------------------------------------------------------------------

std::pair<bool, std::string> headline_param_count() {
  const ParamCount pc = param_count(17, 10, 22);
  std::ostringstream os;
  os << "nominal(17,10,22) = " << pc.nominal << ", exact = " << pc.exact;
  return {pc.nominal == 33660, os.str()};
}

std::pair<bool, std::string> density_oracle() {
  std::mt19937_64 rng(2024);
  int checked = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 150; ++trial) {
    const int dim = 2 + static_cast<int>(rng() % 16);
    const Vector mean = random_vec(rng, dim);
    const Vector x = random_vec(rng, dim, 2.0);
    double got;
    double want;
    if (trial % 2 == 0) {
      const Matrix spd = random_spd(rng, dim);
      got = log_density(x, mean, Covariance::full(spd));
      want = naive_mvn_log_density(x, mean, spd);
    } else {
      std::uniform_real_distribution<double> u(0.1, 3.0);
      Vector var(dim);
      for (int d = 0; d < dim; ++d) var[d] = u(rng);
      got = log_density(x, mean, Covariance::diagonal(var));
      want = naive_mvn_log_density(x, mean, Matrix(var.asDiagonal()));
    }
    worst = std::max(worst, std::abs(got - want));
    ++checked;
  }
  std::ostringstream os;
  os << checked << " instances, dims 2-17, both kinds, max |diff| = " << std::scientific
     << worst;
  return {worst <= 1e-8, os.str()};
}

std::pair<bool, std::string> em_monotone() {
  std::mt19937_64 rng(77);
  int violations = 0;
  int fits = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = 2 + static_cast<int>(rng() % 7);
    const int n = 40 + static_cast<int>(rng() % 160);
    const int c = 1 + static_cast<int>(rng() % 4);
    Matrix data(n, dim);
    const Vector center = random_vec(rng, dim, 3.0);
    data.topRows(n / 2) = gaussian_rows(rng, n / 2, center, random_spd(rng, dim));
    data.bottomRows(n - n / 2) =
        gaussian_rows(rng, n - n / 2, -center, Matrix::Identity(dim, dim));
    FitConfig cfg;
    cfg.seed = rng();
    cfg.n_restarts = 2;
    cfg.covariance_kind = trial % 2 == 0 ? CovarianceKind::Full : CovarianceKind::Diagonal;
    const GmmModel model = fit_em(data, c, cfg);
    ++fits;
    const auto& trace = model.fit_log();
    for (std::size_t i = 1; i < trace.size(); ++i) {
      if (trace[i] < trace[i - 1] - 1e-9) ++violations;
    }
  }
  std::ostringstream os;
  os << fits << " random fits, " << violations << " monotonicity violations at 1e-9";
  return {violations == 0, os.str()};
}

std::pair<bool, std::string> vb_monotone() {
  std::mt19937_64 rng(78);
  int violations = 0;
  int fits = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 2 + static_cast<int>(rng() % 7);
    const int n = 50 + static_cast<int>(rng() % 200);
    Matrix data(n, dim);
    const Vector center = random_vec(rng, dim, 3.0);
    data.topRows(n / 2) = gaussian_rows(rng, n / 2, center, random_spd(rng, dim));
    data.bottomRows(n - n / 2) =
        gaussian_rows(rng, n - n / 2, -center, Matrix::Identity(dim, dim));
    FitConfig cfg;
    cfg.seed = rng();
    cfg.n_restarts = 2;
    cfg.covariance_kind = trial % 2 == 0 ? CovarianceKind::Full : CovarianceKind::Diagonal;
    const BgmmModel model = fit_vb(data, 1 + static_cast<int>(rng() % 6), BgmmPriors{}, cfg);
    ++fits;
    const auto& trace = model.elbo_log();
    for (std::size_t i = 1; i < trace.size(); ++i) {
      if (trace[i] < trace[i - 1] - 1e-7 * (1.0 + std::abs(trace[i - 1]))) ++violations;
    }
  }
  std::ostringstream os;
  os << fits << " random fits, " << violations << " ELBO decreases at 1e-7";
  return {violations == 0, os.str()};
}

std::pair<bool, std::string> aic_recovery() {
  std::vector<std::future<int>> jobs;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    jobs.push_back(std::async(std::launch::async, [seed]() {
      SynthSpec spec = SynthSpec::clustered(1, 3, 17, 500, 10, 6.0, 1000 + seed);
      const Dataset data = gen_synthetic(spec).dataset;
      FitConfig cfg;
      cfg.seed = seed;
      const GmmModel model = select_by_aic(data.features_matrix(), cfg);
      return model.component_count();
    }));
  }
  int hits = 0;
  std::ostringstream picks;
  for (auto& job : jobs) {
    const int c = job.get();
    picks << c << ' ';
    if (c == 3) ++hits;
  }
  std::ostringstream os;
  os << "picked components per seed: " << picks.str() << "-> " << hits << "/10 chose 3";
  return {hits >= 8, os.str()};
}

std::pair<bool, std::string> bgmm_pruning() {
  std::vector<std::future<int>> jobs;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    jobs.push_back(std::async(std::launch::async, [seed]() {
      SynthSpec spec = SynthSpec::clustered(1, 3, 17, 500, 10, 6.0, 1000 + seed);
      const Dataset data = gen_synthetic(spec).dataset;
      FitConfig cfg;
      cfg.seed = seed;
      const BgmmModel model = fit_vb(data.features_matrix(), 10, BgmmPriors{}, cfg);
      return model.effective_components();
    }));
  }
  int hits = 0;
  std::ostringstream picks;
  for (auto& job : jobs) {
    const int c = job.get();
    picks << c << ' ';
    if (c == 3) ++hits;
  }

  // Degenerate input: five identical points must fit without singularity.
  Matrix same = Matrix::Zero(5, 17);
  same.rowwise() = Vector::Constant(17, 2.0).transpose();
  FitConfig cfg;
  cfg.seed = 0;
  const BgmmModel degenerate = fit_vb(same, 10, BgmmPriors{}, cfg);
  const bool degenerate_ok = degenerate.effective_components() == 1 &&
                             std::isfinite(degenerate.elbo_log().back()) &&
                             std::isfinite(degenerate.log_likelihood(
                                 Vector::Constant(17, 2.0)));

  std::ostringstream os;
  os << "effective components per seed: " << picks.str() << "-> " << hits
     << "/10 found 3; degenerate 5-point fit "
     << (degenerate_ok ? "stayed finite with 1 component" : "FAILED");
  return {hits >= 8 && degenerate_ok, os.str()};
}

std::pair<bool, std::string> order_invariance(const std::string& cli, const fs::path& work) {
  const fs::path dir = work / "order";
  fs::create_directories(dir);

  SynthSpec spec = SynthSpec::cfee6(5, /*samples_per_class=*/40,
                                    /*components_per_class=*/1, /*n_subjects=*/8, 6.0);
  const SynthData bench = gen_synthetic(spec);
  FitConfig cfg;
  cfg.seed = 11;
  cfg.max_components = 3;
  cfg.n_restarts = 2;

  auto train_in = [&](const std::vector<int>& order) {
    EnsembleModel model(spec.schedule, InferenceMode::ArgmaxSingleSpace, ModelFamily::Gmm,
                        11);
    for (int t : order) model.train_task(t, task_subset(bench.dataset, spec.schedule, t), cfg);
    return model;
  };

  const EnsembleModel base = train_in({1, 2, 3, 4, 5, 6});
  base.save(dir / "base.json");
  const std::string base_bytes = read_file(dir / "base.json");

  std::mt19937_64 rng(99);
  std::mt19937_64 probe_rng(123);
  std::vector<Vector> probes;
  for (int i = 0; i < 1000; ++i) probes.push_back(random_vec(probe_rng, 17, 6.0));
  std::vector<Prediction> base_preds;
  for (const auto& x : probes) base_preds.push_back(base.predict_agnostic(x));

  for (int perm = 0; perm < 5; ++perm) {
    std::vector<int> tail{2, 3, 4, 5, 6};
    std::shuffle(tail.begin(), tail.end(), rng);
    std::vector<int> order{1};
    order.insert(order.end(), tail.begin(), tail.end());
    const EnsembleModel shuffled = train_in(order);
    const fs::path path = dir / ("perm" + std::to_string(perm) + ".json");
    shuffled.save(path);
    if (read_file(path) != base_bytes) {
      return {false, "permutation " + std::to_string(perm) + " produced different bytes"};
    }
    for (std::size_t i = 0; i < probes.size(); ++i) {
      const Prediction p = shuffled.predict_agnostic(probes[i]);
      if (p.class_id != base_preds[i].class_id || p.scores != base_preds[i].scores) {
        return {false, "prediction diverged on probe " + std::to_string(i)};
      }
    }
  }

  // The CLI path: --task-order must reproduce the default-order checkpoint.
  write_synthetic(bench, work / "order_data");
  const std::string common =
      " --data " + (work / "order_data/features.csv").string() + " --manifest " +
      (work / "order_data/manifest.csv").string() +
      " --schedule builtin:cfee6 --family gmm --seed 11 --max-components 3 --restarts 2";
  if (run_cli(cli, "train" + common + " --out " + (work / "order_a").string()) != 0) {
    return {false, "CLI train (default order) failed"};
  }
  if (run_cli(cli, "train" + common + " --task-order 1,5,3,6,2,4 --out " +
                       (work / "order_b").string()) != 0) {
    return {false, "CLI train (permuted order) failed"};
  }
  if (read_file(work / "order_a/model_t6.json") != read_file(work / "order_b/model_t6.json")) {
    return {false, "CLI --task-order changed the final checkpoint bytes"};
  }
  return {true, "5 permutations byte-identical, 1000 probes identical, CLI order matches"};
}

// Shared state between the end-to-end run and the dominance check.
struct PipelineResult {
  double acc_final = 0.0;
  double bayes_acc = 0.0;
  fs::path model_dir;
  fs::path holdout_features;
  fs::path holdout_manifest;
  SynthSpec spec;
};
PipelineResult g_pipeline;

std::pair<bool, std::string> end_to_end(const std::string& cli, const fs::path& work) {
  const fs::path data_dir = work / "e2e_data";
  const fs::path train_dir = work / "e2e_train";
  const fs::path eval_dir = work / "e2e_eval";

  SynthSpec spec = SynthSpec::cfee6(2025);
  const SynthData bench = gen_synthetic(spec);
  write_synthetic(bench, data_dir);
  g_pipeline.spec = spec;

  if (run_cli(cli, "train --data " + (data_dir / "features.csv").string() + " --manifest " +
                       (data_dir / "manifest.csv").string() +
                       " --schedule builtin:cfee6 --family gmm --seed 7 --holdout 0.2 "
                       "--holdout-seed 7 --out " +
                       train_dir.string()) != 0) {
    return {false, "CLI train failed"};
  }
  if (run_cli(cli, "eval --model-dir " + train_dir.string() + " --data " +
                       (train_dir / "holdout_features.csv").string() + " --manifest " +
                       (train_dir / "holdout_manifest.csv").string() + " --out " +
                       eval_dir.string()) != 0) {
    return {false, "CLI eval failed"};
  }

  const auto metrics = nlohmann::json::parse(read_file(eval_dir / "metrics.json"));
  const std::vector<double> curve = metrics.at("acc_curve").get<std::vector<double>>();
  if (curve.size() != 6) return {false, "accuracy curve does not have 6 entries"};
  const double acc = curve.back();

  // Bayes-optimal reference on the same held-out samples.
  const TaskSchedule schedule = builtin_cfee6_schedule();
  const LabelMap labels =
      LabelMap::from_manifest(train_dir / "holdout_manifest.csv", schedule);
  const Dataset holdout = parse_feature_csv(train_dir / "holdout_features.csv", labels);
  int bayes_correct = 0;
  for (const auto& s : holdout.samples) {
    if (bayes_optimal_predict(s.features, spec) == s.class_id) ++bayes_correct;
  }
  const double bayes_acc =
      static_cast<double>(bayes_correct) / static_cast<double>(holdout.samples.size());

  g_pipeline.acc_final = acc;
  g_pipeline.bayes_acc = bayes_acc;
  g_pipeline.model_dir = train_dir;
  g_pipeline.holdout_features = train_dir / "holdout_features.csv";
  g_pipeline.holdout_manifest = train_dir / "holdout_manifest.csv";

  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << "ACC(6) = " << acc
     << ", Bayes-optimal = " << bayes_acc << ", gap = " << std::abs(acc - bayes_acc);
  return {acc >= 0.95 && std::abs(acc - bayes_acc) <= 0.02, os.str()};
}

std::pair<bool, std::string> subset_dominance() {
  if (g_pipeline.model_dir.empty()) {
    return {false, "end-to-end pipeline did not run"};
  }
  const EnsembleModel model = EnsembleModel::load(g_pipeline.model_dir / "model_t6.json");
  const TaskSchedule& schedule = model.schedule();
  const LabelMap labels = LabelMap::from_manifest(g_pipeline.holdout_manifest, schedule);
  const Dataset holdout = parse_feature_csv(g_pipeline.holdout_features, labels);

  int counterexamples = 0;
  std::map<int, std::pair<int, int>> aware_hits;     // task -> (n, hits)
  std::map<int, std::pair<int, int>> agnostic_hits;  // task -> (n, hits)
  for (const auto& s : holdout.samples) {
    const int task = schedule.task_of_class(s.class_id);
    const bool agnostic = model.predict_agnostic(s.features).class_id == s.class_id;
    const bool aware = model.predict_aware(s.features, task).class_id == s.class_id;
    if (agnostic && !aware) ++counterexamples;
    auto& aw = aware_hits[task];
    ++aw.first;
    if (aware) ++aw.second;
    auto& ag = agnostic_hits[task];
    ++ag.first;
    if (agnostic) ++ag.second;
  }
  bool per_task_ok = true;
  for (const auto& [task, aw] : aware_hits) {
    const auto& ag = agnostic_hits[task];
    if (static_cast<double>(aw.second) / aw.first <
        static_cast<double>(ag.second) / ag.first) {
      per_task_ok = false;
    }
  }
  std::ostringstream os;
  os << holdout.samples.size() << " samples, " << counterexamples
     << " aware-misses-agnostic-hit counterexamples";
  return {counterexamples == 0 && per_task_ok, os.str()};
}

std::pair<bool, std::string> determinism(const std::string& cli, const fs::path& work) {
  auto one_run = [&](const fs::path& dir) -> bool {
    const fs::path data = dir / "data";
    const fs::path train = dir / "train";
    const fs::path eval = dir / "eval";
    if (run_cli(cli, "synth --preset cfee6 --samples 60 --subjects 8 --seed 3 --out " +
                         data.string()) != 0) {
      return false;
    }
    if (run_cli(cli, "train --data " + (data / "features.csv").string() + " --manifest " +
                         (data / "manifest.csv").string() +
                         " --schedule builtin:cfee6 --family gmm --seed 3 "
                         "--max-components 3 --restarts 2 --holdout 0.25 --holdout-seed 5 "
                         "--out " +
                         train.string()) != 0) {
      return false;
    }
    return run_cli(cli, "eval --model-dir " + train.string() + " --data " +
                            (train / "holdout_features.csv").string() + " --manifest " +
                            (train / "holdout_manifest.csv").string() + " --out " +
                            eval.string()) == 0;
  };

  const fs::path a = work / "det_a";
  const fs::path b = work / "det_b";
  if (!one_run(a)) return {false, "first pipeline run failed"};
  if (!one_run(b)) return {false, "second pipeline run failed"};

  std::vector<std::string> files{"data/features.csv",  "data/manifest.csv",
                                 "data/schedule.json", "data/ground_truth.json",
                                 "train/train_log.json", "eval/metrics.json",
                                 "eval/summary.txt",   "eval/confusion.csv",
                                 "eval/confusion.pgm"};
  for (int t = 1; t <= 6; ++t) files.push_back("train/model_t" + std::to_string(t) + ".json");
  for (const auto& rel : files) {
    if (read_file(a / rel) != read_file(b / rel)) {
      return {false, rel + " differs between identical runs"};
    }
    if (read_file(a / rel).empty()) {
      return {false, rel + " is empty"};
    }
  }
  std::ostringstream os;
  os << files.size() << " artifacts byte-identical across two full pipeline runs";
  return {true, os.str()};
}

void optional_cfee_reproduction(const std::string& cli, const fs::path& work) {
  const char* env = std::getenv("AUCIL_CFEE_DIR");
  if (!env || !*env) {
    std::cout << "[SKIP] criterion 11 cfee-reproduction: set AUCIL_CFEE_DIR to a directory "
                 "with openface.csv + manifest.csv to run the licensed-data path\n";
    return;
  }
  const fs::path src(env);
  for (const char* family : {"bgmm", "gmm"}) {
    const fs::path train_dir = work / (std::string("cfee_") + family);
    const fs::path eval_dir = work / (std::string("cfee_eval_") + family);
    const std::string base =
        std::string("train --data ") + (src / "openface.csv").string() + " --manifest " +
        (src / "manifest.csv").string() +
        " --format openface --schedule builtin:cfee6 --family " + family +
        " --seed 1 --holdout 0.2 --out " + train_dir.string();
    if (run_cli(cli, base) != 0) {
      std::cout << "[SKIP] criterion 11 cfee-reproduction: training failed for " << family
                << '\n';
      continue;
    }
    if (run_cli(cli, "eval --model-dir " + train_dir.string() + " --data " +
                         (train_dir / "holdout_features.csv").string() + " --manifest " +
                         (train_dir / "holdout_manifest.csv").string() + " --out " +
                         eval_dir.string()) != 0) {
      std::cout << "[SKIP] criterion 11 cfee-reproduction: eval failed for " << family
                << '\n';
      continue;
    }
    const auto metrics = nlohmann::json::parse(read_file(eval_dir / "metrics.json"));
    const std::vector<double> curve = metrics.at("acc_curve").get<std::vector<double>>();
    const double first = curve.front();
    const double last = curve.back();
    const double want_first = std::string(family) == "bgmm" ? 0.92 : 0.82;
    const double want_last = std::string(family) == "bgmm" ? 0.75 : 0.57;
    const bool reproduced =
        std::abs(first - want_first) <= 0.05 && std::abs(last - want_last) <= 0.05;
    std::cout << "[INFO] criterion 11 cfee-reproduction (" << family << "): ACC(1) = "
              << first << " vs " << want_first << ", ACC(6) = " << last << " vs "
              << want_last << " -> " << (reproduced ? "reproduced" : "deviation")
              << " (non-gating)\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <path-to-cli>\n";
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path work = fs::temp_directory_path() / "aucil_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  criterion(1, "headline-param-count", headline_param_count);
  criterion(2, "density-oracle", density_oracle);
  criterion(3, "em-monotonicity", em_monotone);
  criterion(4, "vb-monotonicity", vb_monotone);
  criterion(5, "aic-recovery", aic_recovery);
  criterion(6, "bgmm-pruning", bgmm_pruning);
  criterion(7, "task-order-invariance", [&]() { return order_invariance(cli, work); });
  criterion(9, "end-to-end-benchmark", [&]() { return end_to_end(cli, work); });
  criterion(8, "subset-argmax-dominance", subset_dominance);
  criterion(10, "determinism", [&]() { return determinism(cli, work); });
  optional_cfee_reproduction(cli, work);

  std::cout << (g_failures == 0 ? "ALL ACCEPTANCE CRITERIA PASSED\n"
                                : std::to_string(g_failures) + " CRITERIA FAILED\n");
  return g_failures == 0 ? 0 : 1;
}
