#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "aucil/engine.hpp"
#include "aucil/evaluation.hpp"
#include "aucil/synthetic.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_support.hpp"

using namespace aucil;
using testsup::scratch_dir;

namespace {

TaskSchedule two_task_schedule() {
  std::vector<TaskInfo> tasks(2);
  tasks[0].task_id = 1;
  tasks[0].classes = {{0, "a"}, {1, "b"}};
  tasks[1].task_id = 2;
  tasks[1].classes = {{2, "c"}, {3, "d"}};
  return TaskSchedule(std::move(tasks));
}

}  // namespace

TEST_CASE("cumulative_accuracy") {
  const TaskSchedule schedule = two_task_schedule();

  SUBCASE("all correct") {
    std::vector<int> labels{0, 1, 0, 1};
    CHECK(cumulative_accuracy(labels, labels, schedule, 1) == doctest::Approx(1.0));
  }

  SUBCASE("half correct") {
    std::vector<int> labels{0, 1, 0, 1, 0, 1};
    std::vector<int> preds{0, 1, 0, 0, 1, 0};
    CHECK(cumulative_accuracy(preds, labels, schedule, 1) == doctest::Approx(0.5));
  }

  SUBCASE("pooled, not task-averaged") {
    // 70 correct task-1 samples plus 30 wrong task-2 samples: 0.7 pooled.
    std::vector<int> labels;
    std::vector<int> preds;
    for (int i = 0; i < 70; ++i) {
      labels.push_back(0);
      preds.push_back(0);
    }
    for (int i = 0; i < 30; ++i) {
      labels.push_back(2);
      preds.push_back(0);
    }
    CHECK(cumulative_accuracy(preds, labels, schedule, 2) == doctest::Approx(0.7));
    // The task-mean variant averages 1.0 and 0.0 instead.
    CHECK(task_mean_accuracy(preds, labels, schedule, 2) == doctest::Approx(0.5));
  }

  SUBCASE("contract violations") {
    std::vector<int> labels{0};
    std::vector<int> two{0, 1};
    CHECK_THROWS_AS(cumulative_accuracy(two, labels, schedule, 1), ContractViolation);
    std::vector<int> task2_label{2};
    std::vector<int> pred{2};
    CHECK_THROWS_AS(cumulative_accuracy(pred, task2_label, schedule, 1), ContractViolation);
  }
}

TEST_CASE("accuracy is invariant under sample permutation and equals the trace ratio") {
  const TaskSchedule schedule = two_task_schedule();
  std::mt19937_64 rng(3);
  std::vector<int> labels;
  std::vector<int> preds;
  std::uniform_int_distribution<int> cls(0, 3);
  for (int i = 0; i < 200; ++i) {
    labels.push_back(cls(rng));
    preds.push_back(cls(rng));
  }
  const double acc = cumulative_accuracy(preds, labels, schedule, 2);

  const ConfusionMatrix cm = confusion_matrix(preds, labels, schedule);
  CHECK(acc == doctest::Approx(static_cast<double>(cm.correct()) /
                               static_cast<double>(cm.total())));

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> labels2;
  std::vector<int> preds2;
  for (std::size_t i : order) {
    labels2.push_back(labels[i]);
    preds2.push_back(preds[i]);
  }
  CHECK(cumulative_accuracy(preds2, labels2, schedule, 2) == doctest::Approx(acc));
}

TEST_CASE("confusion_matrix") {
  const TaskSchedule schedule = two_task_schedule();

  SUBCASE("perfect predictions are diagonal") {
    std::vector<int> labels{0, 0, 1, 2, 3, 3};
    const ConfusionMatrix cm = confusion_matrix(labels, labels, schedule);
    CHECK(cm.counts(0, 0) == 2);
    CHECK(cm.counts(3, 3) == 2);
    CHECK(cm.correct() == cm.total());
    CHECK(cm.within_task_errors == 0);
    CHECK(cm.between_task_errors == 0);
    CHECK(cm.task_starts == std::vector<int>{0, 2, 4});
  }

  SUBCASE("everything predicted as one class is a single column") {
    std::vector<int> labels{0, 1, 2, 3};
    std::vector<int> preds{0, 0, 0, 0};
    const ConfusionMatrix cm = confusion_matrix(preds, labels, schedule);
    for (int r = 0; r < 4; ++r) CHECK(cm.counts(r, 0) == 1);
    CHECK(cm.counts.col(1).sum() == 0);
    CHECK(cm.within_task_errors == 1);   // b -> a
    CHECK(cm.between_task_errors == 2);  // c, d -> a
  }
}

TEST_CASE("cross-task neighbors produce mostly between-task errors") {
  // Class layout constructed so each class's nearest neighbor lives in the
  // other task: pairs (a, c) and (b, d) nearly coincide.
  SynthSpec spec;
  spec.dim = 4;
  spec.samples_per_class = 60;
  spec.n_subjects = 3;
  spec.separation = 0.0;
  spec.seed = 17;
  spec.schedule = two_task_schedule();
  auto truth_at = [&](double offset) {
    ClassTruth t;
    t.weights = {1.0};
    t.means = {Vector::Constant(4, offset)};
    t.covariances = {Matrix::Identity(4, 4)};
    return t;
  };
  spec.classes = {truth_at(0.0), truth_at(10.0), truth_at(0.8), truth_at(10.8)};

  const SynthData bench = gen_synthetic(spec);
  auto [train, test] = split_dataset(bench.dataset, 0.7, 5);
  EnsembleModel model(spec.schedule, InferenceMode::ArgmaxSingleSpace, ModelFamily::Gmm, 1);
  FitConfig cfg;
  cfg.max_components = 1;
  cfg.n_restarts = 1;
  cfg.seed = 1;
  for (int t : {1, 2}) {
    Dataset subset;
    subset.feature_space_id = train.feature_space_id;
    subset.dim = train.dim;
    for (const auto& s : train.samples) {
      for (const auto& c : spec.schedule.task(t).classes) {
        if (s.class_id == c.id) subset.samples.push_back(s);
      }
    }
    model.train_task(t, subset, cfg);
  }
  std::vector<int> preds;
  std::vector<int> labels;
  for (const auto& s : test.samples) {
    preds.push_back(model.predict_agnostic(s.features).class_id);
    labels.push_back(s.class_id);
  }
  const ConfusionMatrix cm = confusion_matrix(preds, labels, spec.schedule);
  CHECK(cm.between_task_errors >= cm.within_task_errors);
  CHECK(cm.between_task_errors > 0);  // overlap guarantees some confusion
}

TEST_CASE("param_count") {
  const ParamCount headline = param_count(17, 10, 22);
  CHECK(headline.nominal == 33660);
  CHECK(headline.exact == 22 * 10 * 170 + 22 * 9);
  CHECK(headline.exact == 37598);
  CHECK(headline.bytes_at_64bit == 37598 * 8);

  const ParamCount tiny = param_count(1, 1, 1);
  CHECK(tiny.nominal == 1);
  CHECK(tiny.exact == 2);

  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const int s = 1 + static_cast<int>(rng() % 64);
    const int c = 1 + static_cast<int>(rng() % 12);
    const int k = 1 + static_cast<int>(rng() % 30);
    const ParamCount pc = param_count(s, c, k);
    CHECK(pc.exact >= pc.nominal);
  }

  CHECK_THROWS_AS(param_count(0, 1, 1), ContractViolation);
}

TEST_CASE("emit_report writes coherent files") {
  const TaskSchedule schedule = two_task_schedule();
  std::vector<int> labels{0, 1, 2, 3, 0, 2};
  std::vector<int> preds{0, 1, 2, 2, 1, 2};

  EvalReport report;
  report.schedule = schedule;
  report.acc_curve = {1.0, cumulative_accuracy(preds, labels, schedule, 2)};
  report.acc_curve_task_mean = {1.0, task_mean_accuracy(preds, labels, schedule, 2)};
  report.n_t = {3, 6};
  report.task_aware_acc = {{1, 1.0}, {2, 0.9}};
  report.task_agnostic_acc = {{1, 0.9}, {2, 0.8}};
  report.confusion = confusion_matrix(preds, labels, schedule);
  report.params = param_count(4, 2, 4);

  const auto dir = scratch_dir("report");
  emit_report(report, dir);
  CHECK(std::filesystem::exists(dir / "metrics.json"));
  CHECK(std::filesystem::exists(dir / "summary.txt"));
  CHECK(std::filesystem::exists(dir / "confusion.csv"));
  CHECK(std::filesystem::exists(dir / "confusion.pgm"));

  // metrics.json carries the full curve.
  const auto metrics = nlohmann::json::parse(testsup::read_file(dir / "metrics.json"));
  CHECK(metrics["acc_curve"].size() == 2);
  CHECK(metrics["param_count"]["nominal"].get<long long>() == report.params.nominal);

  // The CSV round-trips the counts.
  std::ifstream csv(dir / "confusion.csv");
  std::string line;
  std::getline(csv, line);  // header
  int row = 0;
  while (std::getline(csv, line)) {
    std::size_t pos = line.find(',');
    int col = 0;
    while (pos != std::string::npos) {
      const std::size_t next = line.find(',', pos + 1);
      const std::string cell = line.substr(pos + 1, next == std::string::npos
                                                        ? std::string::npos
                                                        : next - pos - 1);
      CHECK(std::stoi(cell) == report.confusion.counts(row, col));
      ++col;
      pos = next;
    }
    CHECK(col == 4);
    ++row;
  }
  CHECK(row == 4);

  // PGM header sanity.
  const std::string pgm = testsup::read_file(dir / "confusion.pgm");
  CHECK(pgm.rfind("P2\n", 0) == 0);
}

TEST_CASE("emit_report refuses an empty test set") {
  EvalReport report;
  report.schedule = two_task_schedule();
  report.acc_curve = {};
  report.n_t = {};
  report.confusion = confusion_matrix({}, {}, report.schedule);
  report.params = param_count(1, 1, 1);
  const auto dir = scratch_dir("report_empty");
  CHECK_THROWS_AS(emit_report(report, dir), Error);
}

TEST_CASE("seed summary") {
  const SeedSummary s = summarize_seeds({0.5, 0.7, 0.6});
  CHECK(s.runs == 3);
  CHECK(s.mean == doctest::Approx(0.6));
  CHECK(s.stddev == doctest::Approx(0.1));
}
