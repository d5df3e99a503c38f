#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "aucil/schedule.hpp"

namespace aucil {

// Free-parameter counts of K class mixtures with C full-covariance
// components in S dimensions.
//   nominal: (S + S(S-1)/2) * C * K  — means plus strictly-lower-triangular
//            covariance entries, no weights (the compact headline count).
//   exact:   K*C*(S + S(S+1)/2) + K*(C-1) — means, full symmetric
//            covariances, and free mixture weights.
struct ParamCount {
  long long nominal = 0;
  long long exact = 0;
  long long bytes_at_64bit = 0;
};

ParamCount param_count(int dim, int components, int classes);

struct ConfusionMatrix {
  Eigen::MatrixXi counts;        // rows = truth, cols = prediction
  std::vector<int> class_ids;    // schedule order, row/col index -> class id
  std::vector<int> task_starts;  // block start index per task, plus total at the end
  long long within_task_errors = 0;
  long long between_task_errors = 0;

  long long total() const { return counts.sum(); }
  long long correct() const { return counts.diagonal().sum(); }
};

// Pooled accuracy over all samples whose true class lies in the first t
// tasks of the schedule: (1/n_t) * sum 1(y_i == yhat_i).
double cumulative_accuracy(const std::vector<int>& preds, const std::vector<int>& labels,
                           const TaskSchedule& schedule, int t);

// Mean of per-task accuracies over the first t tasks (the unweighted
// variant; cumulative_accuracy pools samples).
double task_mean_accuracy(const std::vector<int>& preds, const std::vector<int>& labels,
                          const TaskSchedule& schedule, int t);

ConfusionMatrix confusion_matrix(const std::vector<int>& preds,
                                 const std::vector<int>& labels,
                                 const TaskSchedule& schedule);

struct SeedSummary {
  int runs = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

struct EvalReport {
  TaskSchedule schedule;
  std::vector<double> acc_curve;           // ACC(1..T), pooled
  std::vector<double> acc_curve_task_mean; // per-task-mean variant
  std::vector<int> n_t;                    // pooled test counts per prefix
  std::map<int, double> task_aware_acc;    // task id -> accuracy
  std::map<int, double> task_agnostic_acc; // task id -> agnostic accuracy on its samples
  ConfusionMatrix confusion;
  ParamCount params;
  std::vector<double> final_acc_by_seed;   // filled by repeated-seed runs
};

SeedSummary summarize_seeds(const std::vector<double>& values);

// Writes metrics.json, summary.txt, confusion.csv, and confusion.pgm into
// `dir`. Refuses (throws) when the report holds no test samples.
void emit_report(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace aucil
