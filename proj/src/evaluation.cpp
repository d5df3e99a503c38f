#include "aucil/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "aucil/errors.hpp"
#include "json.hpp"

namespace aucil {

ParamCount param_count(int dim, int components, int classes) {
  detail::require(dim >= 1 && components >= 1 && classes >= 1,
                  "param_count arguments must be positive");
  const long long s = dim;
  const long long c = components;
  const long long k = classes;
  ParamCount out;
  out.nominal = (s + s * (s - 1) / 2) * c * k;
  out.exact = k * c * (s + s * (s + 1) / 2) + k * (c - 1);
  out.bytes_at_64bit = out.exact * 8;
  return out;
}

namespace {

// Index of each class position in schedule order, and the prefix-task lookup.
struct ScheduleIndex {
  std::map<int, int> class_to_row;
  std::map<int, int> class_to_task_pos;  // 1-based schedule position
  std::vector<int> task_starts;

  explicit ScheduleIndex(const TaskSchedule& schedule) {
    int row = 0;
    int pos = 0;
    for (const auto& t : schedule.tasks()) {
      ++pos;
      task_starts.push_back(row);
      for (const auto& c : t.classes) {
        class_to_row[c.id] = row++;
        class_to_task_pos[c.id] = pos;
      }
    }
    task_starts.push_back(row);
  }
};

}  // namespace

double cumulative_accuracy(const std::vector<int>& preds, const std::vector<int>& labels,
                           const TaskSchedule& schedule, int t) {
  detail::require(preds.size() == labels.size(), "preds and labels lengths differ");
  detail::require(t >= 1 && t <= schedule.task_count(), "task prefix out of range");
  detail::require(!labels.empty(), "empty test set");
  const ScheduleIndex idx(schedule);
  long long n = 0;
  long long correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto it = idx.class_to_task_pos.find(labels[i]);
    detail::require(it != idx.class_to_task_pos.end(),
                    "label class id " + std::to_string(labels[i]) +
                        " is not in the schedule");
    detail::require(it->second <= t, "label from a task outside the evaluated prefix");
    ++n;
    if (preds[i] == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

double task_mean_accuracy(const std::vector<int>& preds, const std::vector<int>& labels,
                          const TaskSchedule& schedule, int t) {
  detail::require(preds.size() == labels.size(), "preds and labels lengths differ");
  detail::require(t >= 1 && t <= schedule.task_count(), "task prefix out of range");
  const ScheduleIndex idx(schedule);
  std::vector<long long> n(static_cast<std::size_t>(t), 0);
  std::vector<long long> correct(static_cast<std::size_t>(t), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int pos = idx.class_to_task_pos.at(labels[i]);
    detail::require(pos <= t, "label from a task outside the evaluated prefix");
    ++n[static_cast<std::size_t>(pos - 1)];
    if (preds[i] == labels[i]) ++correct[static_cast<std::size_t>(pos - 1)];
  }
  double sum = 0.0;
  int used = 0;
  for (int i = 0; i < t; ++i) {
    if (n[static_cast<std::size_t>(i)] == 0) continue;
    sum += static_cast<double>(correct[static_cast<std::size_t>(i)]) /
           static_cast<double>(n[static_cast<std::size_t>(i)]);
    ++used;
  }
  detail::require(used > 0, "empty test set");
  return sum / used;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& preds,
                                 const std::vector<int>& labels,
                                 const TaskSchedule& schedule) {
  detail::require(preds.size() == labels.size(), "preds and labels lengths differ");
  const ScheduleIndex idx(schedule);
  const int k = schedule.total_classes();

  ConfusionMatrix cm;
  cm.counts = Eigen::MatrixXi::Zero(k, k);
  cm.class_ids = schedule.classes_in_order();
  cm.task_starts = idx.task_starts;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int row = idx.class_to_row.at(labels[i]);
    const int col = idx.class_to_row.at(preds[i]);
    ++cm.counts(row, col);
    if (labels[i] != preds[i]) {
      const bool same_task =
          idx.class_to_task_pos.at(labels[i]) == idx.class_to_task_pos.at(preds[i]);
      (same_task ? cm.within_task_errors : cm.between_task_errors) += 1;
    }
  }
  return cm;
}

SeedSummary summarize_seeds(const std::vector<double>& values) {
  SeedSummary s;
  s.runs = static_cast<int>(values.size());
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.stddev = values.size() > 1
                 ? std::sqrt(sq / static_cast<double>(values.size() - 1))
                 : 0.0;
  return s;
}

namespace {

void write_confusion_csv(const ConfusionMatrix& cm, const TaskSchedule& schedule,
                         const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "truth\\prediction";
  for (int id : cm.class_ids) out << ',' << schedule.class_info(id).label;
  out << '\n';
  for (Eigen::Index r = 0; r < cm.counts.rows(); ++r) {
    out << schedule.class_info(cm.class_ids[static_cast<std::size_t>(r)]).label;
    for (Eigen::Index c = 0; c < cm.counts.cols(); ++c) out << ',' << cm.counts(r, c);
    out << '\n';
  }
}

// Row-normalized grayscale rendering with black task-boundary rules; high
// counts are dark. Cells are scaled up so the grid is viewable directly.
void write_confusion_pgm(const ConfusionMatrix& cm, const std::filesystem::path& path) {
  const int k = static_cast<int>(cm.counts.rows());
  const int cell = 12;
  const int size = k * cell;
  std::vector<std::vector<int>> img(static_cast<std::size_t>(size),
                                    std::vector<int>(static_cast<std::size_t>(size), 255));

  for (int r = 0; r < k; ++r) {
    const double row_total = cm.counts.row(r).sum();
    for (int c = 0; c < k; ++c) {
      const double frac = row_total > 0 ? cm.counts(r, c) / row_total : 0.0;
      const int gray = 255 - static_cast<int>(std::lround(frac * 255.0));
      for (int dy = 0; dy < cell; ++dy) {
        for (int dx = 0; dx < cell; ++dx) {
          img[static_cast<std::size_t>(r * cell + dy)]
             [static_cast<std::size_t>(c * cell + dx)] = gray;
        }
      }
    }
  }
  // Black rules at task boundaries (task_starts carries 0 and the total,
  // which draw the outer frame).
  for (int s : cm.task_starts) {
    const int line = std::min(s * cell, size - 1);
    for (int i = 0; i < size; ++i) {
      img[static_cast<std::size_t>(line)][static_cast<std::size_t>(i)] = 0;
      img[static_cast<std::size_t>(i)][static_cast<std::size_t>(line)] = 0;
    }
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "P2\n" << size << ' ' << size << "\n255\n";
  for (const auto& row : img) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << row[i] << (i + 1 == row.size() ? '\n' : ' ');
    }
  }
}

nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["acc_curve"] = r.acc_curve;
  j["acc_curve_task_mean"] = r.acc_curve_task_mean;
  j["n_t"] = r.n_t;

  nlohmann::json aware = nlohmann::json::object();
  for (const auto& [task_id, acc] : r.task_aware_acc) {
    aware[std::to_string(task_id)] = acc;
  }
  j["task_aware_acc"] = std::move(aware);
  nlohmann::json agn = nlohmann::json::object();
  for (const auto& [task_id, acc] : r.task_agnostic_acc) {
    agn[std::to_string(task_id)] = acc;
  }
  j["task_agnostic_acc"] = std::move(agn);

  nlohmann::json conf;
  conf["class_ids"] = r.confusion.class_ids;
  nlohmann::json labels = nlohmann::json::array();
  for (int id : r.confusion.class_ids) labels.push_back(r.schedule.class_info(id).label);
  conf["class_labels"] = std::move(labels);
  conf["task_starts"] = r.confusion.task_starts;
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.confusion.counts.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < r.confusion.counts.cols(); ++c) {
      row.push_back(r.confusion.counts(i, c));
    }
    rows.push_back(std::move(row));
  }
  conf["counts"] = std::move(rows);
  conf["within_task_errors"] = r.confusion.within_task_errors;
  conf["between_task_errors"] = r.confusion.between_task_errors;
  j["confusion"] = std::move(conf);

  j["param_count"] = {{"nominal", r.params.nominal},
                      {"exact", r.params.exact},
                      {"bytes_at_64bit", r.params.bytes_at_64bit}};
  if (!r.final_acc_by_seed.empty()) {
    const SeedSummary s = summarize_seeds(r.final_acc_by_seed);
    j["seeds"] = {{"final_acc_values", r.final_acc_by_seed},
                  {"runs", s.runs},
                  {"final_acc_mean", s.mean},
                  {"final_acc_stddev", s.stddev}};
  }
  return j;
}

void write_summary_txt(const EvalReport& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << std::fixed << std::setprecision(4);
  out << "cumulative task-agnostic accuracy (pooled)\n";
  for (std::size_t t = 0; t < r.acc_curve.size(); ++t) {
    out << "  ACC(" << (t + 1) << ") = " << r.acc_curve[t] << "  [n=" << r.n_t[t] << "]\n";
  }
  out << "\nper-task accuracy (final model)\n";
  out << "  task    aware  agnostic\n";
  for (const auto& [task_id, acc] : r.task_aware_acc) {
    out << "  " << std::setw(4) << task_id << "  " << std::setw(7) << acc << "  "
        << std::setw(8) << r.task_agnostic_acc.at(task_id) << '\n';
  }
  out << "\nconfusion: " << r.confusion.correct() << "/" << r.confusion.total()
      << " correct, errors within tasks " << r.confusion.within_task_errors
      << ", between tasks " << r.confusion.between_task_errors << '\n';
  out << "\nparameters: nominal " << r.params.nominal << ", exact " << r.params.exact
      << " (" << r.params.bytes_at_64bit << " bytes at 64-bit)\n";
  if (!r.final_acc_by_seed.empty()) {
    const SeedSummary s = summarize_seeds(r.final_acc_by_seed);
    out << "\nrepeated runs: " << s.runs << ", final ACC mean " << s.mean << " +- "
        << s.stddev << '\n';
  }
}

}  // namespace

void emit_report(const EvalReport& report, const std::filesystem::path& dir) {
  if (report.confusion.total() == 0) {
    throw Error("refusing to emit a report for an empty test set");
  }
  detail::require(report.acc_curve.size() == report.n_t.size(),
                  "accuracy curve and count vector lengths differ");
  std::filesystem::create_directories(dir);

  {
    std::ofstream out(dir / "metrics.json", std::ios::binary);
    if (!out) throw IoError("cannot write '" + (dir / "metrics.json").string() + "'");
    out << report_to_json(report).dump(2) << '\n';
  }
  write_summary_txt(report, dir / "summary.txt");
  write_confusion_csv(report.confusion, report.schedule, dir / "confusion.csv");
  write_confusion_pgm(report.confusion, dir / "confusion.pgm");
}

}  // namespace aucil
