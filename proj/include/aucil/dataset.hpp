#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "aucil/gaussian.hpp"
#include "aucil/schedule.hpp"

namespace aucil {

struct Sample {
  Vector features;
  int class_id = 0;
  std::string subject_id;
  std::string sample_id;
};

struct ParseStats {
  int rows_seen = 0;
  int rows_dropped_unsuccessful = 0;
  int values_clamped = 0;
  std::vector<std::string> warnings;
};

struct Dataset {
  std::vector<Sample> samples;
  std::string feature_space_id;
  int dim = 0;
  ParseStats stats;

  std::map<int, int> class_histogram() const;
  std::set<std::string> subjects() const;
  // Row-per-sample matrices.
  Matrix features_matrix() const;
  Matrix class_features(int class_id) const;
  std::vector<int> labels() const;
};

// Resolves a sample id to (class id, subject id), either through a manifest
// CSV (columns sample_id, class_label, subject_id) or a regular expression
// with two capture groups (class label, subject id) applied to the sample
// id. Class labels must exist in the schedule.
class LabelMap {
 public:
  static LabelMap from_manifest(const std::filesystem::path& manifest_csv,
                                const TaskSchedule& schedule);
  static LabelMap from_pattern(const std::string& regex_pattern,
                               const TaskSchedule& schedule);

  struct Resolved {
    int class_id = 0;
    std::string subject_id;
  };
  // Throws RowLabelError when the sample id cannot be resolved.
  Resolved resolve(const std::string& sample_id) const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

// The 17 intensity columns emitted by the upstream face-analysis tool, in
// canonical order. Parsing locates them by name in any column order.
const std::vector<std::string>& openface_au_columns();

// Parses a facial action-unit intensity CSV: finds the 17 *_r intensity
// columns by name, drops rows whose `success` column is 0, clamps values to
// [0, 5], and resolves labels through `labels`. feature_space_id is "au17".
Dataset parse_openface_csv(const std::filesystem::path& path, const LabelMap& labels);

// Generic feature CSV: first column is the sample id, remaining columns are
// features; the dimension is inferred from the header. Empty space id
// defaults to the file stem.
Dataset parse_feature_csv(const std::filesystem::path& path, const LabelMap& labels,
                          const std::string& feature_space_id = "");

// Deterministic split. With subject_disjoint (the default) all samples of a
// subject land on one side; otherwise rows are shuffled individually.
// Warnings about classes missing from either side are attached to the
// returned datasets' stats.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction,
                                          std::uint64_t seed, bool subject_disjoint = true);

void write_feature_csv(const Dataset& ds, const std::filesystem::path& features_csv,
                       const std::filesystem::path& manifest_csv,
                       const TaskSchedule& schedule);

}  // namespace aucil
