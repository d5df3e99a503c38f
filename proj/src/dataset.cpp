#include "aucil/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <regex>
#include <sstream>

namespace aucil {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

struct CsvFile {
  std::vector<std::string> header;  // trimmed
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;  // 1-based line of each data row
};

CsvFile read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  CsvFile csv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (csv.header.empty()) {
      for (auto& f : fields) csv.header.push_back(trim(f));
    } else {
      csv.rows.push_back(std::move(fields));
      csv.line_numbers.push_back(line_no);
    }
  }
  if (csv.header.empty()) throw SchemaError("'" + path.string() + "' has no header row");
  return csv;
}

double parse_double(const std::string& raw, const std::filesystem::path& path, int line) {
  const std::string s = trim(raw);
  double value = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ParseError("'" + path.string() + "' line " + std::to_string(line) +
                     ": cannot parse number '" + s + "'");
  }
  return value;
}

int find_column(const CsvFile& csv, const std::string& name) {
  for (std::size_t i = 0; i < csv.header.size(); ++i) {
    if (csv.header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

// Column holding the per-row sample id, when the file has one.
int find_id_column(const CsvFile& csv) {
  for (const char* candidate : {"sample_id", "input", "filename", "file", "image"}) {
    const int idx = find_column(csv, candidate);
    if (idx >= 0) return idx;
  }
  return -1;
}

std::string stem_of(const std::filesystem::path& path) { return path.stem().string(); }

}  // namespace

std::map<int, int> Dataset::class_histogram() const {
  std::map<int, int> hist;
  for (const auto& s : samples) ++hist[s.class_id];
  return hist;
}

std::set<std::string> Dataset::subjects() const {
  std::set<std::string> out;
  for (const auto& s : samples) out.insert(s.subject_id);
  return out;
}

Matrix Dataset::features_matrix() const {
  Matrix m(static_cast<Eigen::Index>(samples.size()), dim);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = samples[i].features.transpose();
  }
  return m;
}

Matrix Dataset::class_features(int class_id) const {
  Eigen::Index n = 0;
  for (const auto& s : samples) {
    if (s.class_id == class_id) ++n;
  }
  Matrix m(n, dim);
  Eigen::Index row = 0;
  for (const auto& s : samples) {
    if (s.class_id == class_id) m.row(row++) = s.features.transpose();
  }
  return m;
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.class_id);
  return out;
}

struct LabelMap::Impl {
  const TaskSchedule* schedule = nullptr;
  TaskSchedule schedule_copy;
  bool use_manifest = false;
  std::map<std::string, Resolved> manifest;
  std::regex pattern;
  std::string pattern_text;
};

LabelMap LabelMap::from_manifest(const std::filesystem::path& manifest_csv,
                                 const TaskSchedule& schedule) {
  auto impl = std::make_shared<Impl>();
  impl->schedule_copy = schedule;
  impl->use_manifest = true;

  CsvFile csv = read_csv(manifest_csv);
  const int id_col = find_column(csv, "sample_id");
  const int class_col = find_column(csv, "class_label");
  const int subject_col = find_column(csv, "subject_id");
  if (id_col < 0 || class_col < 0 || subject_col < 0) {
    throw SchemaError("manifest '" + manifest_csv.string() +
                      "' must have columns sample_id, class_label, subject_id");
  }
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    const auto& row = csv.rows[i];
    const int need = std::max({id_col, class_col, subject_col});
    if (static_cast<int>(row.size()) <= need) {
      throw SchemaError("manifest '" + manifest_csv.string() + "' line " +
                        std::to_string(csv.line_numbers[i]) + ": too few fields");
    }
    const std::string label = trim(row[static_cast<std::size_t>(class_col)]);
    const auto class_id = impl->schedule_copy.class_id_of_label(label);
    if (!class_id) {
      throw RowLabelError("manifest '" + manifest_csv.string() + "' line " +
                          std::to_string(csv.line_numbers[i]) + ": class label '" + label +
                          "' is not in the schedule");
    }
    impl->manifest[trim(row[static_cast<std::size_t>(id_col)])] = {
        *class_id, trim(row[static_cast<std::size_t>(subject_col)])};
  }
  LabelMap lm;
  lm.impl_ = std::move(impl);
  return lm;
}

LabelMap LabelMap::from_pattern(const std::string& regex_pattern,
                                const TaskSchedule& schedule) {
  auto impl = std::make_shared<Impl>();
  impl->schedule_copy = schedule;
  impl->use_manifest = false;
  impl->pattern_text = regex_pattern;
  try {
    impl->pattern = std::regex(regex_pattern);
  } catch (const std::regex_error& e) {
    throw SchemaError("invalid label pattern '" + regex_pattern + "': " + e.what());
  }
  LabelMap lm;
  lm.impl_ = std::move(impl);
  return lm;
}

LabelMap::Resolved LabelMap::resolve(const std::string& sample_id) const {
  detail::require(impl_ != nullptr, "label map not initialized");
  if (impl_->use_manifest) {
    const auto it = impl_->manifest.find(sample_id);
    if (it == impl_->manifest.end()) {
      throw RowLabelError("sample id '" + sample_id + "' is not in the manifest");
    }
    return it->second;
  }
  std::smatch m;
  if (!std::regex_search(sample_id, m, impl_->pattern) || m.size() < 3) {
    throw RowLabelError("sample id '" + sample_id + "' does not match pattern '" +
                        impl_->pattern_text + "'");
  }
  const std::string label = m[1].str();
  const auto class_id = impl_->schedule_copy.class_id_of_label(label);
  if (!class_id) {
    throw RowLabelError("sample id '" + sample_id + "': class label '" + label +
                        "' is not in the schedule");
  }
  return {*class_id, m[2].str()};
}

const std::vector<std::string>& openface_au_columns() {
  static const std::vector<std::string> cols = {
      "AU01_r", "AU02_r", "AU04_r", "AU05_r", "AU06_r", "AU07_r", "AU09_r",
      "AU10_r", "AU12_r", "AU14_r", "AU15_r", "AU17_r", "AU20_r", "AU23_r",
      "AU25_r", "AU26_r", "AU45_r"};
  return cols;
}

Dataset parse_openface_csv(const std::filesystem::path& path, const LabelMap& labels) {
  CsvFile csv = read_csv(path);

  const auto& au_cols = openface_au_columns();
  std::vector<int> au_idx;
  std::vector<std::string> missing;
  for (const auto& name : au_cols) {
    const int idx = find_column(csv, name);
    if (idx < 0) {
      missing.push_back(name);
    } else {
      au_idx.push_back(idx);
    }
  }
  if (!missing.empty()) {
    std::string joined;
    for (const auto& m : missing) {
      if (!joined.empty()) joined += ", ";
      joined += m;
    }
    throw SchemaError("'" + path.string() + "' is missing intensity columns: " + joined);
  }

  const int success_col = find_column(csv, "success");
  const int id_col = find_id_column(csv);
  const bool single_row = csv.rows.size() == 1;

  Dataset ds;
  ds.feature_space_id = "au17";
  ds.dim = static_cast<int>(au_cols.size());

  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    const auto& row = csv.rows[i];
    const int line = csv.line_numbers[i];
    ++ds.stats.rows_seen;
    if (static_cast<int>(row.size()) < static_cast<int>(csv.header.size())) {
      throw ParseError("'" + path.string() + "' line " + std::to_string(line) +
                       ": expected " + std::to_string(csv.header.size()) + " fields, got " +
                       std::to_string(row.size()));
    }
    if (success_col >= 0 &&
        parse_double(row[static_cast<std::size_t>(success_col)], path, line) == 0.0) {
      ++ds.stats.rows_dropped_unsuccessful;
      continue;
    }

    Sample s;
    if (id_col >= 0) {
      s.sample_id = std::filesystem::path(trim(row[static_cast<std::size_t>(id_col)]))
                        .stem()
                        .string();
    } else if (single_row) {
      s.sample_id = stem_of(path);
    } else {
      s.sample_id = stem_of(path) + "#" + std::to_string(i);
    }

    s.features.resize(ds.dim);
    for (std::size_t j = 0; j < au_idx.size(); ++j) {
      double v = parse_double(row[static_cast<std::size_t>(au_idx[j])], path, line);
      if (v < 0.0 || v > 5.0) {
        const double clamped = std::clamp(v, 0.0, 5.0);
        ++ds.stats.values_clamped;
        if (ds.stats.values_clamped <= 10) {
          std::ostringstream w;
          w << "line " << line << ": " << au_cols[j] << " value " << v << " clamped to "
            << clamped;
          ds.stats.warnings.push_back(w.str());
        }
        v = clamped;
      }
      if (!std::isfinite(v)) {
        throw ParseError("'" + path.string() + "' line " + std::to_string(line) +
                         ": non-finite value in " + au_cols[j]);
      }
      s.features[static_cast<Eigen::Index>(j)] = v;
    }

    try {
      const auto resolved = labels.resolve(s.sample_id);
      s.class_id = resolved.class_id;
      s.subject_id = resolved.subject_id;
    } catch (const RowLabelError& e) {
      throw RowLabelError("'" + path.string() + "' line " + std::to_string(line) + ": " +
                          e.what());
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

Dataset parse_feature_csv(const std::filesystem::path& path, const LabelMap& labels,
                          const std::string& feature_space_id) {
  CsvFile csv = read_csv(path);
  if (csv.header.size() < 2) {
    throw SchemaError("'" + path.string() +
                      "' needs a sample-id column plus at least one feature column");
  }

  Dataset ds;
  ds.feature_space_id = feature_space_id.empty() ? stem_of(path) : feature_space_id;
  ds.dim = static_cast<int>(csv.header.size()) - 1;

  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    const auto& row = csv.rows[i];
    const int line = csv.line_numbers[i];
    ++ds.stats.rows_seen;
    if (row.size() != csv.header.size()) {
      throw ParseError("'" + path.string() + "' line " + std::to_string(line) +
                       ": expected " + std::to_string(csv.header.size()) + " fields, got " +
                       std::to_string(row.size()));
    }
    Sample s;
    s.sample_id = trim(row[0]);
    s.features.resize(ds.dim);
    for (int j = 0; j < ds.dim; ++j) {
      const double v = parse_double(row[static_cast<std::size_t>(j + 1)], path, line);
      if (!std::isfinite(v)) {
        throw ParseError("'" + path.string() + "' line " + std::to_string(line) +
                         ": non-finite feature value");
      }
      s.features[j] = v;
    }
    try {
      const auto resolved = labels.resolve(s.sample_id);
      s.class_id = resolved.class_id;
      s.subject_id = resolved.subject_id;
    } catch (const RowLabelError& e) {
      throw RowLabelError("'" + path.string() + "' line " + std::to_string(line) + ": " +
                          e.what());
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

namespace {

// Classes present in `all` but absent from `part`.
void warn_starved_classes(const Dataset& all, Dataset& part, const char* side) {
  const auto full = all.class_histogram();
  const auto have = part.class_histogram();
  std::vector<int> starved;
  for (const auto& [class_id, count] : full) {
    (void)count;
    if (have.find(class_id) == have.end()) starved.push_back(class_id);
  }
  if (starved.empty()) return;
  std::ostringstream w;
  w << side << " side has no samples for class id(s):";
  for (int id : starved) w << ' ' << id;
  part.stats.warnings.push_back(w.str());
}

}  // namespace

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction,
                                          std::uint64_t seed, bool subject_disjoint) {
  detail::require(train_fraction > 0.0 && train_fraction < 1.0,
                  "train_fraction must lie in (0, 1)");

  Dataset train;
  Dataset test;
  train.feature_space_id = test.feature_space_id = ds.feature_space_id;
  train.dim = test.dim = ds.dim;

  std::mt19937_64 rng(seed);
  if (subject_disjoint) {
    std::vector<std::string> subjects(ds.subjects().begin(), ds.subjects().end());
    if (subjects.size() < 2) {
      throw SplitError("subject-disjoint split needs at least two subjects, got " +
                       std::to_string(subjects.size()));
    }
    std::shuffle(subjects.begin(), subjects.end(), rng);
    auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(subjects.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, subjects.size() - 1);
    const std::set<std::string> train_subjects(subjects.begin(),
                                               subjects.begin() + static_cast<long>(n_train));
    for (const auto& s : ds.samples) {
      (train_subjects.count(s.subject_id) ? train : test).samples.push_back(s);
    }
  } else {
    std::vector<std::size_t> order(ds.samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(order.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, order.size() > 1 ? order.size() - 1 : 1);
    std::vector<bool> is_train(ds.samples.size(), false);
    for (std::size_t i = 0; i < n_train; ++i) is_train[order[i]] = true;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
      (is_train[i] ? train : test).samples.push_back(ds.samples[i]);
    }
  }

  warn_starved_classes(ds, train, "train");
  warn_starved_classes(ds, test, "test");
  return {std::move(train), std::move(test)};
}

void write_feature_csv(const Dataset& ds, const std::filesystem::path& features_csv,
                       const std::filesystem::path& manifest_csv,
                       const TaskSchedule& schedule) {
  std::ofstream feat(features_csv, std::ios::binary);
  if (!feat) throw IoError("cannot write '" + features_csv.string() + "'");
  feat << "sample_id";
  for (int j = 0; j < ds.dim; ++j) feat << ",f" << j;
  feat << '\n';
  char buf[32];
  for (const auto& s : ds.samples) {
    feat << s.sample_id;
    for (int j = 0; j < ds.dim; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", s.features[j]);
      feat << ',' << buf;
    }
    feat << '\n';
  }

  std::ofstream man(manifest_csv, std::ios::binary);
  if (!man) throw IoError("cannot write '" + manifest_csv.string() + "'");
  man << "sample_id,class_label,subject_id\n";
  for (const auto& s : ds.samples) {
    man << s.sample_id << ',' << schedule.class_info(s.class_id).label << ','
        << s.subject_id << '\n';
  }
}

}  // namespace aucil
