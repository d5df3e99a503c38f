#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aucil/dataset.hpp"
#include "aucil/gaussian.hpp"
#include "aucil/schedule.hpp"

namespace aucil {

// Ground-truth mixture of one synthetic class.
struct ClassTruth {
  std::vector<double> weights;
  std::vector<Vector> means;
  std::vector<Matrix> covariances;
};

// Full recipe for a synthetic benchmark dataset. `classes` is indexed by
// position in schedule order; separation is the inter-class mean distance
// in pooled standard deviations.
struct SynthSpec {
  int dim = 0;
  int samples_per_class = 0;
  int n_subjects = 0;
  double separation = 0.0;
  std::uint64_t seed = 0;
  TaskSchedule schedule;
  std::vector<ClassTruth> classes;
  std::string feature_space_id = "synthetic";

  // Unit-covariance clusters: class centers `separation` apart; with more
  // than one component per class, component centers sit 6 sigma from their
  // class center. Single-task schedule with classes labeled c00, c01, ...
  static SynthSpec clustered(int n_classes, int components_per_class, int dim,
                             int samples_per_class, int n_subjects, double separation,
                             std::uint64_t seed);

  // 22 classes over the built-in 6-task schedule, 17 dimensions.
  static SynthSpec cfee6(std::uint64_t seed, int samples_per_class = 400,
                         int components_per_class = 1, int n_subjects = 20,
                         double separation = 6.0);
};

struct SynthData {
  SynthSpec spec;
  Dataset dataset;
  std::vector<Vector> subject_offsets;  // per subject index
};

// Deterministic sampling from the spec. Subjects are assigned round-robin;
// each subject carries a fixed mean offset of magnitude 0.1 * separation.
SynthData gen_synthetic(const SynthSpec& spec);

// Writes features.csv + manifest.csv (the formats the parsers read), the
// schedule, and ground_truth.json into `dir`.
void write_synthetic(const SynthData& data, const std::filesystem::path& dir);

// Reference log-density via explicit Gauss-Jordan inverse and pivot-product
// determinant. Deliberately shares no factorization code with the
// evaluation path it cross-checks.
double naive_mvn_log_density(const Vector& x, const Vector& mean, const Matrix& cov);

// argmax over classes of the true class-conditional mixture log-density
// (uniform class priors), scored with the naive oracle. Ties break toward
// the lower class position.
int bayes_optimal_predict(const Vector& x, const SynthSpec& spec);

}  // namespace aucil
