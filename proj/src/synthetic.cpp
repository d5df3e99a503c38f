#include "aucil/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "aucil/seeding.hpp"
#include "json.hpp"

namespace aucil {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kComponentOffset = 14.0;  // within-class component radius, in sigma

Vector random_unit_vector(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(dim);
  double norm = 0.0;
  while (norm == 0.0) {
    for (int d = 0; d < dim; ++d) v[d] = gauss(rng);
    norm = v.norm();
  }
  return v / norm;
}

std::string two_digit(int n) {
  std::ostringstream s;
  s << (n < 10 ? "0" : "") << n;
  return s.str();
}

}  // namespace

double naive_mvn_log_density(const Vector& x, const Vector& mean, const Matrix& cov) {
  const auto s = x.size();
  detail::require(mean.size() == s && cov.rows() == s && cov.cols() == s,
                  "naive_mvn_log_density dimension mismatch");

  // Gauss-Jordan inverse with partial pivoting; determinant from the pivots.
  Matrix a = cov;
  Matrix inv = Matrix::Identity(s, s);
  double det = 1.0;
  for (Eigen::Index col = 0; col < s; ++col) {
    Eigen::Index pivot = col;
    for (Eigen::Index r = col + 1; r < s; ++r) {
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    }
    if (std::abs(a(pivot, col)) < 1e-300) {
      throw SingularCovarianceError("naive oracle: covariance is singular");
    }
    if (pivot != col) {
      a.row(pivot).swap(a.row(col));
      inv.row(pivot).swap(inv.row(col));
      det = -det;
    }
    det *= a(col, col);
    const double scale = 1.0 / a(col, col);
    a.row(col) *= scale;
    inv.row(col) *= scale;
    for (Eigen::Index r = 0; r < s; ++r) {
      if (r == col) continue;
      const double factor = a(r, col);
      if (factor != 0.0) {
        a.row(r) -= factor * a.row(col);
        inv.row(r) -= factor * inv.row(col);
      }
    }
  }
  if (!(det > 0.0)) {
    throw SingularCovarianceError("naive oracle: covariance is not positive-definite");
  }

  const Vector d = x - mean;
  const double mahal = d.dot(inv * d);
  return -0.5 * (static_cast<double>(s) * kLog2Pi + std::log(det) + mahal);
}

int bayes_optimal_predict(const Vector& x, const SynthSpec& spec) {
  detail::require(!spec.classes.empty(), "spec has no classes");
  const std::vector<int> order = spec.schedule.classes_in_order();
  detail::require(order.size() == spec.classes.size(),
                  "spec classes do not match the schedule");

  int best_id = order.front();
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < spec.classes.size(); ++k) {
    const auto& truth = spec.classes[k];
    std::vector<double> terms(truth.weights.size());
    for (std::size_t j = 0; j < truth.weights.size(); ++j) {
      terms[j] = std::log(truth.weights[j]) +
                 naive_mvn_log_density(x, truth.means[j], truth.covariances[j]);
    }
    const double score = log_sum_exp(terms);
    if (score > best_score) {
      best_score = score;
      best_id = order[k];
    }
  }
  return best_id;
}

SynthSpec SynthSpec::clustered(int n_classes, int components_per_class, int dim,
                               int samples_per_class, int n_subjects, double separation,
                               std::uint64_t seed) {
  detail::require(n_classes >= 1 && components_per_class >= 1 && dim >= 1,
                  "spec counts must be positive");
  detail::require(samples_per_class >= 1 && n_subjects >= 1, "spec counts must be positive");
  detail::require(separation >= 0.0, "separation must be >= 0");

  std::vector<TaskInfo> tasks(1);
  tasks[0].task_id = 1;
  for (int k = 0; k < n_classes; ++k) {
    tasks[0].classes.push_back({k, "c" + two_digit(k)});
  }

  SynthSpec spec;
  spec.dim = dim;
  spec.samples_per_class = samples_per_class;
  spec.n_subjects = n_subjects;
  spec.separation = separation;
  spec.seed = seed;
  spec.schedule = TaskSchedule(std::move(tasks));

  std::mt19937_64 rng(derive_seed(seed, 0xC11A55));
  for (int k = 0; k < n_classes; ++k) {
    const Vector center = separation * random_unit_vector(rng, dim);
    ClassTruth truth;
    // Orthogonalized component directions give a deterministic pairwise
    // component distance of sqrt(2) * kComponentOffset, chosen so within-class
    // structure stays recoverable at moderate sample sizes.
    std::vector<Vector> directions;
    for (int j = 0; j < components_per_class; ++j) {
      Vector dir = random_unit_vector(rng, dim);
      for (const Vector& prev : directions) dir -= dir.dot(prev) * prev;
      if (dir.norm() > 1e-6) {
        dir.normalize();
      } else {
        dir = random_unit_vector(rng, dim);
      }
      directions.push_back(dir);
    }
    for (int j = 0; j < components_per_class; ++j) {
      Vector mean = center;
      if (components_per_class > 1) mean += kComponentOffset * directions[static_cast<std::size_t>(j)];
      truth.weights.push_back(1.0 / components_per_class);
      truth.means.push_back(std::move(mean));
      truth.covariances.push_back(Matrix::Identity(dim, dim));
    }
    spec.classes.push_back(std::move(truth));
  }
  return spec;
}

SynthSpec SynthSpec::cfee6(std::uint64_t seed, int samples_per_class,
                           int components_per_class, int n_subjects, double separation) {
  SynthSpec spec = clustered(22, components_per_class, 17, samples_per_class, n_subjects,
                             separation, seed);
  spec.schedule = builtin_cfee6_schedule();
  return spec;
}

SynthData gen_synthetic(const SynthSpec& spec) {
  detail::require(spec.dim >= 1 && !spec.classes.empty(), "spec is incomplete");
  const std::vector<int> order = spec.schedule.classes_in_order();
  detail::require(order.size() == spec.classes.size(),
                  "spec classes do not match the schedule");

  SynthData out;
  out.spec = spec;
  out.dataset.feature_space_id = spec.feature_space_id;
  out.dataset.dim = spec.dim;

  std::mt19937_64 subject_rng(derive_seed(spec.seed, 0x5b));
  for (int s = 0; s < spec.n_subjects; ++s) {
    out.subject_offsets.push_back(0.1 * spec.separation *
                                  random_unit_vector(subject_rng, spec.dim));
  }

  for (std::size_t k = 0; k < spec.classes.size(); ++k) {
    const auto& truth = spec.classes[k];
    const int class_id = order[k];
    const std::string label = spec.schedule.class_info(class_id).label;

    // Pre-factor component covariances for sampling.
    std::vector<Matrix> chol;
    for (const auto& cov : truth.covariances) {
      Eigen::LLT<Matrix> llt(cov);
      detail::require(llt.info() == Eigen::Success, "spec covariance not positive-definite");
      chol.push_back(llt.matrixL());
    }

    std::mt19937_64 rng(derive_seed(spec.seed, 0x100 + k));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < spec.samples_per_class; ++i) {
      std::size_t comp = 0;
      double u = u01(rng);
      double acc = 0.0;
      for (std::size_t j = 0; j < truth.weights.size(); ++j) {
        acc += truth.weights[j];
        if (u <= acc) {
          comp = j;
          break;
        }
      }
      Vector z(spec.dim);
      for (int d = 0; d < spec.dim; ++d) z[d] = gauss(rng);
      const int subject = i % spec.n_subjects;

      Sample sample;
      sample.features = truth.means[comp] + chol[comp] * z + out.subject_offsets[subject];
      sample.class_id = class_id;
      sample.subject_id = "s" + two_digit(subject);
      sample.sample_id = label + "_" + std::to_string(i);
      out.dataset.samples.push_back(std::move(sample));
    }
  }
  return out;
}

void write_synthetic(const SynthData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_feature_csv(data.dataset, dir / "features.csv", dir / "manifest.csv",
                    data.spec.schedule);
  save_task_schedule(data.spec.schedule, dir / "schedule.json");

  nlohmann::json truth;
  truth["format_version"] = 1;
  truth["dim"] = data.spec.dim;
  truth["samples_per_class"] = data.spec.samples_per_class;
  truth["n_subjects"] = data.spec.n_subjects;
  truth["separation"] = data.spec.separation;
  truth["seed"] = data.spec.seed;
  truth["feature_space_id"] = data.spec.feature_space_id;

  nlohmann::json classes = nlohmann::json::array();
  const std::vector<int> order = data.spec.schedule.classes_in_order();
  for (std::size_t k = 0; k < data.spec.classes.size(); ++k) {
    const auto& c = data.spec.classes[k];
    nlohmann::json jc;
    jc["class_id"] = order[k];
    jc["weights"] = c.weights;
    nlohmann::json means = nlohmann::json::array();
    for (const auto& m : c.means) {
      means.push_back(std::vector<double>(m.data(), m.data() + m.size()));
    }
    jc["means"] = std::move(means);
    nlohmann::json covs = nlohmann::json::array();
    for (const auto& cov : c.covariances) {
      std::vector<double> flat;
      for (Eigen::Index r = 0; r < cov.rows(); ++r) {
        for (Eigen::Index cc = 0; cc < cov.cols(); ++cc) flat.push_back(cov(r, cc));
      }
      covs.push_back(std::move(flat));
    }
    jc["covariances_rowmajor"] = std::move(covs);
    classes.push_back(std::move(jc));
  }
  truth["classes"] = std::move(classes);

  nlohmann::json offsets = nlohmann::json::array();
  for (const auto& o : data.subject_offsets) {
    offsets.push_back(std::vector<double>(o.data(), o.data() + o.size()));
  }
  truth["subject_offsets"] = std::move(offsets);

  std::ofstream out(dir / "ground_truth.json", std::ios::binary);
  if (!out) throw IoError("cannot write ground_truth.json");
  out << truth.dump(2) << '\n';
}

}  // namespace aucil
