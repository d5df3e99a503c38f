#pragma once

#include <cstdint>
#include <vector>

#include "aucil/gaussian.hpp"

namespace aucil {

struct FitConfig {
  int max_components = 10;
  int max_iters = 200;
  double rel_tol = 1e-6;
  int n_restarts = 5;
  double reg_eps = kDefaultRegEps;
  CovarianceKind covariance_kind = CovarianceKind::Full;
  std::uint64_t seed = 0;

  void validate() const;
};

// Maximum-likelihood Gaussian mixture. Immutable once constructed: the
// constructor prepares per-component factorizations, so likelihood
// evaluation is const and safe from any number of threads.
class GmmModel {
 public:
  GmmModel(std::vector<GaussianComponent> components, CovarianceKind kind,
           std::vector<double> fit_log, std::uint64_t seed, bool converged);

  const std::vector<GaussianComponent>& components() const { return components_; }
  int component_count() const { return static_cast<int>(components_.size()); }
  CovarianceKind covariance_kind() const { return kind_; }
  // Mean log-likelihood after each EM iteration (non-decreasing).
  const std::vector<double>& fit_log() const { return fit_log_; }
  std::uint64_t seed() const { return seed_; }
  bool converged() const { return converged_; }
  Eigen::Index dim() const { return components_.front().mean.size(); }

  double log_likelihood(const Vector& x) const;
  Vector log_likelihood_batch(const Eigen::Ref<const Matrix>& rows) const;

 private:
  std::vector<GaussianComponent> components_;
  CovarianceKind kind_;
  std::vector<double> fit_log_;
  std::uint64_t seed_;
  bool converged_;

  std::vector<GaussianEvaluator> evaluators_;
  std::vector<double> log_weights_;
};

// EM fit with n_components mixture components; data rows are samples.
// Best of cfg.n_restarts runs (highest final mean log-likelihood) wins.
GmmModel fit_em(const Eigen::Ref<const Matrix>& data, int n_components, const FitConfig& cfg);

double gmm_log_likelihood(const Vector& x, const GmmModel& model);

// Free parameters of a C-component mixture in S dimensions:
// (C-1) weights + C*S means + covariance entries (C*S diagonal,
// C*S(S+1)/2 full).
long long gmm_free_parameters(int n_components, int dim, CovarianceKind kind);

// 2k - 2 * total log-likelihood over `data`.
double aic_score(const GmmModel& model, const Eigen::Ref<const Matrix>& data);

// Fits C = 1..min(cfg.max_components, |data|) and returns the AIC minimizer;
// ties break toward fewer components.
GmmModel select_by_aic(const Eigen::Ref<const Matrix>& data, const FitConfig& cfg);

namespace detail {

// k-means++ style seeding: returns n_seeds row indices into `data`.
std::vector<int> kmeanspp_seeds(const Eigen::Ref<const Matrix>& data, int n_seeds,
                                std::uint64_t seed);

struct EStep {
  Matrix responsibilities;     // n x C, rows sum to 1
  Vector per_sample_ll;        // n
  double mean_log_likelihood;  // average of per_sample_ll
};

EStep em_estep(const Eigen::Ref<const Matrix>& data,
               const std::vector<GaussianEvaluator>& comps,
               const std::vector<double>& log_weights);

}  // namespace detail

}  // namespace aucil
