#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "aucil/gaussian.hpp"
#include "aucil/gmm.hpp"

namespace aucil {

// Conjugate priors for the variational mixture: symmetric Dirichlet on the
// weights, Normal-Wishart (full kind) or per-dimension Normal-Gamma
// (diagonal kind) on the component parameters. Unset optional fields are
// resolved from the data at fit time:
//   weight_concentration <= 0  ->  1 / C_max
//   mean_prior unset           ->  data mean
//   dof <= 0                   ->  S
//   scale unset                ->  identity / mean per-dimension variance
struct BgmmPriors {
  double weight_concentration = 0.0;
  std::optional<Vector> mean_prior;
  double mean_precision = 1.0;
  double dof = 0.0;
  std::optional<Covariance> scale;
};

// Resolved prior values actually used by a fit (all fields concrete).
struct BgmmResolvedPriors {
  double weight_concentration = 0.0;
  Vector mean_prior;
  double mean_precision = 1.0;
  double dof = 0.0;
  Vector scale_diag;   // diagonal kind: prior scale entries w0_d
  Matrix scale_full;   // full kind: prior scale matrix W0
};

// Posterior of one mixture component.
struct BgmmComponent {
  double alpha = 0.0;   // Dirichlet pseudo-count
  double beta = 0.0;    // mean precision multiplier
  double dof = 0.0;     // Wishart/Gamma degrees of freedom
  Vector mean;          // posterior mean location m_k
  Matrix scale_inv;     // full kind: W_k^-1 (positive-definite)
  Vector scale_inv_diag;  // diagonal kind: 1/w_kd per dimension
  double support = 0.0;   // soft sample count N_k at convergence
};

// Variational Bayesian Gaussian mixture. Immutable once constructed; the
// constructor derives expected weights, active flags, and a plug-in
// Gaussian mixture over the active components for likelihood evaluation.
class BgmmModel {
 public:
  BgmmModel(std::vector<BgmmComponent> components, CovarianceKind kind,
            BgmmResolvedPriors priors, int max_components,
            std::vector<double> elbo_log, std::uint64_t seed, bool converged);

  const std::vector<BgmmComponent>& components() const { return components_; }
  CovarianceKind covariance_kind() const { return kind_; }
  const BgmmResolvedPriors& priors() const { return priors_; }
  int max_components() const { return max_components_; }
  const std::vector<double>& elbo_log() const { return elbo_log_; }
  std::uint64_t seed() const { return seed_; }
  bool converged() const { return converged_; }
  Eigen::Index dim() const { return components_.front().mean.size(); }

  // alpha_k / sum(alpha), over all components.
  const std::vector<double>& expected_weights() const { return expected_weights_; }
  const std::vector<bool>& active() const { return active_; }
  int effective_components() const { return effective_components_; }

  // Plug-in mixture over active components: weight E[w_k], mean m_k,
  // covariance from the posterior-expected covariance.
  const std::vector<GaussianComponent>& plugin_components() const { return plugin_; }

  double log_likelihood(const Vector& x) const;
  Vector log_likelihood_batch(const Eigen::Ref<const Matrix>& rows) const;

 private:
  std::vector<BgmmComponent> components_;
  CovarianceKind kind_;
  BgmmResolvedPriors priors_;
  int max_components_;
  std::vector<double> elbo_log_;
  std::uint64_t seed_;
  bool converged_;

  std::vector<double> expected_weights_;
  std::vector<bool> active_;
  int effective_components_ = 0;
  std::vector<GaussianComponent> plugin_;
  std::vector<GaussianEvaluator> plugin_evals_;
  std::vector<double> plugin_log_weights_;
};

// Coordinate-ascent variational inference with C_max components; rows of
// `data` are samples. Best of cfg.n_restarts runs by final ELBO.
BgmmModel fit_vb(const Eigen::Ref<const Matrix>& data, int max_components,
                 const BgmmPriors& priors, const FitConfig& cfg);

double bgmm_log_likelihood(const Vector& x, const BgmmModel& model);

}  // namespace aucil
