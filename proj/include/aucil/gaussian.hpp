#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>

#include "aucil/errors.hpp"

namespace aucil {

// Feature vectors are plain dense vectors; S is implicit in the size.
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Regularization added to a covariance diagonal when factorization fails.
constexpr double kDefaultRegEps = 1e-6;

enum class CovarianceKind { Diagonal, Full };

std::string to_string(CovarianceKind kind);
CovarianceKind covariance_kind_from_string(const std::string& s);

// Diagonal or full symmetric covariance with a record of how much diagonal
// regularization has been applied to it.
class Covariance {
 public:
  // recorded_reg is the regularization already baked into the entries
  // (used when rebuilding a covariance from serialized form).
  static Covariance diagonal(Vector variances, double recorded_reg = 0.0);
  static Covariance full(Matrix matrix, double recorded_reg = 0.0);

  CovarianceKind kind() const { return kind_; }
  Eigen::Index dim() const;
  double regularization() const { return reg_eps_; }

  const Vector& diag() const;    // Diagonal kind only
  const Matrix& matrix() const;  // Full kind only

  // Copy with eps added to every diagonal entry. No-op for eps = 0.
  Covariance regularized(double eps) const;

  // Dense S x S view of either kind.
  Matrix dense() const;

 private:
  Covariance() = default;

  CovarianceKind kind_ = CovarianceKind::Diagonal;
  Vector diag_;
  Matrix full_;
  double reg_eps_ = 0.0;
};

struct GaussianComponent {
  double weight = 1.0;
  Vector mean;
  Covariance covariance;
};

// Returns `cov` unchanged if its triangular factorization succeeds, else a
// copy regularized by `eps` (one retry). Throws SingularCovarianceError
// naming `label` if the retry also fails.
Covariance ensure_factorizable(const Covariance& cov, double eps,
                               const std::string& label = {});

// Triangular factorization of one Gaussian, built once and reused across
// density evaluations. Construction throws SingularCovarianceError (naming
// `label`) when the covariance cannot be factorized; callers that want the
// automatic regularization retry go through ensure_factorizable first.
class GaussianEvaluator {
 public:
  GaussianEvaluator(Vector mean, const Covariance& cov, std::string label = {});

  double log_density(const Vector& x) const;
  // One value per row of `rows`.
  Vector log_density_batch(const Eigen::Ref<const Matrix>& rows) const;

  double log_det() const { return log_det_; }
  Eigen::Index dim() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }

 private:
  Vector mean_;
  CovarianceKind kind_;
  Vector inv_scale_;  // Diagonal: 1/sqrt(var_d)
  Matrix chol_;       // Full: lower-triangular L with Sigma = L L^T
  double log_det_ = 0.0;
};

// log N(x | mean, cov) = -1/2 [S log(2pi) + log|cov| + (x-mean)^T cov^-1 (x-mean)],
// computed through the triangular factorization. Retries once with
// kDefaultRegEps when the covariance does not factorize.
double log_density(const Vector& x, const Vector& mean, const Covariance& cov);

// log sum_i exp(t_i) with max-shift; exact for a single term.
double log_sum_exp(std::span<const double> terms);

}  // namespace aucil
