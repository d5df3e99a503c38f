#include "aucil/gaussian.hpp"

#include <cmath>
#include <limits>

namespace aucil {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void check_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw ContractViolation(std::string(what) + " has non-finite entries");
}

}  // namespace

std::string to_string(CovarianceKind kind) {
  return kind == CovarianceKind::Diagonal ? "diagonal" : "full";
}

CovarianceKind covariance_kind_from_string(const std::string& s) {
  if (s == "diagonal") return CovarianceKind::Diagonal;
  if (s == "full") return CovarianceKind::Full;
  throw ContractViolation("unknown covariance kind '" + s + "'");
}

Covariance Covariance::diagonal(Vector variances, double recorded_reg) {
  detail::require(variances.size() >= 1, "covariance dimension must be >= 1");
  detail::require(recorded_reg >= 0.0, "regularization record must be >= 0");
  check_finite(variances, "diagonal covariance");
  Covariance c;
  c.kind_ = CovarianceKind::Diagonal;
  c.diag_ = std::move(variances);
  c.reg_eps_ = recorded_reg;
  return c;
}

Covariance Covariance::full(Matrix matrix, double recorded_reg) {
  detail::require(matrix.rows() >= 1 && matrix.rows() == matrix.cols(),
                  "full covariance must be square with dimension >= 1");
  if (!matrix.allFinite()) throw ContractViolation("full covariance has non-finite entries");
  const double scale = matrix.cwiseAbs().maxCoeff();
  const double asym = (matrix - matrix.transpose()).cwiseAbs().maxCoeff();
  detail::require(asym <= 1e-9 * std::max(1.0, scale), "full covariance must be symmetric");
  detail::require(recorded_reg >= 0.0, "regularization record must be >= 0");
  Covariance c;
  c.kind_ = CovarianceKind::Full;
  c.full_ = std::move(matrix);
  c.reg_eps_ = recorded_reg;
  return c;
}

Eigen::Index Covariance::dim() const {
  return kind_ == CovarianceKind::Diagonal ? diag_.size() : full_.rows();
}

const Vector& Covariance::diag() const {
  detail::require(kind_ == CovarianceKind::Diagonal, "not a diagonal covariance");
  return diag_;
}

const Matrix& Covariance::matrix() const {
  detail::require(kind_ == CovarianceKind::Full, "not a full covariance");
  return full_;
}

Covariance Covariance::regularized(double eps) const {
  detail::require(eps >= 0.0, "regularization eps must be >= 0");
  Covariance c(*this);
  if (eps == 0.0) return c;
  if (kind_ == CovarianceKind::Diagonal) {
    c.diag_.array() += eps;
  } else {
    c.full_.diagonal().array() += eps;
  }
  c.reg_eps_ = reg_eps_ + eps;
  return c;
}

Matrix Covariance::dense() const {
  if (kind_ == CovarianceKind::Full) return full_;
  return diag_.asDiagonal();
}

namespace {

// Attempts the factorization; fills the evaluator fields on success.
bool try_factorize(const Covariance& cov, Vector& inv_scale, Matrix& chol, double& log_det) {
  if (cov.kind() == CovarianceKind::Diagonal) {
    const Vector& v = cov.diag();
    if ((v.array() <= 0.0).any()) return false;
    inv_scale = v.array().rsqrt();
    log_det = v.array().log().sum();
    return true;
  }
  Eigen::LLT<Matrix> llt(cov.matrix());
  if (llt.info() != Eigen::Success) return false;
  chol = llt.matrixL();
  log_det = 2.0 * chol.diagonal().array().log().sum();
  return std::isfinite(log_det);
}

}  // namespace

Covariance ensure_factorizable(const Covariance& cov, double eps, const std::string& label) {
  Vector inv_scale;
  Matrix chol;
  double log_det = 0.0;
  if (try_factorize(cov, inv_scale, chol, log_det)) return cov;
  Covariance reg = cov.regularized(eps);
  if (try_factorize(reg, inv_scale, chol, log_det)) return reg;
  throw SingularCovarianceError("covariance" + (label.empty() ? "" : " of " + label) +
                                " is singular even after regularization eps=" +
                                std::to_string(eps));
}

GaussianEvaluator::GaussianEvaluator(Vector mean, const Covariance& cov, std::string label)
    : mean_(std::move(mean)), kind_(cov.kind()) {
  check_finite(mean_, "mean");
  detail::require(mean_.size() == cov.dim(), "mean and covariance dimensions disagree");
  if (!try_factorize(cov, inv_scale_, chol_, log_det_)) {
    throw SingularCovarianceError("covariance" + (label.empty() ? "" : " of " + label) +
                                  " is not positive-definite");
  }
}

double GaussianEvaluator::log_density(const Vector& x) const {
  detail::require(x.size() == mean_.size(), "input dimension does not match the Gaussian");
  const auto s = static_cast<double>(mean_.size());
  double mahal;
  if (kind_ == CovarianceKind::Diagonal) {
    mahal = ((x - mean_).array() * inv_scale_.array()).matrix().squaredNorm();
  } else {
    mahal = chol_.triangularView<Eigen::Lower>().solve(x - mean_).squaredNorm();
  }
  return -0.5 * (s * kLog2Pi + log_det_ + mahal);
}

Vector GaussianEvaluator::log_density_batch(const Eigen::Ref<const Matrix>& rows) const {
  detail::require(rows.cols() == mean_.size(), "input dimension does not match the Gaussian");
  const auto s = static_cast<double>(mean_.size());
  Matrix centered = rows.rowwise() - mean_.transpose();
  Vector mahal(rows.rows());
  if (kind_ == CovarianceKind::Diagonal) {
    mahal = (centered.array().rowwise() * inv_scale_.transpose().array())
                .square()
                .rowwise()
                .sum();
  } else {
    Matrix z = chol_.triangularView<Eigen::Lower>().solve(centered.transpose());
    mahal = z.colwise().squaredNorm();
  }
  return (-0.5 * (s * kLog2Pi + log_det_)) - 0.5 * mahal.array();
}

double log_density(const Vector& x, const Vector& mean, const Covariance& cov) {
  detail::require(x.size() == mean.size() && x.size() == cov.dim(),
                  "log_density dimension mismatch");
  check_finite(x, "x");
  Covariance usable = ensure_factorizable(cov, kDefaultRegEps);
  return GaussianEvaluator(mean, usable).log_density(x);
}

double log_sum_exp(std::span<const double> terms) {
  detail::require(!terms.empty(), "log_sum_exp of an empty sequence");
  double m = -std::numeric_limits<double>::infinity();
  for (double t : terms) {
    detail::require(!std::isnan(t), "log_sum_exp input contains NaN");
    if (t > m) m = t;
  }
  if (!std::isfinite(m)) return m;  // all terms -inf (or +inf dominates)
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - m);
  return m + std::log(sum);
}

}  // namespace aucil
