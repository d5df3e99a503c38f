#include "aucil/bgmm.hpp"

#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <limits>

#include "aucil/seeding.hpp"

namespace aucil {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kLog2 = 0.6931471805599453094;
constexpr double kLogPi = 1.1447298858494001741;

double digamma(double x) { return boost::math::digamma(x); }

// log of the Wishart normalization constant B(W, nu), given log|W|.
double log_wishart_b(double log_det_w, double nu, int s) {
  double lg = 0.0;
  for (int d = 1; d <= s; ++d) lg += std::lgamma(0.5 * (nu + 1.0 - d));
  return -0.5 * nu * log_det_w - 0.5 * nu * s * kLog2 -
         0.25 * s * (s - 1) * kLogPi - lg;
}

// Product of per-dimension univariate Wishart normalizers sharing nu.
double log_wishart_b_diag(double sum_log_w, double nu, int s) {
  return -0.5 * nu * sum_log_w - 0.5 * nu * s * kLog2 - s * std::lgamma(0.5 * nu);
}

struct ComponentWork {
  BgmmComponent post;
  // Derived per iteration.
  double e_log_det_lambda = 0.0;
  Eigen::LLT<Matrix> scale_inv_llt;  // full kind
  Matrix scale;                      // full kind: W_k = scale_inv^-1
  double log_det_scale = 0.0;        // log|W_k| (full) or sum_d log w_kd (diag)
};

struct VbProblem {
  const Eigen::Ref<const Matrix>& data;
  CovarianceKind kind;
  BgmmResolvedPriors priors;
  int c_max;
  // Cached prior quantities.
  Matrix prior_scale_inv;       // full: W0^-1
  double prior_log_det_w0 = 0;  // log|W0| (full) or sum_d log w0_d (diag)
  double prior_log_b = 0;       // log B(W0, nu0)
};

void refresh_derived(ComponentWork& w, const VbProblem& p) {
  const int s = static_cast<int>(p.priors.mean_prior.size());
  if (p.kind == CovarianceKind::Full) {
    w.scale_inv_llt.compute(w.post.scale_inv);
    if (w.scale_inv_llt.info() != Eigen::Success) {
      throw SingularCovarianceError("variational scale matrix lost positive-definiteness");
    }
    const double log_det_winv =
        2.0 * Matrix(w.scale_inv_llt.matrixL()).diagonal().array().log().sum();
    w.log_det_scale = -log_det_winv;
    w.scale = w.scale_inv_llt.solve(Matrix::Identity(s, s));
    double dig = 0.0;
    for (int d = 1; d <= s; ++d) dig += digamma(0.5 * (w.post.dof + 1.0 - d));
    w.e_log_det_lambda = dig + s * kLog2 + w.log_det_scale;
  } else {
    if ((w.post.scale_inv_diag.array() <= 0.0).any()) {
      throw SingularCovarianceError("variational scale lost positivity");
    }
    w.log_det_scale = -w.post.scale_inv_diag.array().log().sum();
    w.e_log_det_lambda =
        s * digamma(0.5 * w.post.dof) + s * kLog2 + w.log_det_scale;
  }
}

// nu_k * (x - m_k)^T W_k (x - m_k) for every row, plus S/beta_k.
Vector expected_mahalanobis(const ComponentWork& w, const VbProblem& p,
                            const Eigen::Ref<const Matrix>& rows) {
  const auto s = static_cast<double>(p.priors.mean_prior.size());
  Matrix centered = rows.rowwise() - w.post.mean.transpose();
  Vector quad(rows.rows());
  if (p.kind == CovarianceKind::Full) {
    Matrix l = w.scale_inv_llt.matrixL();
    Matrix z = l.triangularView<Eigen::Lower>().solve(centered.transpose());
    quad = z.colwise().squaredNorm();
  } else {
    quad = (centered.array().square().rowwise() /
            w.post.scale_inv_diag.transpose().array())
               .rowwise()
               .sum();
  }
  return (s / w.post.beta) + w.post.dof * quad.array();
}

double quad_form(const ComponentWork& w, const VbProblem& p, const Vector& v) {
  if (p.kind == CovarianceKind::Full) {
    Matrix l = w.scale_inv_llt.matrixL();
    return l.triangularView<Eigen::Lower>().solve(v).squaredNorm();
  }
  return (v.array().square() / w.post.scale_inv_diag.array()).sum();
}

void posterior_update(ComponentWork& w, const VbProblem& p, double nk, const Vector& xbar,
                      const Matrix& data_cov_full, const Vector& data_cov_diag) {
  const auto& pr = p.priors;
  w.post.alpha = pr.weight_concentration + nk;
  w.post.beta = pr.mean_precision + nk;
  w.post.dof = pr.dof + nk;
  if (nk <= 0.0) {
    w.post.mean = pr.mean_prior;
    if (p.kind == CovarianceKind::Full) {
      w.post.scale_inv = p.prior_scale_inv;
    } else {
      w.post.scale_inv_diag = pr.scale_diag.cwiseInverse();
    }
    return;
  }
  w.post.mean = (pr.mean_precision * pr.mean_prior + nk * xbar) / w.post.beta;
  const double shrink = pr.mean_precision * nk / w.post.beta;
  Vector dm = xbar - pr.mean_prior;
  if (p.kind == CovarianceKind::Full) {
    Matrix winv = p.prior_scale_inv + nk * data_cov_full + shrink * (dm * dm.transpose());
    w.post.scale_inv = 0.5 * (winv + winv.transpose());
  } else {
    w.post.scale_inv_diag =
        pr.scale_diag.cwiseInverse() + nk * data_cov_diag + shrink * dm.array().square().matrix();
  }
}

double neg_kl_weights(const std::vector<ComponentWork>& comps, const VbProblem& p,
                      double alpha_sum) {
  const double alpha0 = p.priors.weight_concentration;
  const auto k = static_cast<double>(comps.size());
  double out = std::lgamma(k * alpha0) - k * std::lgamma(alpha0);
  out -= std::lgamma(alpha_sum);
  const double psi_sum = digamma(alpha_sum);
  for (const auto& c : comps) {
    out += std::lgamma(c.post.alpha);
    out += (alpha0 - c.post.alpha) * (digamma(c.post.alpha) - psi_sum);
  }
  return out;
}

double neg_kl_component(const ComponentWork& w, const VbProblem& p) {
  const auto& pr = p.priors;
  const int s = static_cast<int>(pr.mean_prior.size());
  const double sd = s;
  const double nu = w.post.dof;
  const double beta = w.post.beta;

  double trace_w0inv_wk;
  double log_b_post;
  if (p.kind == CovarianceKind::Full) {
    trace_w0inv_wk = (p.prior_scale_inv.array() * w.scale.array()).sum();
    log_b_post = log_wishart_b(w.log_det_scale, nu, s);
  } else {
    trace_w0inv_wk =
        (w.post.scale_inv_diag.array() * pr.scale_diag.array()).inverse().sum();
    log_b_post = log_wishart_b_diag(w.log_det_scale, nu, s);
  }

  Vector dm = w.post.mean - pr.mean_prior;
  const double e_log_p =
      0.5 * (sd * (std::log(pr.mean_precision) - kLog2Pi) + w.e_log_det_lambda -
             sd * pr.mean_precision / beta -
             pr.mean_precision * nu * quad_form(w, p, dm)) +
      p.prior_log_b + 0.5 * (pr.dof - sd - 1.0) * w.e_log_det_lambda -
      0.5 * nu * trace_w0inv_wk;

  const double e_log_q = 0.5 * w.e_log_det_lambda +
                         0.5 * sd * (std::log(beta) - kLog2Pi) - 0.5 * sd +
                         log_b_post + 0.5 * (nu - sd - 1.0) * w.e_log_det_lambda -
                         0.5 * nu * sd;

  return e_log_p - e_log_q;
}

struct VbRun {
  std::vector<ComponentWork> comps;
  std::vector<double> trace;
  Matrix resp;
  bool converged = false;
};

VbRun run_vb_once(VbProblem& p, const FitConfig& cfg, std::uint64_t restart_seed) {
  const Eigen::Index n = p.data.rows();
  const int s = static_cast<int>(p.data.cols());
  const int c = p.c_max;

  // Hard initial assignment to k-means++ seeds (ties to the lowest index).
  const std::vector<int> seeds = detail::kmeanspp_seeds(p.data, c, restart_seed);
  VbRun run;
  run.resp = Matrix::Zero(n, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < c; ++k) {
      const double d = (p.data.row(i) - p.data.row(seeds[static_cast<std::size_t>(k)]))
                           .squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    run.resp(i, best) = 1.0;
  }

  run.comps.resize(static_cast<std::size_t>(c));
  Matrix log_rho(n, c);

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    // Posterior-parameter step from the current responsibilities.
    for (int k = 0; k < c; ++k) {
      auto& w = run.comps[static_cast<std::size_t>(k)];
      const double nk = run.resp.col(k).sum();
      if (nk <= 1e-12) {
        posterior_update(w, p, 0.0, Vector(), Matrix(), Vector());
      } else {
        Vector xbar = (p.data.transpose() * run.resp.col(k)) / nk;
        Matrix centered = p.data.rowwise() - xbar.transpose();
        if (p.kind == CovarianceKind::Full) {
          Matrix weighted = centered.array().colwise() * run.resp.col(k).array();
          Matrix cov = weighted.transpose() * centered / nk;
          cov = 0.5 * (cov + cov.transpose());
          posterior_update(w, p, nk, xbar, cov, Vector());
        } else {
          Vector var =
              (centered.array().square().colwise() * run.resp.col(k).array()).colwise().sum() /
              nk;
          posterior_update(w, p, nk, xbar, Matrix(), var);
        }
      }
      refresh_derived(w, p);
    }

    // Responsibility step.
    double alpha_sum = 0.0;
    for (const auto& w : run.comps) alpha_sum += w.post.alpha;
    const double psi_alpha_sum = digamma(alpha_sum);
    for (int k = 0; k < c; ++k) {
      const auto& w = run.comps[static_cast<std::size_t>(k)];
      const double e_log_pi = digamma(w.post.alpha) - psi_alpha_sum;
      log_rho.col(k) = e_log_pi + 0.5 * w.e_log_det_lambda - 0.5 * s * kLog2Pi -
                       0.5 * expected_mahalanobis(w, p, p.data).array();
    }
    Vector row_max = log_rho.rowwise().maxCoeff();
    Vector lse = row_max.array() +
                 (log_rho.colwise() - row_max).array().exp().rowwise().sum().log();
    run.resp = (log_rho.colwise() - lse).array().exp();

    // ELBO at the current (responsibilities, posterior) state.
    double elbo = lse.sum() + neg_kl_weights(run.comps, p, alpha_sum);
    for (const auto& w : run.comps) elbo += neg_kl_component(w, p);
    run.trace.push_back(elbo);
    if (run.trace.size() >= 2) {
      const double prev = run.trace[run.trace.size() - 2];
      if (std::abs(elbo - prev) / (1.0 + std::abs(prev)) < cfg.rel_tol) {
        run.converged = true;
        break;
      }
    }
  }

  for (int k = 0; k < c; ++k) {
    run.comps[static_cast<std::size_t>(k)].post.support = run.resp.col(k).sum();
  }
  return run;
}

BgmmResolvedPriors resolve_priors(const Eigen::Ref<const Matrix>& data, int c_max,
                                  const BgmmPriors& priors, const FitConfig& cfg) {
  const int s = static_cast<int>(data.cols());
  BgmmResolvedPriors r;
  r.weight_concentration = priors.weight_concentration > 0.0
                               ? priors.weight_concentration
                               : 1.0 / static_cast<double>(c_max);
  r.mean_prior = priors.mean_prior ? *priors.mean_prior
                                   : Vector(data.colwise().mean());
  detail::require(r.mean_prior.size() == s, "mean prior dimension mismatch");
  r.mean_precision = priors.mean_precision;
  detail::require(r.mean_precision > 0.0, "mean precision must be positive");
  r.dof = priors.dof > 0.0 ? priors.dof : static_cast<double>(s);
  detail::require(r.dof >= static_cast<double>(s), "prior dof must be >= dimension");

  if (priors.scale) {
    detail::require(priors.scale->dim() == s, "prior scale dimension mismatch");
    if (priors.scale->kind() == CovarianceKind::Diagonal) {
      r.scale_diag = priors.scale->diag();
      r.scale_full = priors.scale->dense();
    } else {
      r.scale_full = priors.scale->matrix();
      r.scale_diag = r.scale_full.diagonal();
    }
  } else {
    Vector mean = data.colwise().mean();
    Vector var = (data.rowwise() - mean.transpose()).array().square().colwise().sum() /
                 static_cast<double>(data.rows());
    double mean_var = var.mean();
    if (!(mean_var > cfg.reg_eps)) mean_var = std::max(cfg.reg_eps, 1e-12);
    // Scaled so the prior expected precision E[Lambda] = dof * W0 matches the
    // inverse data variance; the prior then smooths weak components toward
    // data-scale covariances instead of keeping them tight and viable.
    r.scale_diag = Vector::Constant(s, 1.0 / (r.dof * mean_var));
    r.scale_full = r.scale_diag.asDiagonal();
  }
  detail::require((r.scale_diag.array() > 0.0).all(), "prior scale must be positive");
  return r;
}

}  // namespace

BgmmModel fit_vb(const Eigen::Ref<const Matrix>& data, int max_components,
                 const BgmmPriors& priors, const FitConfig& cfg) {
  cfg.validate();
  detail::require(max_components >= 1, "max_components must be >= 1");
  detail::require(data.rows() >= 1 && data.cols() >= 1, "fit_vb needs data");
  if (!data.allFinite()) throw ContractViolation("fit_vb input contains non-finite values");

  VbProblem p{data, cfg.covariance_kind, resolve_priors(data, max_components, priors, cfg),
              max_components, Matrix(), 0.0, 0.0};
  const int s = static_cast<int>(data.cols());
  if (p.kind == CovarianceKind::Full) {
    Eigen::LLT<Matrix> llt(p.priors.scale_full);
    if (llt.info() != Eigen::Success) {
      throw SingularCovarianceError("prior scale matrix is not positive-definite");
    }
    p.prior_scale_inv = llt.solve(Matrix::Identity(s, s));
    p.prior_log_det_w0 = 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
    p.prior_log_b = log_wishart_b(p.prior_log_det_w0, p.priors.dof, s);
  } else {
    p.prior_log_det_w0 = p.priors.scale_diag.array().log().sum();
    p.prior_log_b = log_wishart_b_diag(p.prior_log_det_w0, p.priors.dof, s);
  }

  VbRun best;
  bool have_best = false;
  for (int r = 0; r < cfg.n_restarts; ++r) {
    VbRun run = run_vb_once(p, cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(r)));
    if (!have_best || run.trace.back() > best.trace.back()) {
      best = std::move(run);
      have_best = true;
    }
  }

  std::vector<BgmmComponent> comps;
  comps.reserve(best.comps.size());
  for (auto& w : best.comps) comps.push_back(std::move(w.post));
  return BgmmModel(std::move(comps), cfg.covariance_kind, std::move(p.priors),
                   max_components, std::move(best.trace), cfg.seed, best.converged);
}

BgmmModel::BgmmModel(std::vector<BgmmComponent> components, CovarianceKind kind,
                     BgmmResolvedPriors priors, int max_components,
                     std::vector<double> elbo_log, std::uint64_t seed, bool converged)
    : components_(std::move(components)),
      kind_(kind),
      priors_(std::move(priors)),
      max_components_(max_components),
      elbo_log_(std::move(elbo_log)),
      seed_(seed),
      converged_(converged) {
  detail::require(!components_.empty(), "variational mixture needs components");
  detail::require(max_components_ >= static_cast<int>(components_.size()),
                  "max_components below the stored component count");
  const auto s = components_.front().mean.size();
  double alpha_sum = 0.0;
  for (const auto& c : components_) {
    detail::require(c.mean.size() == s, "component dimensions disagree");
    detail::require(c.alpha > 0.0 && c.beta > 0.0 && c.dof > 0.0,
                    "posterior parameters must be positive");
    alpha_sum += c.alpha;
  }

  const double threshold = 1.0 / (10.0 * static_cast<double>(max_components_));
  for (const auto& c : components_) {
    const double ew = c.alpha / alpha_sum;
    expected_weights_.push_back(ew);
    // A component is kept only when its expected weight clears the pruning
    // threshold and it actually explains data; the support condition prunes
    // prior-only components on datasets too small for the weight test alone.
    active_.push_back(ew >= threshold && c.support >= threshold);
  }
  if (std::find(active_.begin(), active_.end(), true) == active_.end()) {
    // Degenerate guard: keep the heaviest component.
    std::size_t best = 0;
    for (std::size_t k = 1; k < components_.size(); ++k) {
      if (expected_weights_[k] > expected_weights_[best]) best = k;
    }
    active_[best] = true;
  }

  const auto sd = static_cast<double>(s);
  for (std::size_t k = 0; k < components_.size(); ++k) {
    if (!active_[k]) continue;
    ++effective_components_;
    const auto& c = components_[k];
    Covariance cov = Covariance::diagonal(Vector::Ones(s));
    if (kind_ == CovarianceKind::Full) {
      const double div = c.dof > sd + 1.0 ? c.dof - sd - 1.0 : c.dof;
      Matrix m = c.scale_inv / div;
      cov = Covariance::full(0.5 * (m + m.transpose()));
    } else {
      Vector v(s);
      const double div = c.dof > 2.0 ? c.dof - 2.0 : c.dof;
      v = c.scale_inv_diag / div;
      cov = Covariance::diagonal(std::move(v));
    }
    plugin_.push_back(GaussianComponent{expected_weights_[k], c.mean, cov});
    plugin_evals_.emplace_back(c.mean, ensure_factorizable(cov, kDefaultRegEps,
                                                           "component " + std::to_string(k)),
                               "component " + std::to_string(k));
    plugin_log_weights_.push_back(std::log(expected_weights_[k]));
  }
}

double BgmmModel::log_likelihood(const Vector& x) const {
  detail::require(x.size() == dim(), "input dimension does not match the mixture");
  std::vector<double> terms(plugin_evals_.size());
  for (std::size_t k = 0; k < plugin_evals_.size(); ++k) {
    terms[k] = plugin_log_weights_[k] + plugin_evals_[k].log_density(x);
  }
  return log_sum_exp(terms);
}

Vector BgmmModel::log_likelihood_batch(const Eigen::Ref<const Matrix>& rows) const {
  detail::require(rows.cols() == dim(), "input dimension does not match the mixture");
  Matrix scored(rows.rows(), static_cast<Eigen::Index>(plugin_evals_.size()));
  for (std::size_t k = 0; k < plugin_evals_.size(); ++k) {
    scored.col(static_cast<Eigen::Index>(k)) =
        plugin_evals_[k].log_density_batch(rows).array() + plugin_log_weights_[k];
  }
  Vector m = scored.rowwise().maxCoeff();
  return m.array() + (scored.colwise() - m).array().exp().rowwise().sum().log();
}

double bgmm_log_likelihood(const Vector& x, const BgmmModel& model) {
  return model.log_likelihood(x);
}

}  // namespace aucil
