#include "aucil/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include "aucil/seeding.hpp"

namespace aucil {

void FitConfig::validate() const {
  detail::require(max_components >= 1, "max_components must be >= 1");
  detail::require(max_iters >= 1, "max_iters must be >= 1");
  detail::require(rel_tol > 0.0 && rel_tol < 1.0, "rel_tol must lie in (0, 1)");
  detail::require(n_restarts >= 1, "n_restarts must be >= 1");
  detail::require(reg_eps >= 0.0, "reg_eps must be >= 0");
}

GmmModel::GmmModel(std::vector<GaussianComponent> components, CovarianceKind kind,
                   std::vector<double> fit_log, std::uint64_t seed, bool converged)
    : components_(std::move(components)),
      kind_(kind),
      fit_log_(std::move(fit_log)),
      seed_(seed),
      converged_(converged) {
  detail::require(!components_.empty(), "mixture needs at least one component");
  double weight_sum = 0.0;
  const Eigen::Index s = components_.front().mean.size();
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const auto& c = components_[k];
    detail::require(c.weight > 0.0 && std::isfinite(c.weight),
                    "component weight must be finite and positive");
    detail::require(c.mean.size() == s && c.covariance.dim() == s,
                    "component dimensions disagree");
    detail::require(c.covariance.kind() == kind_, "component covariance kind mismatch");
    weight_sum += c.weight;
    evaluators_.emplace_back(c.mean, c.covariance, "component " + std::to_string(k));
    log_weights_.push_back(std::log(c.weight));
  }
  detail::require(std::abs(weight_sum - 1.0) <= 1e-9, "mixture weights must sum to 1");
}

double GmmModel::log_likelihood(const Vector& x) const {
  detail::require(x.size() == dim(), "input dimension does not match the mixture");
  std::vector<double> terms(components_.size());
  for (std::size_t k = 0; k < components_.size(); ++k) {
    terms[k] = log_weights_[k] + evaluators_[k].log_density(x);
  }
  return log_sum_exp(terms);
}

Vector GmmModel::log_likelihood_batch(const Eigen::Ref<const Matrix>& rows) const {
  detail::require(rows.cols() == dim(), "input dimension does not match the mixture");
  Matrix scored(rows.rows(), static_cast<Eigen::Index>(components_.size()));
  for (std::size_t k = 0; k < components_.size(); ++k) {
    scored.col(static_cast<Eigen::Index>(k)) =
        evaluators_[k].log_density_batch(rows).array() + log_weights_[k];
  }
  Vector m = scored.rowwise().maxCoeff();
  return m.array() +
         (scored.colwise() - m).array().exp().rowwise().sum().log();
}

double gmm_log_likelihood(const Vector& x, const GmmModel& model) {
  return model.log_likelihood(x);
}

long long gmm_free_parameters(int n_components, int dim, CovarianceKind kind) {
  detail::require(n_components >= 1 && dim >= 1, "counts must be positive");
  const long long c = n_components;
  const long long s = dim;
  const long long cov_entries = kind == CovarianceKind::Diagonal ? c * s : c * s * (s + 1) / 2;
  return (c - 1) + c * s + cov_entries;
}

double aic_score(const GmmModel& model, const Eigen::Ref<const Matrix>& data) {
  detail::require(data.rows() >= 1, "aic_score needs at least one sample");
  const double total_ll = model.log_likelihood_batch(data).sum();
  const long long k = gmm_free_parameters(model.component_count(),
                                          static_cast<int>(model.dim()),
                                          model.covariance_kind());
  return 2.0 * static_cast<double>(k) - 2.0 * total_ll;
}

namespace detail {

std::vector<int> kmeanspp_seeds(const Eigen::Ref<const Matrix>& data, int n_seeds,
                                std::uint64_t seed) {
  const Eigen::Index n = data.rows();
  detail::require(n >= 1 && n_seeds >= 1, "kmeans++ needs data and n_seeds >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  std::vector<int> centers;
  centers.reserve(static_cast<std::size_t>(n_seeds));
  centers.push_back(static_cast<int>(std::min<Eigen::Index>(
      n - 1, static_cast<Eigen::Index>(u01(rng) * static_cast<double>(n)))));

  Vector d2 = Vector::Constant(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < n_seeds) {
    const auto c = data.row(centers.back());
    d2 = d2.cwiseMin((data.rowwise() - c).rowwise().squaredNorm());
    const double total = d2.sum();
    int next;
    if (!(total > 0.0) || !std::isfinite(total)) {
      // All points coincide with chosen centers; fall back to a uniform pick.
      next = static_cast<int>(std::min<Eigen::Index>(
          n - 1, static_cast<Eigen::Index>(u01(rng) * static_cast<double>(n))));
    } else {
      double threshold = u01(rng) * total;
      next = 0;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= threshold) {
          next = static_cast<int>(i);
          break;
        }
      }
    }
    centers.push_back(next);
  }
  return centers;
}

EStep em_estep(const Eigen::Ref<const Matrix>& data,
               const std::vector<GaussianEvaluator>& comps,
               const std::vector<double>& log_weights) {
  const Eigen::Index n = data.rows();
  const auto c = static_cast<Eigen::Index>(comps.size());
  Matrix scored(n, c);
  for (Eigen::Index k = 0; k < c; ++k) {
    scored.col(k) = comps[static_cast<std::size_t>(k)].log_density_batch(data).array() +
                    log_weights[static_cast<std::size_t>(k)];
  }
  EStep out;
  Vector m = scored.rowwise().maxCoeff();
  out.per_sample_ll =
      m.array() + (scored.colwise() - m).array().exp().rowwise().sum().log();
  out.responsibilities = (scored.colwise() - out.per_sample_ll).array().exp();
  out.mean_log_likelihood = out.per_sample_ll.mean();
  return out;
}

}  // namespace detail

namespace {

struct EmState {
  std::vector<GaussianComponent> components;
  std::vector<double> trace;
  bool converged = false;
};

// Smallest covariance eigenvalue (smallest variance for the diagonal kind).
double min_eigenvalue(const Covariance& cov) {
  if (cov.kind() == CovarianceKind::Diagonal) return cov.diag().minCoeff();
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov.matrix(), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Covariance sample_covariance(const Eigen::Ref<const Matrix>& data, const Vector& mean,
                             CovarianceKind kind) {
  Matrix centered = data.rowwise() - mean.transpose();
  const double n = static_cast<double>(data.rows());
  if (kind == CovarianceKind::Diagonal) {
    Vector var = centered.array().square().colwise().sum() / n;
    return Covariance::diagonal(std::move(var));
  }
  Matrix cov = centered.transpose() * centered / n;
  cov = 0.5 * (cov + cov.transpose());
  return Covariance::full(std::move(cov));
}

Covariance weighted_covariance(const Eigen::Ref<const Matrix>& data, const Vector& resp,
                               const Vector& mean, double nk, CovarianceKind kind) {
  Matrix centered = data.rowwise() - mean.transpose();
  if (kind == CovarianceKind::Diagonal) {
    Vector var =
        (centered.array().square().colwise() * resp.array()).colwise().sum() / nk;
    return Covariance::diagonal(std::move(var));
  }
  Matrix weighted = centered.array().colwise() * resp.array();
  Matrix cov = weighted.transpose() * centered / nk;
  cov = 0.5 * (cov + cov.transpose());
  return Covariance::full(std::move(cov));
}

EmState run_em_once(const Eigen::Ref<const Matrix>& data, int n_components,
                    const FitConfig& cfg, std::uint64_t restart_seed) {
  const Eigen::Index n = data.rows();
  const auto c = static_cast<std::size_t>(n_components);

  Vector global_mean = data.colwise().mean();
  Covariance global_cov = ensure_factorizable(
      sample_covariance(data, global_mean, cfg.covariance_kind).regularized(cfg.reg_eps),
      cfg.reg_eps, "initial covariance");

  // With two or more components the likelihood is unbounded: a component can
  // shrink onto a handful of points and spike the likelihood through a
  // near-singular covariance. Such components are re-seeded like empty ones.
  // The floor scales with the smallest data variance; C = 1 has a bounded
  // maximum and keeps the exact closed-form solution.
  const double collapse_floor =
      n_components >= 2
          ? 1e-2 * global_cov.dense().diagonal().minCoeff()
          : 0.0;

  EmState st;
  st.components.assign(
      c, GaussianComponent{1.0 / static_cast<double>(n_components), Vector(), global_cov});
  const std::vector<int> seeds = detail::kmeanspp_seeds(data, n_components, restart_seed);
  for (std::size_t k = 0; k < c; ++k) {
    st.components[k].mean = data.row(seeds[k]);
  }

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    std::vector<GaussianEvaluator> evals;
    std::vector<double> log_w;
    evals.reserve(c);
    log_w.reserve(c);
    for (std::size_t k = 0; k < c; ++k) {
      evals.emplace_back(st.components[k].mean, st.components[k].covariance,
                         "component " + std::to_string(k));
      log_w.push_back(std::log(st.components[k].weight));
    }

    detail::EStep es = detail::em_estep(data, evals, log_w);
    st.trace.push_back(es.mean_log_likelihood);
    if (st.trace.size() >= 2) {
      const double prev = st.trace[st.trace.size() - 2];
      const double rel = std::abs(es.mean_log_likelihood - prev) / (1.0 + std::abs(prev));
      if (rel < cfg.rel_tol) {
        st.converged = true;
        break;
      }
    }
    if (iter == cfg.max_iters - 1) break;  // keep parameters in sync with the trace

    // M-step. Components collapse either by weight (below 1/(10n)) or by
    // covariance (smallest eigenvalue under the floor); both get re-seeded
    // at the worst-explained samples.
    Vector nk = es.responsibilities.colwise().sum();
    std::vector<std::optional<std::pair<Vector, Covariance>>> updates(c);
    std::vector<std::size_t> collapsed;
    for (std::size_t k = 0; k < c; ++k) {
      const auto ke = static_cast<Eigen::Index>(k);
      if (nk[ke] < 0.1) {
        collapsed.push_back(k);
        continue;
      }
      Vector mean = (data.transpose() * es.responsibilities.col(ke)) / nk[ke];
      Covariance cov = weighted_covariance(data, es.responsibilities.col(ke), mean, nk[ke],
                                           cfg.covariance_kind);
      if (collapse_floor > 0.0 && min_eigenvalue(cov) < collapse_floor) {
        collapsed.push_back(k);
        continue;
      }
      updates[k] = std::make_pair(
          std::move(mean),
          ensure_factorizable(cov, cfg.reg_eps, "component " + std::to_string(k)));
    }

    // Worst-explained samples re-seed the collapsed components.
    std::vector<Eigen::Index> order;
    if (!collapsed.empty()) {
      order.resize(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), Eigen::Index{0});
      std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return es.per_sample_ll[a] < es.per_sample_ll[b];
      });
    }

    Vector pseudo_nk = nk;
    std::size_t next_worst = 0;
    for (std::size_t k = 0; k < c; ++k) {
      const auto ke = static_cast<Eigen::Index>(k);
      if (updates[k]) {
        st.components[k].mean = std::move(updates[k]->first);
        st.components[k].covariance = std::move(updates[k]->second);
      } else {
        st.components[k].mean = data.row(order[next_worst % order.size()]);
        ++next_worst;
        st.components[k].covariance = global_cov;
        pseudo_nk[ke] = 1.0;
      }
    }
    const double total = pseudo_nk.sum();
    for (std::size_t k = 0; k < c; ++k) {
      st.components[k].weight = pseudo_nk[static_cast<Eigen::Index>(k)] / total;
    }
    if (!collapsed.empty()) st.trace.clear();  // trace restarts with the re-seeded mixture
  }
  return st;
}

}  // namespace

GmmModel fit_em(const Eigen::Ref<const Matrix>& data, int n_components, const FitConfig& cfg) {
  cfg.validate();
  detail::require(n_components >= 1, "n_components must be >= 1");
  detail::require(data.cols() >= 1, "data must have at least one column");
  if (!data.allFinite()) throw ContractViolation("fit_em input contains non-finite values");
  if (data.rows() < n_components) {
    throw InsufficientDataError("fit_em needs at least " + std::to_string(n_components) +
                                " samples, got " + std::to_string(data.rows()));
  }

  EmState best;
  bool have_best = false;
  for (int r = 0; r < cfg.n_restarts; ++r) {
    EmState st = run_em_once(data, n_components, cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(r)));
    if (!have_best || st.trace.back() > best.trace.back()) {
      best = std::move(st);
      have_best = true;
    }
  }
  return GmmModel(std::move(best.components), cfg.covariance_kind, std::move(best.trace),
                  cfg.seed, best.converged);
}

GmmModel select_by_aic(const Eigen::Ref<const Matrix>& data, const FitConfig& cfg) {
  cfg.validate();
  detail::require(data.rows() >= 1, "select_by_aic needs at least one sample");
  const int c_max = static_cast<int>(
      std::min<Eigen::Index>(cfg.max_components, data.rows()));

  std::optional<GmmModel> best;
  double best_aic = std::numeric_limits<double>::infinity();
  for (int c = 1; c <= c_max; ++c) {
    GmmModel model = fit_em(data, c, cfg);
    const double aic = aic_score(model, data);
    if (aic < best_aic) {  // strict: ties keep the smaller C
      best_aic = aic;
      best = std::move(model);
    }
  }
  return *best;
}

}  // namespace aucil
