#include "aucil/engine.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <thread>

#include "aucil/seeding.hpp"

namespace aucil {

std::string to_string(InferenceMode mode) {
  return mode == InferenceMode::ArgmaxSingleSpace ? "argmax_single_space"
                                                  : "softmax_multi_expert";
}

InferenceMode inference_mode_from_string(const std::string& s) {
  if (s == "argmax_single_space") return InferenceMode::ArgmaxSingleSpace;
  if (s == "softmax_multi_expert") return InferenceMode::SoftmaxMultiExpert;
  throw ContractViolation("unknown inference mode '" + s + "'");
}

std::string to_string(ModelFamily family) {
  return family == ModelFamily::Gmm ? "gmm" : "bgmm";
}

ModelFamily model_family_from_string(const std::string& s) {
  if (s == "gmm") return ModelFamily::Gmm;
  if (s == "bgmm") return ModelFamily::Bgmm;
  throw ContractViolation("unknown model family '" + s + "'");
}

double class_log_likelihood(const ClassModel& model, const Vector& x) {
  return std::visit([&](const auto& m) { return m.log_likelihood(x); }, model);
}

Eigen::Index class_model_dim(const ClassModel& model) {
  return std::visit([](const auto& m) { return m.dim(); }, model);
}

int class_model_components(const ClassModel& model) {
  if (const auto* g = std::get_if<GmmModel>(&model)) return g->component_count();
  return std::get<BgmmModel>(model).effective_components();
}

Eigen::Index Expert::dim() const {
  detail::require(!class_models.empty(), "expert has no class models");
  return class_model_dim(class_models.begin()->second);
}

EnsembleModel::EnsembleModel(TaskSchedule schedule, InferenceMode mode, ModelFamily family,
                             std::uint64_t seed)
    : schedule_(std::move(schedule)), mode_(mode), family_(family), seed_(seed) {
  detail::require(schedule_.task_count() >= 1, "schedule must have at least one task");
}

EnsembleModel::EnsembleModel(TaskSchedule schedule, InferenceMode mode, ModelFamily family,
                             std::uint64_t seed, std::vector<Expert> experts,
                             std::set<int> learned_tasks)
    : EnsembleModel(std::move(schedule), mode, family, seed) {
  experts_ = std::move(experts);
  learned_tasks_ = std::move(learned_tasks);
  std::sort(experts_.begin(), experts_.end(),
            [](const Expert& a, const Expert& b) { return a.expert_id < b.expert_id; });
  std::set<int> seen_classes;
  for (const auto& e : experts_) {
    for (const auto& [class_id, model] : e.class_models) {
      (void)model;
      detail::require(schedule_.has_class(class_id),
                      "expert covers class id " + std::to_string(class_id) +
                          " that is not in the schedule");
      detail::require(seen_classes.insert(class_id).second,
                      "class id " + std::to_string(class_id) +
                          " is covered by more than one expert");
    }
  }
  for (int task_id : learned_tasks_) {
    detail::require(schedule_.has_task(task_id),
                    "learned task " + std::to_string(task_id) + " is not in the schedule");
  }
}

int EnsembleModel::learned_class_count() const {
  int n = 0;
  for (const auto& e : experts_) n += static_cast<int>(e.class_models.size());
  return n;
}

void EnsembleModel::train_task(int task_id, const Dataset& data, const FitConfig& cfg) {
  cfg.validate();
  if (!schedule_.has_task(task_id)) {
    throw ScheduleError("task " + std::to_string(task_id) + " is not in the schedule");
  }
  if (learned_tasks_.count(task_id)) {
    throw DuplicateTaskError("task " + std::to_string(task_id) + " was already trained");
  }

  const TaskInfo& task = schedule_.task(task_id);
  std::set<int> task_classes;
  for (const auto& c : task.classes) task_classes.insert(c.id);
  for (const auto& s : data.samples) {
    if (!task_classes.count(s.class_id)) {
      throw ContractViolation("sample '" + s.sample_id + "' is labeled class id " +
                              std::to_string(s.class_id) + ", outside task " +
                              std::to_string(task_id));
    }
    if (!s.features.allFinite()) {
      throw ContractViolation("sample '" + s.sample_id + "' has non-finite features");
    }
    detail::require(s.features.size() == data.dim, "dataset dimension is inconsistent");
  }

  const auto hist = data.class_histogram();
  for (const auto& c : task.classes) {
    const auto it = hist.find(c.id);
    if (it == hist.end() || it->second < 1) {
      throw InsufficientDataError("class '" + c.label + "' (id " + std::to_string(c.id) +
                                  ") has no samples in task " + std::to_string(task_id));
    }
  }

  if (mode_ == InferenceMode::ArgmaxSingleSpace && !experts_.empty()) {
    detail::require(experts_.front().feature_space_id == data.feature_space_id,
                    "single-space model is bound to feature space '" +
                        experts_.front().feature_space_id + "', got '" +
                        data.feature_space_id + "'");
    detail::require(experts_.front().dim() == data.dim,
                    "feature dimension does not match the trained space");
  }

  // Fit every class of the task; class fits are independent, so they run
  // concurrently with per-class seeds. The model is mutated only after
  // every fit has succeeded.
  struct Job {
    int class_id;
    Matrix rows;
  };
  std::vector<Job> jobs;
  for (const auto& c : task.classes) {
    jobs.push_back({c.id, data.class_features(c.id)});
  }

  std::vector<std::future<ClassModel>> futures;
  futures.reserve(jobs.size());
  for (const auto& job : jobs) {
    futures.push_back(std::async(std::launch::async, [&, class_id = job.class_id,
                                                      rows = job.rows]() -> ClassModel {
      FitConfig class_cfg = cfg;
      class_cfg.seed = class_seed(seed_, class_id);
      if (family_ == ModelFamily::Gmm) {
        return select_by_aic(rows, class_cfg);
      }
      return fit_vb(rows, class_cfg.max_components, BgmmPriors{}, class_cfg);
    }));
  }
  std::vector<std::pair<int, ClassModel>> fitted;
  fitted.reserve(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    try {
      fitted.emplace_back(jobs[i].class_id, futures[i].get());
    } catch (const Error& e) {
      throw Error("training class '" + schedule_.class_info(jobs[i].class_id).label +
                  "' (id " + std::to_string(jobs[i].class_id) + ") of task " +
                  std::to_string(task_id) + ": " + e.what());
    }
  }
  Expert* target = nullptr;
  if (mode_ == InferenceMode::ArgmaxSingleSpace) {
    if (experts_.empty()) experts_.push_back(Expert{0, data.feature_space_id, {}});
    target = &experts_.front();
  } else {
    experts_.push_back(Expert{task_id, data.feature_space_id, {}});
    std::sort(experts_.begin(), experts_.end(),
              [](const Expert& a, const Expert& b) { return a.expert_id < b.expert_id; });
    for (auto& ex : experts_) {
      if (ex.expert_id == task_id) target = &ex;
    }
  }
  for (auto& [class_id, model] : fitted) {
    target->class_models.emplace(class_id, std::move(model));
  }
  learned_tasks_.insert(task_id);
}

SpaceFeatures EnsembleModel::wrap_single_vector(const Vector& x) const {
  detail::require(!experts_.empty(), "model has no experts");
  const std::string& space = experts_.front().feature_space_id;
  for (const auto& e : experts_) {
    detail::require(e.feature_space_id == space,
                    "a single feature vector is ambiguous: experts use different feature "
                    "spaces; pass per-space features");
  }
  return SpaceFeatures{{space, x}};
}

std::map<int, double> EnsembleModel::score_single_space(const Vector& x) const {
  const Expert& expert = experts_.front();
  detail::require(x.size() == expert.dim(), "input dimension does not match the model");
  std::map<int, double> scores;
  for (const auto& [class_id, model] : expert.class_models) {
    scores[class_id] = class_log_likelihood(model, x);
  }
  return scores;
}

std::map<int, double> EnsembleModel::score_multi_expert(const SpaceFeatures& features) const {
  // Per expert: softmax its classes' log-likelihoods. Per class: average the
  // softmax values over the experts covering that class (class coverage is
  // injective, so the divisor is the covering-expert count).
  std::map<int, double> sums;
  std::map<int, int> cover;
  for (const auto& expert : experts_) {
    const auto it = features.find(expert.feature_space_id);
    if (it == features.end()) {
      throw ContractViolation("no feature vector supplied for feature space '" +
                              expert.feature_space_id + "'");
    }
    const Vector& x = it->second;
    detail::require(x.size() == expert.dim(),
                    "input dimension does not match feature space '" +
                        expert.feature_space_id + "'");
    std::vector<int> ids;
    std::vector<double> ll;
    for (const auto& [class_id, model] : expert.class_models) {
      ids.push_back(class_id);
      ll.push_back(class_log_likelihood(model, x));
    }
    const double lse = log_sum_exp(ll);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      sums[ids[i]] += std::exp(ll[i] - lse);
      cover[ids[i]] += 1;
    }
  }
  std::map<int, double> scores;
  for (const auto& [class_id, total] : sums) {
    scores[class_id] = total / cover[class_id];
  }
  return scores;
}

std::map<int, double> EnsembleModel::score_any(const SpaceFeatures& features) const {
  if (learned_tasks_.empty()) {
    throw EmptyModelError("no task has been learned yet");
  }
  if (mode_ == InferenceMode::ArgmaxSingleSpace) {
    const auto it = features.find(experts_.front().feature_space_id);
    if (it == features.end()) {
      throw ContractViolation("no feature vector supplied for feature space '" +
                              experts_.front().feature_space_id + "'");
    }
    return score_single_space(it->second);
  }
  return score_multi_expert(features);
}

Prediction EnsembleModel::argmax_decision(std::map<int, double> scores,
                                          const std::set<int>* restrict_to) {
  int best_id = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& [class_id, score] : scores) {  // ascending id: ties keep the lowest
    if (restrict_to && !restrict_to->count(class_id)) continue;
    if (score > best_score) {
      best_score = score;
      best_id = class_id;
    }
  }
  detail::require(best_id >= 0, "no class available for the decision");
  return Prediction{best_id, std::move(scores)};
}

Prediction EnsembleModel::predict_agnostic(const Vector& x) const {
  if (learned_tasks_.empty()) throw EmptyModelError("no task has been learned yet");
  return argmax_decision(score_any(wrap_single_vector(x)), nullptr);
}

Prediction EnsembleModel::predict_agnostic(const SpaceFeatures& features) const {
  return argmax_decision(score_any(features), nullptr);
}

Prediction EnsembleModel::predict_aware(const Vector& x, int task_id) const {
  if (learned_tasks_.empty()) throw EmptyModelError("no task has been learned yet");
  return predict_aware(wrap_single_vector(x), task_id);
}

Prediction EnsembleModel::predict_aware(const SpaceFeatures& features, int task_id) const {
  if (!learned_tasks_.count(task_id)) {
    throw TaskUnknownError("task " + std::to_string(task_id) + " has not been learned");
  }
  std::set<int> allowed;
  for (const auto& c : schedule_.task(task_id).classes) allowed.insert(c.id);
  return argmax_decision(score_any(features), &allowed);
}

}  // namespace aucil
