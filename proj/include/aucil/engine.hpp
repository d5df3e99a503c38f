#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "aucil/bgmm.hpp"
#include "aucil/dataset.hpp"
#include "aucil/gmm.hpp"
#include "aucil/schedule.hpp"

namespace aucil {

enum class InferenceMode { ArgmaxSingleSpace, SoftmaxMultiExpert };
enum class ModelFamily { Gmm, Bgmm };

std::string to_string(InferenceMode mode);
InferenceMode inference_mode_from_string(const std::string& s);
std::string to_string(ModelFamily family);
ModelFamily model_family_from_string(const std::string& s);

using ClassModel = std::variant<GmmModel, BgmmModel>;

double class_log_likelihood(const ClassModel& model, const Vector& x);
Eigen::Index class_model_dim(const ClassModel& model);
int class_model_components(const ClassModel& model);

// One expert: a feature space plus the class-conditional models living in
// it. In single-space mode there is exactly one expert (id 0); in
// multi-expert mode the expert id equals the task id it was trained on.
struct Expert {
  int expert_id = 0;
  std::string feature_space_id;
  std::map<int, ClassModel> class_models;  // class id -> model

  Eigen::Index dim() const;
};

struct Prediction {
  int class_id = 0;
  // Single-space mode: class log-likelihoods. Multi-expert mode: per-class
  // softmax values averaged over the experts covering the class.
  std::map<int, double> scores;
};

// Per-expert feature vectors for multi-expert inference, keyed by
// feature_space_id.
using SpaceFeatures = std::map<std::string, Vector>;

// The incremental classifier: one class-conditional mixture per class,
// trained task by task from current-task data only. Trained class models
// are immutable; prediction is read-only and thread-safe.
class EnsembleModel {
 public:
  EnsembleModel(TaskSchedule schedule, InferenceMode mode, ModelFamily family,
                std::uint64_t seed);
  // Assembles a model from parts (deserialization path).
  EnsembleModel(TaskSchedule schedule, InferenceMode mode, ModelFamily family,
                std::uint64_t seed, std::vector<Expert> experts,
                std::set<int> learned_tasks);

  const TaskSchedule& schedule() const { return schedule_; }
  InferenceMode mode() const { return mode_; }
  ModelFamily family() const { return family_; }
  std::uint64_t seed() const { return seed_; }
  const std::set<int>& learned_tasks() const { return learned_tasks_; }
  const std::vector<Expert>& experts() const { return experts_; }
  int learned_class_count() const;

  // Fits one model per class of `task_id` on that class's samples in
  // `data`. Each class fit is seeded from the global seed and the class id
  // only, so task order and thread schedule cannot change the result.
  void train_task(int task_id, const Dataset& data, const FitConfig& cfg);

  Prediction predict_agnostic(const Vector& x) const;
  Prediction predict_aware(const Vector& x, int task_id) const;
  Prediction predict_agnostic(const SpaceFeatures& features) const;
  Prediction predict_aware(const SpaceFeatures& features, int task_id) const;

  void save(const std::filesystem::path& path) const;
  static EnsembleModel load(const std::filesystem::path& path);
  std::string to_json_string() const;
  static EnsembleModel from_json_string(const std::string& text);

 private:
  std::map<int, double> score_single_space(const Vector& x) const;
  std::map<int, double> score_multi_expert(const SpaceFeatures& features) const;
  std::map<int, double> score_any(const SpaceFeatures& features) const;
  SpaceFeatures wrap_single_vector(const Vector& x) const;
  static Prediction argmax_decision(std::map<int, double> scores,
                                    const std::set<int>* restrict_to);

  TaskSchedule schedule_;
  InferenceMode mode_;
  ModelFamily family_;
  std::uint64_t seed_;
  std::set<int> learned_tasks_;
  std::vector<Expert> experts_;  // kept sorted by expert_id
};

// Current model-file format version.
constexpr int kModelFormatVersion = 1;

}  // namespace aucil
