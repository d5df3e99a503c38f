#include <fstream>
#include <sstream>

#include "aucil/engine.hpp"
#include "json.hpp"

namespace aucil {

namespace {

using nlohmann::json;

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const json& arr) {
  Vector v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  return v;
}

json matrix_to_json_rowmajor(const Matrix& m) {
  json arr = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
  }
  return arr;
}

Matrix matrix_from_json_rowmajor(const json& arr, Eigen::Index dim) {
  if (static_cast<Eigen::Index>(arr.size()) != dim * dim) {
    throw ParseError("covariance entry count " + std::to_string(arr.size()) +
                     " does not match dimension " + std::to_string(dim));
  }
  Matrix m(dim, dim);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < dim; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) m(r, c) = arr[i++].get<double>();
  }
  return m;
}

json covariance_to_json(const Covariance& cov) {
  json j;
  j["kind"] = to_string(cov.kind());
  j["reg_eps"] = cov.regularization();
  if (cov.kind() == CovarianceKind::Diagonal) {
    j["data"] = vector_to_json(cov.diag());
  } else {
    j["data"] = matrix_to_json_rowmajor(cov.matrix());
  }
  return j;
}

Covariance covariance_from_json(const json& j, Eigen::Index dim) {
  const auto kind = covariance_kind_from_string(j.at("kind").get<std::string>());
  const double reg = j.at("reg_eps").get<double>();
  if (kind == CovarianceKind::Diagonal) {
    Vector d = vector_from_json(j.at("data"));
    if (d.size() != dim) throw ParseError("diagonal covariance dimension mismatch");
    return Covariance::diagonal(std::move(d), reg);
  }
  return Covariance::full(matrix_from_json_rowmajor(j.at("data"), dim), reg);
}

json fit_trace_to_json(const std::vector<double>& trace) {
  json arr = json::array();
  for (double v : trace) arr.push_back(v);
  return arr;
}

std::vector<double> fit_trace_from_json(const json& arr) {
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) out.push_back(v.get<double>());
  return out;
}

json gmm_to_json(const GmmModel& model) {
  json j;
  j["type"] = "gmm";
  j["covariance_kind"] = to_string(model.covariance_kind());
  j["seed"] = model.seed();
  j["converged"] = model.converged();
  j["fit_log"] = fit_trace_to_json(model.fit_log());
  json comps = json::array();
  for (const auto& c : model.components()) {
    json jc;
    jc["weight"] = c.weight;
    jc["mean"] = vector_to_json(c.mean);
    jc["covariance"] = covariance_to_json(c.covariance);
    comps.push_back(std::move(jc));
  }
  j["components"] = std::move(comps);
  return j;
}

GmmModel gmm_from_json(const json& j) {
  const auto kind = covariance_kind_from_string(j.at("covariance_kind").get<std::string>());
  std::vector<GaussianComponent> comps;
  for (const auto& jc : j.at("components")) {
    const double weight = jc.at("weight").get<double>();
    Vector mean = vector_from_json(jc.at("mean"));
    Covariance cov = covariance_from_json(jc.at("covariance"), mean.size());
    comps.push_back(GaussianComponent{weight, std::move(mean), std::move(cov)});
  }
  return GmmModel(std::move(comps), kind, fit_trace_from_json(j.at("fit_log")),
                  j.at("seed").get<std::uint64_t>(), j.at("converged").get<bool>());
}

json bgmm_to_json(const BgmmModel& model) {
  json j;
  j["type"] = "bgmm";
  j["covariance_kind"] = to_string(model.covariance_kind());
  j["seed"] = model.seed();
  j["converged"] = model.converged();
  j["elbo_log"] = fit_trace_to_json(model.elbo_log());
  j["max_components"] = model.max_components();

  const auto& p = model.priors();
  json jp;
  jp["weight_concentration"] = p.weight_concentration;
  jp["mean_precision"] = p.mean_precision;
  jp["dof"] = p.dof;
  jp["mean_prior"] = vector_to_json(p.mean_prior);
  if (model.covariance_kind() == CovarianceKind::Full) {
    jp["scale_full"] = matrix_to_json_rowmajor(p.scale_full);
  } else {
    jp["scale_diag"] = vector_to_json(p.scale_diag);
  }
  j["priors"] = std::move(jp);

  json comps = json::array();
  for (const auto& c : model.components()) {
    json jc;
    jc["alpha"] = c.alpha;
    jc["beta"] = c.beta;
    jc["dof"] = c.dof;
    jc["support"] = c.support;
    jc["mean"] = vector_to_json(c.mean);
    if (model.covariance_kind() == CovarianceKind::Full) {
      jc["scale_inv"] = matrix_to_json_rowmajor(c.scale_inv);
    } else {
      jc["scale_inv_diag"] = vector_to_json(c.scale_inv_diag);
    }
    comps.push_back(std::move(jc));
  }
  j["components"] = std::move(comps);
  return j;
}

BgmmModel bgmm_from_json(const json& j) {
  const auto kind = covariance_kind_from_string(j.at("covariance_kind").get<std::string>());
  const auto& jp = j.at("priors");
  BgmmResolvedPriors priors;
  priors.weight_concentration = jp.at("weight_concentration").get<double>();
  priors.mean_precision = jp.at("mean_precision").get<double>();
  priors.dof = jp.at("dof").get<double>();
  priors.mean_prior = vector_from_json(jp.at("mean_prior"));
  const Eigen::Index dim = priors.mean_prior.size();
  if (kind == CovarianceKind::Full) {
    priors.scale_full = matrix_from_json_rowmajor(jp.at("scale_full"), dim);
    priors.scale_diag = priors.scale_full.diagonal();
  } else {
    priors.scale_diag = vector_from_json(jp.at("scale_diag"));
    priors.scale_full = priors.scale_diag.asDiagonal();
  }

  std::vector<BgmmComponent> comps;
  for (const auto& jc : j.at("components")) {
    BgmmComponent c;
    c.alpha = jc.at("alpha").get<double>();
    c.beta = jc.at("beta").get<double>();
    c.dof = jc.at("dof").get<double>();
    c.support = jc.at("support").get<double>();
    c.mean = vector_from_json(jc.at("mean"));
    if (kind == CovarianceKind::Full) {
      c.scale_inv = matrix_from_json_rowmajor(jc.at("scale_inv"), dim);
    } else {
      c.scale_inv_diag = vector_from_json(jc.at("scale_inv_diag"));
    }
    comps.push_back(std::move(c));
  }
  return BgmmModel(std::move(comps), kind, std::move(priors),
                   j.at("max_components").get<int>(), fit_trace_from_json(j.at("elbo_log")),
                   j.at("seed").get<std::uint64_t>(), j.at("converged").get<bool>());
}

json schedule_to_json(const TaskSchedule& schedule) {
  json tasks = json::array();
  for (const auto& t : schedule.tasks()) {
    json jt;
    jt["task_id"] = t.task_id;
    json classes = json::array();
    for (const auto& c : t.classes) {
      classes.push_back({{"id", c.id}, {"label", c.label}});
    }
    jt["classes"] = std::move(classes);
    tasks.push_back(std::move(jt));
  }
  return json{{"tasks", std::move(tasks)}};
}

TaskSchedule schedule_from_json(const json& j) {
  std::vector<TaskInfo> tasks;
  for (const auto& jt : j.at("tasks")) {
    TaskInfo t;
    t.task_id = jt.at("task_id").get<int>();
    for (const auto& jc : jt.at("classes")) {
      t.classes.push_back({jc.at("id").get<int>(), jc.at("label").get<std::string>()});
    }
    tasks.push_back(std::move(t));
  }
  return TaskSchedule(std::move(tasks));
}

}  // namespace

std::string EnsembleModel::to_json_string() const {
  json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["mode"] = to_string(mode_);
  doc["model_family"] = to_string(family_);
  doc["seed"] = seed_;
  doc["schedule"] = schedule_to_json(schedule_);
  json learned = json::array();
  for (int t : learned_tasks_) learned.push_back(t);
  doc["learned_tasks"] = std::move(learned);

  json experts = json::array();
  for (const auto& e : experts_) {
    json je;
    je["expert_id"] = e.expert_id;
    je["feature_space_id"] = e.feature_space_id;
    json classes = json::array();
    for (const auto& [class_id, model] : e.class_models) {
      json jc;
      jc["class_id"] = class_id;
      jc["model"] = std::holds_alternative<GmmModel>(model)
                        ? gmm_to_json(std::get<GmmModel>(model))
                        : bgmm_to_json(std::get<BgmmModel>(model));
      classes.push_back(std::move(jc));
    }
    je["classes"] = std::move(classes);
    experts.push_back(std::move(je));
  }
  doc["experts"] = std::move(experts);
  return doc.dump();
}

EnsembleModel EnsembleModel::from_json_string(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("model parse failed at byte " + std::to_string(e.byte) + ": " +
                     e.what());
  }
  try {
    if (!doc.contains("format_version")) {
      throw ParseError("model file has no format_version field");
    }
    const int version = doc.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw VersionError("model format_version " + std::to_string(version) +
                         " is not supported (this build reads " +
                         std::to_string(kModelFormatVersion) + ")");
    }
    TaskSchedule schedule = schedule_from_json(doc.at("schedule"));
    const auto mode = inference_mode_from_string(doc.at("mode").get<std::string>());
    const auto family = model_family_from_string(doc.at("model_family").get<std::string>());
    const auto seed = doc.at("seed").get<std::uint64_t>();

    std::set<int> learned;
    for (const auto& t : doc.at("learned_tasks")) learned.insert(t.get<int>());

    std::vector<Expert> experts;
    for (const auto& je : doc.at("experts")) {
      Expert e;
      e.expert_id = je.at("expert_id").get<int>();
      e.feature_space_id = je.at("feature_space_id").get<std::string>();
      for (const auto& jc : je.at("classes")) {
        const int class_id = jc.at("class_id").get<int>();
        const auto& jm = jc.at("model");
        const auto type = jm.at("type").get<std::string>();
        if (type == "gmm") {
          e.class_models.emplace(class_id, gmm_from_json(jm));
        } else if (type == "bgmm") {
          e.class_models.emplace(class_id, bgmm_from_json(jm));
        } else {
          throw ParseError("unknown class model type '" + type + "'");
        }
      }
      experts.push_back(std::move(e));
    }
    return EnsembleModel(std::move(schedule), mode, family, seed, std::move(experts),
                         std::move(learned));
  } catch (const json::exception& e) {
    throw ParseError(std::string("model file is malformed: ") + e.what());
  }
}

void EnsembleModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model file '" + path.string() + "'");
  out << to_json_string();
  out << '\n';
  if (!out) throw IoError("failed while writing model file '" + path.string() + "'");
}

EnsembleModel EnsembleModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json_string(buffer.str());
}

}  // namespace aucil
