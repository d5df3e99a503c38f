#include "aucil/schedule.hpp"

#include <fstream>
#include <map>
#include <set>

#include "json.hpp"

namespace aucil {

namespace {

constexpr int kScheduleFormatVersion = 1;

}  // namespace

TaskSchedule::TaskSchedule(std::vector<TaskInfo> tasks) : tasks_(std::move(tasks)) {
  if (tasks_.empty()) throw SchemaError("schedule has no tasks");
  std::set<int> task_ids;
  std::set<int> class_ids;
  std::map<std::string, int> labels;
  for (const auto& t : tasks_) {
    if (!task_ids.insert(t.task_id).second) {
      throw SchemaError("duplicate task id " + std::to_string(t.task_id));
    }
    if (t.classes.empty()) {
      throw SchemaError("task " + std::to_string(t.task_id) + " has no classes");
    }
    for (const auto& c : t.classes) {
      if (!class_ids.insert(c.id).second) {
        throw SchemaError("class id " + std::to_string(c.id) +
                          " appears in more than one task");
      }
      if (c.label.empty()) throw SchemaError("empty class label");
      if (!labels.emplace(c.label, c.id).second) {
        throw SchemaError("class label '" + c.label + "' appears in more than one task");
      }
    }
  }
}

int TaskSchedule::total_classes() const {
  int n = 0;
  for (const auto& t : tasks_) n += static_cast<int>(t.classes.size());
  return n;
}

bool TaskSchedule::has_task(int task_id) const {
  for (const auto& t : tasks_) {
    if (t.task_id == task_id) return true;
  }
  return false;
}

const TaskInfo& TaskSchedule::task(int task_id) const {
  for (const auto& t : tasks_) {
    if (t.task_id == task_id) return t;
  }
  throw ScheduleError("task " + std::to_string(task_id) + " is not in the schedule");
}

int TaskSchedule::task_position(int task_id) const {
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    if (tasks_[i].task_id == task_id) return static_cast<int>(i) + 1;
  }
  throw ScheduleError("task " + std::to_string(task_id) + " is not in the schedule");
}

bool TaskSchedule::has_class(int class_id) const {
  for (const auto& t : tasks_) {
    for (const auto& c : t.classes) {
      if (c.id == class_id) return true;
    }
  }
  return false;
}

const ClassInfo& TaskSchedule::class_info(int class_id) const {
  for (const auto& t : tasks_) {
    for (const auto& c : t.classes) {
      if (c.id == class_id) return c;
    }
  }
  throw ScheduleError("class id " + std::to_string(class_id) + " is not in the schedule");
}

int TaskSchedule::task_of_class(int class_id) const {
  for (const auto& t : tasks_) {
    for (const auto& c : t.classes) {
      if (c.id == class_id) return t.task_id;
    }
  }
  throw ScheduleError("class id " + std::to_string(class_id) + " is not in the schedule");
}

std::optional<int> TaskSchedule::class_id_of_label(const std::string& label) const {
  for (const auto& t : tasks_) {
    for (const auto& c : t.classes) {
      if (c.label == label) return c.id;
    }
  }
  return std::nullopt;
}

std::vector<int> TaskSchedule::classes_in_order() const {
  std::vector<int> ids;
  for (const auto& t : tasks_) {
    for (const auto& c : t.classes) ids.push_back(c.id);
  }
  return ids;
}

TaskSchedule builtin_cfee6_schedule() {
  std::vector<TaskInfo> tasks;
  int next_id = 0;
  auto add_task = [&](int task_id, std::initializer_list<const char*> labels) {
    TaskInfo t;
    t.task_id = task_id;
    for (const char* label : labels) t.classes.push_back({next_id++, label});
    tasks.push_back(std::move(t));
  };
  add_task(1, {"neutral", "happy", "sad", "fearful", "angry", "surprised", "disgusted"});
  add_task(2, {"happily_surprised", "happily_disgusted", "awed"});
  add_task(3, {"sadly_fearful", "sadly_angry", "sadly_surprised", "sadly_disgusted"});
  add_task(4, {"fearfully_angry", "fearfully_surprised", "fearfully_disgusted"});
  add_task(5, {"angrily_surprised", "angrily_disgusted", "hatred"});
  add_task(6, {"disgustedly_surprised", "appalled"});
  return TaskSchedule(std::move(tasks));
}

TaskSchedule load_task_schedule(const std::string& path_or_builtin) {
  if (path_or_builtin.rfind("builtin:", 0) == 0) {
    const std::string name = path_or_builtin.substr(8);
    if (name == "cfee6") return builtin_cfee6_schedule();
    throw SchemaError("unknown built-in schedule '" + name + "'");
  }

  std::ifstream in(path_or_builtin, std::ios::binary);
  if (!in) throw IoError("cannot open schedule file '" + path_or_builtin + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("schedule '" + path_or_builtin + "': " + e.what());
  }

  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kScheduleFormatVersion) {
      throw VersionError("schedule format_version " + std::to_string(version) +
                         " is not supported (this build reads " +
                         std::to_string(kScheduleFormatVersion) + ")");
    }
    std::vector<TaskInfo> tasks;
    for (const auto& jt : doc.at("tasks")) {
      TaskInfo t;
      t.task_id = jt.at("task_id").get<int>();
      for (const auto& jc : jt.at("classes")) {
        t.classes.push_back({jc.at("id").get<int>(), jc.at("label").get<std::string>()});
      }
      tasks.push_back(std::move(t));
    }
    return TaskSchedule(std::move(tasks));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("schedule '" + path_or_builtin + "': " + e.what());
  }
}

void save_task_schedule(const TaskSchedule& schedule, const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["format_version"] = kScheduleFormatVersion;
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : schedule.tasks()) {
    nlohmann::json jt;
    jt["task_id"] = t.task_id;
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& c : t.classes) {
      classes.push_back({{"id", c.id}, {"label", c.label}});
    }
    jt["classes"] = std::move(classes);
    tasks.push_back(std::move(jt));
  }
  doc["tasks"] = std::move(tasks);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write schedule file '" + path.string() + "'");
  out << doc.dump(2) << '\n';
}

}  // namespace aucil
