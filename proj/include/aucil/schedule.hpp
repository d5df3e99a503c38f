#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aucil/errors.hpp"

namespace aucil {

struct ClassInfo {
  int id = 0;
  std::string label;
};

struct TaskInfo {
  int task_id = 0;
  std::vector<ClassInfo> classes;
};

// Ordered list of tasks, each carrying its class ids and labels. Class ids
// and labels are globally unique across tasks.
class TaskSchedule {
 public:
  TaskSchedule() = default;
  explicit TaskSchedule(std::vector<TaskInfo> tasks);

  const std::vector<TaskInfo>& tasks() const { return tasks_; }
  int task_count() const { return static_cast<int>(tasks_.size()); }
  int total_classes() const;

  bool has_task(int task_id) const;
  const TaskInfo& task(int task_id) const;
  // 1-based position of the task in schedule order.
  int task_position(int task_id) const;

  bool has_class(int class_id) const;
  const ClassInfo& class_info(int class_id) const;
  int task_of_class(int class_id) const;
  std::optional<int> class_id_of_label(const std::string& label) const;

  // All class ids in schedule order (task by task).
  std::vector<int> classes_in_order() const;

 private:
  std::vector<TaskInfo> tasks_;
};

// The built-in 6-task schedule over 22 emotion classes: basic emotions plus
// neutral first, then the compound-emotion groups.
TaskSchedule builtin_cfee6_schedule();

// Loads a schedule from a JSON config, or returns a built-in one for the
// "builtin:<name>" form ("builtin:cfee6").
TaskSchedule load_task_schedule(const std::string& path_or_builtin);

void save_task_schedule(const TaskSchedule& schedule, const std::filesystem::path& path);

}  // namespace aucil
