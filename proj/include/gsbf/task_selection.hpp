#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "gsbf/types.hpp"

namespace gsbf {

/// Which (BS, user) inference tasks are executed. `order` and `cut` record the
/// priority permutation and the accepted prefix length when the selection came
/// out of the priority scan; both are empty/-1 for hand-built selections.
struct TaskSelection {
  int num_bs = 0;
  int num_users = 0;
  std::vector<bool> active;  // flat, BS-major
  std::vector<TaskId> order;
  int cut = -1;

  static TaskSelection none(int num_bs, int num_users) {
    TaskSelection s;
    s.num_bs = num_bs;
    s.num_users = num_users;
    s.active.assign(static_cast<std::size_t>(num_bs * num_users), false);
    return s;
  }

  static TaskSelection all(int num_bs, int num_users) {
    TaskSelection s = none(num_bs, num_users);
    std::fill(s.active.begin(), s.active.end(), true);
    return s;
  }

  static TaskSelection from_tasks(int num_bs, int num_users, const std::vector<TaskId>& tasks) {
    TaskSelection s = none(num_bs, num_users);
    for (const TaskId& t : tasks) s.set(t, true);
    return s;
  }

  /// Prefix {order[0], ..., order[cut-1]} of a priority permutation.
  static TaskSelection from_prefix(int num_bs, int num_users, std::vector<TaskId> order, int cut) {
    if (cut < 0 || cut > static_cast<int>(order.size()))
      throw std::invalid_argument("TaskSelection: cut outside permutation");
    TaskSelection s = none(num_bs, num_users);
    for (int i = 0; i < cut; ++i) s.set(order[static_cast<std::size_t>(i)], true);
    s.order = std::move(order);
    s.cut = cut;
    return s;
  }

  bool contains(TaskId t) const { return active[static_cast<std::size_t>(flat_index(t, num_users))]; }
  bool contains(int flat) const { return active[static_cast<std::size_t>(flat)]; }

  void set(TaskId t, bool on) {
    if (t.bs < 0 || t.bs >= num_bs || t.user < 0 || t.user >= num_users)
      throw std::out_of_range("TaskSelection: task index out of range");
    active[static_cast<std::size_t>(flat_index(t, num_users))] = on;
  }

  int count() const { return static_cast<int>(std::count(active.begin(), active.end(), true)); }

  std::vector<TaskId> tasks() const {
    std::vector<TaskId> out;
    for (int g = 0; g < num_bs * num_users; ++g)
      if (active[static_cast<std::size_t>(g)]) out.push_back(task_at(g, num_users));
    return out;
  }

  /// Users served by BS `bs` (the set A_n).
  std::vector<int> users_of(int bs) const {
    std::vector<int> out;
    for (int k = 0; k < num_users; ++k)
      if (contains(TaskId{bs, k})) out.push_back(k);
    return out;
  }

  /// True when every user has at least one serving task.
  bool covers_all_users() const {
    for (int k = 0; k < num_users; ++k) {
      bool served = false;
      for (int n = 0; n < num_bs && !served; ++n) served = contains(TaskId{n, k});
      if (!served) return false;
    }
    return true;
  }
};

}  // namespace gsbf
