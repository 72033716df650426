#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gsbf {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

/// Identifies the beamformer block of base station `bs` serving user `user`.
/// Blocks are ordered BS-major: (0,0), (0,1), ..., (0,K-1), (1,0), ...
struct TaskId {
  int bs = 0;
  int user = 0;

  friend constexpr bool operator==(const TaskId&, const TaskId&) = default;
  friend constexpr auto operator<=>(const TaskId&, const TaskId&) = default;
};

inline constexpr int flat_index(TaskId t, int num_users) { return t.bs * num_users + t.user; }
inline constexpr TaskId task_at(int flat, int num_users) {
  return TaskId{flat / num_users, flat % num_users};
}

/// The instance admits no beamformer meeting every QoS target under the power budgets.
class InstanceInfeasible : public std::runtime_error {
 public:
  explicit InstanceInfeasible(const std::string& what) : std::runtime_error(what) {}
};

/// A conic solve broke down numerically (neither a solution nor an infeasibility certificate).
class SolverFailure : public std::runtime_error {
 public:
  explicit SolverFailure(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gsbf
