#pragma once

// Dense convex QP: minimize 1/2 x'Hx + g'x subject to Ax <= b.

#include <vector>

#include "wbam/common.hpp"

namespace wbam {

struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

enum class QpStatus { kOptimal, kInfeasible, kMaxIter };

struct QpSolution {
  Eigen::VectorXd x;
  QpStatus status = QpStatus::kMaxIter;
  /// Multipliers of the rows of A, nonnegative at optimality.
  Eigen::VectorXd duals;
  int iterations = 0;
  double objective = 0.0;
  bool regularized = false;
  /// Objective after every primal move; nondecreasing for this dual method.
  std::vector<double> objective_trace;
  std::vector<int> active_set;
};

struct KktResiduals {
  double primal = 0.0;
  double stationarity = 0.0;
  double complementarity = 0.0;
  double dual = 0.0;
};

KktResiduals kkt_residuals(const QpProblem& p, const QpSolution& s);

/// Dual active-set solver (Goldfarb-Idnani). Starts from the unconstrained
/// minimizer, repeatedly adds the most violated row (lowest index on ties),
/// and drops rows whose multipliers would turn negative. The final working set
/// is kept and reused as the starting set of the next solve.
class QpSolver {
 public:
  static constexpr int kMaxRows = 64;

  QpSolution solve(const QpProblem& p, double tol = 1e-9, int max_iter = 200);
  void reset() { warm_.clear(); }
  const std::vector<int>& warm_set() const { return warm_; }

 private:
  std::vector<int> warm_;
};

}  // namespace wbam
