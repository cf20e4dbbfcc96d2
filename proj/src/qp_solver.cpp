#include "wbam/qp_solver.hpp"

#include <algorithm>
#include <limits>

namespace wbam {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double objective(const QpProblem& p, const VectorXd& x) {
  return 0.5 * x.dot(p.H * x) + p.g.dot(x);
}

// Working-set bookkeeping in the ">=" convention c'x >= d with c = -A_k', d = -b_k.
class Workspace {
 public:
  Workspace(const QpProblem& p, const Eigen::LLT<MatrixXd>& llt) : p_(p), llt_(llt) {}

  VectorXd normal(int k) const { return -p_.A.row(k).transpose(); }
  double rhs(int k) const { return -p_.b(k); }
  double slack(int k, const VectorXd& x) const { return p_.b(k) - p_.A.row(k).dot(x); }

  // Primal step direction z and dual step r for adding constraint normal np.
  void directions(const std::vector<int>& act, const VectorXd& np, VectorXd& z,
                  VectorXd& r) const {
    const VectorXd hinv_np = llt_.solve(np);
    if (act.empty()) {
      z = hinv_np;
      r.resize(0);
      return;
    }
    MatrixXd n(np.size(), static_cast<Eigen::Index>(act.size()));
    for (std::size_t j = 0; j < act.size(); ++j) n.col(j) = normal(act[j]);
    const MatrixXd hinv_n = llt_.solve(n);
    const MatrixXd m = n.transpose() * hinv_n;
    r = m.ldlt().solve(hinv_n.transpose() * np);
    z = hinv_np - hinv_n * r;
  }

  // Minimizer of the objective with the rows in `act` held as equalities.
  bool equality_solution(const std::vector<int>& act, VectorXd& x, VectorXd& u) const {
    const VectorXd x0 = llt_.solve(-p_.g);
    if (act.empty()) {
      x = x0;
      u.resize(0);
      return true;
    }
    MatrixXd n(x0.size(), static_cast<Eigen::Index>(act.size()));
    VectorXd d(act.size());
    for (std::size_t j = 0; j < act.size(); ++j) {
      n.col(j) = normal(act[j]);
      d(j) = rhs(act[j]);
    }
    const MatrixXd hinv_n = llt_.solve(n);
    const MatrixXd m = n.transpose() * hinv_n;
    u = m.ldlt().solve(d - n.transpose() * x0);
    x = x0 + hinv_n * u;
    return u.allFinite() && x.allFinite();
  }

 private:
  const QpProblem& p_;
  const Eigen::LLT<MatrixXd>& llt_;
};

}  // namespace

KktResiduals kkt_residuals(const QpProblem& p, const QpSolution& s) {
  KktResiduals r;
  const VectorXd ax = p.A * s.x;
  for (Eigen::Index k = 0; k < p.b.size(); ++k) {
    r.primal = std::max(r.primal, ax(k) - p.b(k));
    r.complementarity = std::max(r.complementarity, std::abs(s.duals(k) * (p.b(k) - ax(k))));
    r.dual = std::max(r.dual, -s.duals(k));
  }
  const VectorXd grad = p.H * s.x + p.g + p.A.transpose() * s.duals;
  r.stationarity = grad.lpNorm<Eigen::Infinity>();
  return r;
}

QpSolution QpSolver::solve(const QpProblem& prob, double tol, int max_iter) {
  const Eigen::Index n = prob.H.rows();
  const Eigen::Index m = prob.A.rows();
  if (prob.H.cols() != n || prob.g.size() != n || (m > 0 && prob.A.cols() != n) ||
      prob.b.size() != m) {
    throw DomainError("qp: dimension mismatch");
  }
  if (m > kMaxRows) throw DomainError("qp: too many constraint rows");
  const double scale = std::max(1.0, prob.H.cwiseAbs().maxCoeff());
  if ((prob.H - prob.H.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw DomainError("qp: H is not symmetric");
  }

  QpSolution sol;
  QpProblem p = prob;
  if (m == 0) p.A.resize(0, n);
  const double lambda_min = Eigen::SelfAdjointEigenSolver<MatrixXd>(p.H).eigenvalues().minCoeff();
  if (lambda_min < -1e-9 * scale) throw DomainError("qp: H is not positive semidefinite");
  if (lambda_min < 1e-9) {
    p.H += 1e-9 * MatrixXd::Identity(n, n);
    sol.regularized = true;
  }
  const Eigen::LLT<MatrixXd> llt(p.H);
  if (llt.info() != Eigen::Success) throw DomainError("qp: H is not positive definite");
  Workspace ws(p, llt);

  // Warm start: keep linearly independent rows of the previous working set
  // and drop negative multipliers until the start is dual feasible.
  std::vector<int> act;
  for (int k : warm_) {
    if (k >= m || std::find(act.begin(), act.end(), k) != act.end()) continue;
    VectorXd z, r;
    ws.directions(act, ws.normal(k), z, r);
    if (z.norm() > 1e-10 * std::max(1.0, ws.normal(k).norm())) act.push_back(k);
  }
  VectorXd x, u;
  while (true) {
    if (!ws.equality_solution(act, x, u)) {
      act.clear();
      ws.equality_solution(act, x, u);
      break;
    }
    if (u.size() == 0 || u.minCoeff() >= 0.0) break;
    Eigen::Index worst;
    u.minCoeff(&worst);
    act.erase(act.begin() + worst);
  }
  sol.objective_trace.push_back(objective(p, x));

  auto finish = [&](QpStatus status) {
    sol.status = status;
    sol.x = x;
    sol.duals = VectorXd::Zero(m);
    for (std::size_t j = 0; j < act.size(); ++j) sol.duals(act[j]) = std::max(0.0, u(j));
    sol.objective = objective(prob, x);
    sol.active_set = act;
    if (status == QpStatus::kOptimal) warm_ = act;
    return sol;
  };

  int iter = 0;
  while (iter < max_iter) {
    // Most violated row, lowest index on ties.
    int pick = -1;
    double worst = -tol;
    for (Eigen::Index k = 0; k < m; ++k) {
      const double s = ws.slack(static_cast<int>(k), x);
      if (s < worst) {
        worst = s;
        pick = static_cast<int>(k);
      }
    }
    if (pick < 0) {
      sol.iterations = iter;
      return finish(QpStatus::kOptimal);
    }

    const VectorXd np = ws.normal(pick);
    double u_new = 0.0;
    while (true) {
      ++iter;
      if (iter > max_iter) break;
      VectorXd z, r;
      ws.directions(act, np, z, r);
      double t1 = std::numeric_limits<double>::infinity();
      int drop = -1;
      for (Eigen::Index j = 0; j < r.size(); ++j) {
        if (r(j) > 1e-14) {
          const double ratio = u(j) / r(j);
          if (ratio < t1) {
            t1 = ratio;
            drop = static_cast<int>(j);
          }
        }
      }
      const double curvature = z.dot(np);
      if (curvature <= 1e-14 * std::max(1.0, np.squaredNorm())) {
        if (drop < 0) {
          sol.iterations = iter;
          return finish(QpStatus::kInfeasible);
        }
        u -= t1 * r;
        u_new += t1;
        act.erase(act.begin() + drop);
        u = (VectorXd(u.size() - 1) << u.head(drop), u.tail(u.size() - drop - 1)).finished();
        continue;
      }
      const double t2 = -ws.slack(pick, x) / curvature;
      const double t = std::min(t1, t2);
      x += t * z;
      if (r.size() > 0) u -= t * r;
      u_new += t;
      sol.objective_trace.push_back(objective(p, x));
      if (t2 <= t1) {
        act.push_back(pick);
        u.conservativeResize(u.size() + 1);
        u(u.size() - 1) = u_new;
        break;
      }
      act.erase(act.begin() + drop);
      u = (VectorXd(u.size() - 1) << u.head(drop), u.tail(u.size() - drop - 1)).finished();
    }
  }
  sol.iterations = iter;
  return finish(QpStatus::kMaxIter);
}

}  // namespace wbam
