#pragma once

#include <functional>

#include <Eigen/Core>

namespace gearmpc {

enum class SolveStatus { Optimal, Infeasible, MaxIterations };

const char* to_string(SolveStatus status);

/// Smooth equality-constrained problem with constant linear inequalities:
///   min f(w)  s.t.  c(w) = 0,  G w <= h.
/// The objective model Hessian is constant over the iteration (the problems
/// solved here have constant curvature up to the neglected constraint terms).
class SmoothProblem {
  public:
    virtual ~SmoothProblem() = default;
    virtual int num_vars() const = 0;
    virtual int num_eq() const = 0;
    virtual double objective(const Eigen::VectorXd& w) const = 0;
    virtual Eigen::VectorXd objective_gradient(const Eigen::VectorXd& w) const = 0;
    virtual Eigen::MatrixXd objective_hessian() const = 0;
    virtual Eigen::VectorXd eq_constraints(const Eigen::VectorXd& w) const = 0;
    virtual Eigen::MatrixXd eq_jacobian(const Eigen::VectorXd& w) const = 0;
    virtual const Eigen::MatrixXd& ineq_matrix() const = 0;
    virtual const Eigen::VectorXd& ineq_rhs() const = 0;
    /// Adds the equality-constraint curvature sum_k y_k * hess(c_k) to H.
    /// Default: none (pure Gauss-Newton model).
    virtual void add_eq_curvature(const Eigen::VectorXd& y, Eigen::MatrixXd& H) const {
        (void)y;
        (void)H;
    }
};

// One line per SQP iterate, for optional tracing.
struct SqpIterate {
    int iteration = 0;
    double objective = 0.0;
    double merit = 0.0;
    double violation = 0.0;
    double kkt_residual = 0.0;
    double step_norm = 0.0;
    double step_length = 0.0;
    double slack_norm = 0.0;
};

using TraceSink = std::function<void(const SqpIterate&)>;

struct SqpOptions {
    int max_iterations = 100;
    double kkt_tolerance = 1e-6;
    double feasibility_tolerance = 1e-8;
    double elastic_penalty = 1e4;   // exact-penalty weight on constraint slacks
    double slack_threshold = 1e-6;  // elastic slack norm above which the
                                    // problem is declared infeasible
    double step_tolerance = 1e-10;
    TraceSink trace;
};

struct SqpResult {
    SolveStatus status = SolveStatus::MaxIterations;
    Eigen::VectorXd w;
    double objective = 0.0;
    int iterations = 0;
    double kkt_residual = 0.0;
    double constraint_violation = 0.0;
    Eigen::VectorXd eq_multipliers;
    Eigen::VectorXd ineq_multipliers;
};

/// SQP with an l1 exact-penalty elastic formulation. Every subproblem is a
/// feasible convex QP: the linearized equalities and the (constant) linear
/// inequalities carry penalized slack variables, so infeasible problems are
/// detected by the slack norm at a stationary point instead of by a failed
/// subproblem. Deterministic for identical inputs and initial guesses.
SqpResult solve_sqp(const SmoothProblem& problem, Eigen::VectorXd w0, const SqpOptions& options);

}  // namespace gearmpc
