#pragma once

#include <Eigen/Core>

namespace gearmpc {

// Convex quadratic program
//   min 1/2 x'Hx + g'x   s.t.  A x = b,  G x <= h,
// with H positive semidefinite. Equality or inequality blocks may be empty.
struct QpProblem {
    Eigen::MatrixXd H;
    Eigen::VectorXd g;
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    Eigen::MatrixXd G;
    Eigen::VectorXd h;
};

enum class QpStatus { Solved, MaxIterations, NumericalFailure };

struct QpResult {
    QpStatus status = QpStatus::NumericalFailure;
    Eigen::VectorXd x;
    Eigen::VectorXd y;       // equality multipliers
    Eigen::VectorXd lambda;  // inequality multipliers (>= 0)
    int iterations = 0;
    double gap = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
};

struct QpOptions {
    int max_iterations = 50;
    double tolerance = 1e-9;  // relative complementarity gap and residuals
};

/// Dense Mehrotra predictor-corrector interior-point method. Deterministic:
/// identical inputs produce identical iterates.
QpResult solve_qp(const QpProblem& qp, const QpOptions& options = {});

// Exact-penalty elastic QP
//   min 1/2 u'Hu + g'u + rho * sum_i max(0, (G u - h)_i)
// with H positive semidefinite. Always feasible; the solution coincides with
// the hard-constrained QP whenever that one is feasible with multipliers
// below rho.
struct ElasticQpProblem {
    Eigen::MatrixXd H;
    Eigen::VectorXd g;
    Eigen::MatrixXd G;
    Eigen::VectorXd h;
    double rho = 1e4;
};

struct ElasticQpResult {
    QpStatus status = QpStatus::NumericalFailure;
    Eigen::VectorXd u;
    Eigen::VectorXd lambda;  // multipliers of the G rows, in [0, rho]
    double violation = 0.0;  // sum of constraint violations at the solution
    int iterations = 0;
    double gap = 0.0;
};

/// Structured interior-point solver for the elastic QP: the slack blocks are
/// diagonal, so each Newton step reduces to one dense solve in the u
/// variables. Finishes with an active-set polish that lands exactly on the
/// optimal face.
ElasticQpResult solve_elastic_qp(const ElasticQpProblem& qp, const QpOptions& options = {});

}  // namespace gearmpc
