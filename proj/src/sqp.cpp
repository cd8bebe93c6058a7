#include "gearmpc/sqp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "gearmpc/qp.hpp"

namespace gearmpc {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double l1_violation(const VectorXd& c_eq, const VectorXd& ineq_excess) {
    return c_eq.lpNorm<1>() + ineq_excess.cwiseMax(0.0).sum();
}

double inf_violation(const VectorXd& c_eq, const VectorXd& ineq_excess) {
    double v = c_eq.size() > 0 ? c_eq.lpNorm<Eigen::Infinity>() : 0.0;
    if (ineq_excess.size() > 0) v = std::max(v, ineq_excess.maxCoeff());
    return std::max(v, 0.0);
}

// Minimal convexification of the reduced Hessian: eigenvalues below a small
// floor are raised to it. Unlike a uniform Levenberg shift this leaves
// near-flat descent directions traversable, so steps along them are bounded
// by the constraints instead of by the regularization.
MatrixXd convexified(const MatrixXd& M) {
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
    const double floor = 1e-8 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() >= floor) return M;
    return es.eigenvectors() * es.eigenvalues().cwiseMax(floor).asDiagonal() *
           es.eigenvectors().transpose();
}

// Endgame finisher: Newton iterations on the KKT system of a working face
// (equalities plus active inequality rows) with the exact Lagrangian
// Hessian, wrapped in an add/drop repair of the face guess. Returns true and
// updates the iterate when the polished point is a verified KKT point.
bool active_set_newton(const SmoothProblem& problem, const MatrixXd& G, const VectorXd& h,
                       const VectorXd& lambda_hint, double kkt_tol, double feas_tol,
                       VectorXd& w_io, double* kkt_out) {
    const int n = problem.num_vars();
    const int me = problem.num_eq();
    const int mi = static_cast<int>(G.rows());
    const double lam_floor = 1e-10 * std::max(1.0, lambda_hint.lpNorm<Eigen::Infinity>());
    const double feas_guard = 1e-9 * std::max(1.0, h.lpNorm<Eigen::Infinity>());

    std::vector<int> act;
    for (int i = 0; i < mi; ++i) {
        if (lambda_hint[i] > lam_floor) act.push_back(i);
    }

    for (int pass = 0; pass < 12; ++pass) {
        const int ma = static_cast<int>(act.size());
        VectorXd w = w_io;
        VectorXd y = VectorXd::Zero(me);
        VectorXd lam(ma);
        for (int k = 0; k < ma; ++k) lam[k] = std::max(lambda_hint[act[k]], 0.0);

        const int dim = n + me + ma;
        MatrixXd K(dim, dim);
        VectorXd rhs(dim);
        bool solved = true;
        for (int newton = 0; newton < 6; ++newton) {
            const VectorXd grad = problem.objective_gradient(w);
            const MatrixXd J_eq = problem.eq_jacobian(w);
            const VectorXd c_eq = problem.eq_constraints(w);
            MatrixXd W = problem.objective_hessian();
            problem.add_eq_curvature(y, W);

            VectorXd stat = grad + J_eq.transpose() * y;
            for (int k = 0; k < ma; ++k) stat += lam[k] * G.row(act[k]).transpose();
            VectorXd act_resid(ma);
            for (int k = 0; k < ma; ++k) act_resid[k] = G.row(act[k]).dot(w) - h[act[k]];

            const double scale = std::max(1.0, grad.lpNorm<Eigen::Infinity>());
            const double resid =
                std::max({stat.lpNorm<Eigen::Infinity>() / scale,
                          c_eq.size() > 0 ? c_eq.lpNorm<Eigen::Infinity>() : 0.0,
                          ma > 0 ? act_resid.lpNorm<Eigen::Infinity>() : 0.0});
            if (resid <= 0.01 * kkt_tol) break;

            K.setZero();
            K.topLeftCorner(n, n) = W;
            K.block(0, n, n, me) = J_eq.transpose();
            K.block(n, 0, me, n) = J_eq;
            for (int k = 0; k < ma; ++k) {
                K.block(0, n + me + k, n, 1) = G.row(act[k]).transpose();
                K.block(n + me + k, 0, 1, n) = G.row(act[k]);
            }
            rhs.head(n) = -stat;
            rhs.segment(n, me) = -c_eq;
            rhs.tail(ma) = -act_resid;
            const Eigen::PartialPivLU<MatrixXd> lu(K);
            VectorXd step = lu.solve(rhs);
            step += lu.solve(rhs - K * step);
            if (!step.allFinite() ||
                (K * step - rhs).lpNorm<Eigen::Infinity>() >
                    1e-6 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>())) {
                solved = false;
                break;
            }
            w += step.head(n);
            y += step.segment(n, me);
            lam += step.tail(ma);
        }
        if (!solved) return false;

        // Repair the face guess: drop the most negative multiplier, then add
        // the most violated inactive row.
        int drop = -1;
        double worst_lam = -1e-8 * std::max(1.0, ma > 0 ? lam.lpNorm<Eigen::Infinity>() : 1.0);
        for (int k = 0; k < ma; ++k) {
            if (lam[k] < worst_lam) {
                worst_lam = lam[k];
                drop = k;
            }
        }
        if (drop >= 0) {
            act.erase(act.begin() + drop);
            continue;
        }
        const VectorXd excess = G * w - h;
        int add = -1;
        double worst_excess = feas_guard;
        for (int i = 0; i < mi; ++i) {
            if (std::find(act.begin(), act.end(), i) != act.end()) continue;
            if (excess[i] > worst_excess) {
                worst_excess = excess[i];
                add = i;
            }
        }
        if (add >= 0) {
            act.push_back(add);
            continue;
        }

        // Settled face: verify the full KKT conditions at the polished point.
        const VectorXd c_eq = problem.eq_constraints(w);
        double viol = c_eq.size() > 0 ? c_eq.lpNorm<Eigen::Infinity>() : 0.0;
        if (mi > 0) viol = std::max(viol, excess.maxCoeff());
        if (viol > feas_tol) return false;
        const VectorXd grad = problem.objective_gradient(w);
        const MatrixXd J_eq = problem.eq_jacobian(w);
        VectorXd stat = grad + J_eq.transpose() * y;
        VectorXd lam_full = VectorXd::Zero(mi);
        for (int k = 0; k < ma; ++k) lam_full[act[k]] = std::max(0.0, lam[k]);
        stat += G.transpose() * lam_full;
        const double scale = std::max(1.0, grad.lpNorm<Eigen::Infinity>());
        double comp = 0.0;
        for (int i = 0; i < mi; ++i) comp = std::max(comp, std::abs(lam_full[i] * excess[i]));
        const double kkt = std::max(stat.lpNorm<Eigen::Infinity>(), comp) / scale;
        if (kkt > kkt_tol) return false;

        w_io = w;
        if (kkt_out != nullptr) *kkt_out = kkt;
        return true;
    }
    return false;
}

// Best-possible multiplier estimate at a feasible stationary candidate:
// least-squares fit of (y, lambda >= 0 on near-active rows) to the gradient,
// pruning negative multipliers. Returns the scaled KKT residual.
double multiplier_rescue(const SmoothProblem& problem, const VectorXd& w, const MatrixXd& G,
                         const VectorXd& h) {
    const VectorXd grad = problem.objective_gradient(w);
    const MatrixXd J_eq = problem.eq_jacobian(w);
    const int n = problem.num_vars();
    const int me = problem.num_eq();
    const VectorXd excess = G * w - h;
    const double scale = std::max(1.0, grad.lpNorm<Eigen::Infinity>());
    const double act_tol = 1e-6 * std::max(1.0, h.lpNorm<Eigen::Infinity>());

    std::vector<int> act;
    for (int i = 0; i < static_cast<int>(G.rows()); ++i) {
        if (excess[i] >= -act_tol) act.push_back(i);
    }

    const int max_passes = static_cast<int>(act.size()) + 5;
    for (int pass = 0; pass < max_passes; ++pass) {
        const int ma = static_cast<int>(act.size());
        MatrixXd B(n, me + ma);
        B.leftCols(me) = J_eq.transpose();
        for (int k = 0; k < ma; ++k) B.col(me + k) = G.row(act[k]).transpose();
        const VectorXd sol = B.colPivHouseholderQr().solve(-grad);
        int drop = -1;
        double worst = -1e-10;
        for (int k = 0; k < ma; ++k) {
            if (sol[me + k] < worst) {
                worst = sol[me + k];
                drop = k;
            }
        }
        if (drop >= 0) {
            act.erase(act.begin() + drop);
            continue;
        }
        return (grad + B * sol).lpNorm<Eigen::Infinity>() / scale;
    }
    return std::numeric_limits<double>::infinity();
}

}  // namespace

const char* to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::Optimal: return "Optimal";
        case SolveStatus::Infeasible: return "Infeasible";
        case SolveStatus::MaxIterations: return "MaxIterations";
    }
    return "Unknown";
}

// The subproblem at each iterate is condensed: the equality Jacobian is
// square and invertible in the first num_eq() variables (initial condition
// plus one defect row per state), so those variables are eliminated and the
// QP runs over the remaining inputs with one penalized elastic slack per
// inequality row. Steps are globalized by an l1 exact-penalty line search
// with a second-order correction; infeasible problems surface as a
// stationary merit point with slack above the threshold, optimal ones are
// certified by an active-set Newton finisher when the line search stalls
// before the KKT tolerance is met.
SqpResult solve_sqp(const SmoothProblem& problem, VectorXd w, const SqpOptions& opt) {
    const int n = problem.num_vars();
    const int me = problem.num_eq();
    const int nu = n - me;
    const MatrixXd& G = problem.ineq_matrix();
    const VectorXd& h = problem.ineq_rhs();
    const int mi = static_cast<int>(G.rows());
    const double rho = opt.elastic_penalty;

    const MatrixXd H_obj = problem.objective_hessian();
    VectorXd y_prev = VectorXd::Zero(me);

    SqpResult res;
    res.w = w;
    int tiny_steps = 0;

    const auto merit = [&](const VectorXd& point) {
        const VectorXd c = problem.eq_constraints(point);
        const VectorXd excess = G * point - h;
        return problem.objective(point) + rho * l1_violation(c, excess);
    };

    for (int it = 0; it < opt.max_iterations; ++it) {
        const double f = problem.objective(w);
        const VectorXd grad = problem.objective_gradient(w);
        const VectorXd c_eq = problem.eq_constraints(w);
        const MatrixXd J_eq = problem.eq_jacobian(w);
        const VectorXd excess = G * w - h;
        const double viol = inf_violation(c_eq, excess);
        const double viol_l1 = l1_violation(c_eq, excess);
        const double phi = f + rho * viol_l1;

        // Lagrangian curvature from the previous multipliers keeps local
        // convergence fast; the first iteration is pure Gauss-Newton.
        MatrixXd H = H_obj;
        problem.add_eq_curvature(y_prev, H);

        // Eliminate the determined variables: dx = M du + m0.
        const Eigen::PartialPivLU<MatrixXd> ex_lu(J_eq.leftCols(me));
        const MatrixXd M = -ex_lu.solve(J_eq.rightCols(nu));
        const VectorXd m0 = -ex_lu.solve(c_eq);

        // Column-scale the free variables by their dynamic gain so a unit
        // step in any scaled input moves the states by O(1); this removes
        // the huge conditioning spread between torque and brake inputs.
        VectorXd col_scale(nu);
        for (int j = 0; j < nu; ++j)
            col_scale[j] = 1.0 / std::max(1e-6, M.col(j).lpNorm<Eigen::Infinity>());

        // S = [M; I] D, s0 = [m0; 0]; condensed objective and constraints.
        MatrixXd S(n, nu);
        S.topRows(me) = M;
        S.bottomRows(nu) = MatrixXd::Identity(nu, nu);
        S = S * col_scale.asDiagonal();
        VectorXd s0 = VectorXd::Zero(n);
        s0.head(me) = m0;

        const MatrixXd H_red = convexified(S.transpose() * (H * S));
        const VectorXd g_red = S.transpose() * (H * s0 + grad);

        ElasticQpProblem qp;
        qp.H = H_red;
        qp.g = g_red;
        qp.G = G * S;
        qp.h = h - G * w - G * s0;
        qp.rho = rho;
        const ElasticQpResult step = solve_elastic_qp(qp);
        const VectorXd& du = step.u;
        const VectorXd& lambda = step.lambda;
        const double slack_norm = step.violation;
        const VectorXd d = S * du + s0;

        // KKT residual at w: pick equality multipliers that zero the
        // stationarity rows of the determined variables, leaving the reduced
        // gradient and complementarity as the measure.
        const VectorXd gl = grad + G.transpose() * lambda;
        const Eigen::PartialPivLU<MatrixXd> ext_lu(J_eq.leftCols(me).transpose().eval());
        const VectorXd y = -ext_lu.solve(gl.head(me));
        y_prev = y;
        const VectorXd stationarity = gl + J_eq.transpose() * y;
        const double scale = std::max(1.0, grad.lpNorm<Eigen::Infinity>());
        double comp = 0.0;
        for (int i = 0; i < mi; ++i) comp = std::max(comp, std::abs(lambda[i] * excess[i]));
        const double kkt = std::max(stationarity.lpNorm<Eigen::Infinity>(), comp) / scale;

        res.iterations = it + 1;
        res.kkt_residual = kkt;
        res.constraint_violation = viol;
        res.objective = f;
        res.eq_multipliers = y;
        res.ineq_multipliers = lambda;
        res.w = w;

        const double step_norm = d.lpNorm<Eigen::Infinity>();

        SqpIterate rec;
        rec.iteration = it;
        rec.objective = f;
        rec.merit = phi;
        rec.violation = viol;
        rec.kkt_residual = kkt;
        rec.step_norm = step_norm;
        rec.slack_norm = slack_norm;
        const auto emit = [&] {
            if (opt.trace) opt.trace(rec);
        };

        if (viol <= opt.feasibility_tolerance && kkt <= opt.kkt_tolerance) {
            emit();
            res.status = SolveStatus::Optimal;
            return res;
        }

        // On a stall, re-certify before giving up: the subproblem direction
        // can stay bounded away from zero on flat faces even at the solution.
        const auto stalled_exit = [&]() {
            if (viol_l1 > opt.slack_threshold) {
                res.status = SolveStatus::Infeasible;
                return;
            }
            double kkt_polished = 0.0;
            if (active_set_newton(problem, G, h, lambda, opt.kkt_tolerance,
                                  opt.feasibility_tolerance, w, &kkt_polished)) {
                res.w = w;
                res.objective = problem.objective(w);
                res.kkt_residual = kkt_polished;
                res.constraint_violation = 0.0;
                res.status = SolveStatus::Optimal;
                return;
            }
            if (viol <= opt.feasibility_tolerance) {
                const double rescued = multiplier_rescue(problem, w, G, h);
                if (rescued <= opt.kkt_tolerance) {
                    res.kkt_residual = rescued;
                    res.status = SolveStatus::Optimal;
                    return;
                }
            }
            res.status = SolveStatus::MaxIterations;
        };

        if (step.status == QpStatus::NumericalFailure || !d.allFinite()) {
            emit();
            res.status = viol_l1 > opt.slack_threshold ? SolveStatus::Infeasible
                                                       : SolveStatus::MaxIterations;
            return res;
        }

        if (step_norm <= opt.step_tolerance * (1.0 + w.lpNorm<Eigen::Infinity>())) {
            emit();
            stalled_exit();
            return res;
        }

        // Predicted reduction of the l1 merit under the convex model.
        const double model_quad = 0.5 * du.dot(H_red * du) + g_red.dot(du) +
                                  0.5 * s0.dot(H * s0) + grad.dot(s0);
        const VectorXd excess_lin = excess + G * d;
        const double model_merit = f + model_quad + rho * excess_lin.cwiseMax(0.0).sum();
        const double predicted = std::max(phi - model_merit, 0.0);

        double alpha = 1.0;
        bool accepted = false;
        bool corrected = false;
        if (merit(w + d) <= phi - 1e-4 * predicted) {
            accepted = true;
        } else {
            // Second-order correction: retry the full step with the states
            // re-solved against the constraints evaluated at the trial point,
            // which defeats the Maratos effect of the l1 merit.
            const VectorXd c_trial = problem.eq_constraints(w + d);
            VectorXd d_soc = d;
            d_soc.head(me) -= ex_lu.solve(c_trial);
            if (merit(w + d_soc) <= phi - 1e-4 * predicted) {
                accepted = true;
                corrected = true;
                w += d_soc;
            } else {
                alpha = 0.5;
                while (alpha >= 1e-12) {
                    if (merit(w + alpha * d) <= phi - 1e-4 * alpha * predicted) {
                        accepted = true;
                        break;
                    }
                    alpha *= 0.5;
                }
            }
        }
        rec.step_length = accepted ? alpha : 0.0;
        emit();
        if (!accepted) {
            stalled_exit();
            return res;
        }
        if (!corrected) w += alpha * d;

        // Short accepted steps near feasibility signal endgame zigzagging;
        // let the Newton finisher certify or reject the current face.
        if (alpha < 0.1 && viol <= 1e-6 && ++tiny_steps >= 2) {
            double kkt_polished = 0.0;
            if (active_set_newton(problem, G, h, lambda, opt.kkt_tolerance,
                                  opt.feasibility_tolerance, w, &kkt_polished)) {
                res.w = w;
                res.objective = problem.objective(w);
                res.kkt_residual = kkt_polished;
                res.constraint_violation = 0.0;
                res.status = SolveStatus::Optimal;
                return res;
            }
        } else if (alpha >= 0.1) {
            tiny_steps = 0;
        }
    }

    res.status = SolveStatus::MaxIterations;
    res.w = w;
    res.objective = problem.objective(w);
    if (res.constraint_violation <= opt.feasibility_tolerance) {
        double kkt_polished = 0.0;
        if (active_set_newton(problem, G, h, res.ineq_multipliers, opt.kkt_tolerance,
                              opt.feasibility_tolerance, w, &kkt_polished)) {
            res.w = w;
            res.objective = problem.objective(w);
            res.kkt_residual = kkt_polished;
            res.constraint_violation = 0.0;
            res.status = SolveStatus::Optimal;
            return res;
        }
        const double rescued = multiplier_rescue(problem, w, G, h);
        if (rescued <= opt.kkt_tolerance) {
            res.kkt_residual = rescued;
            res.status = SolveStatus::Optimal;
        }
    }
    return res;
}

}  // namespace gearmpc
