#include "gearmpc/nlp.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include <Eigen/Dense>

namespace gearmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

bool GearSchedule::respects_shift_limit() const {
    for (std::size_t i = 1; i < gears.size(); ++i) {
        if (std::abs(gears[i] - gears[i - 1]) > 1) return false;
    }
    return true;
}

void GearSchedule::validate(int n_gears) const {
    for (const int j : gears) {
        if (j < 1 || j > n_gears)
            throw std::invalid_argument("gear out of range in schedule: " + std::to_string(j));
    }
    if (!respects_shift_limit())
        throw std::invalid_argument("gear schedule skips a gear between consecutive steps");
}

int schedule_distance(const GearSchedule& a, const GearSchedule& b) {
    if (a.gears.size() != b.gears.size())
        throw std::invalid_argument("schedule lengths differ");
    int d = 0;
    for (std::size_t i = 0; i < a.gears.size(); ++i) d += std::abs(a.gears[i] - b.gears[i]);
    return d;
}

void NlpProblem::validate() const {
    const int n = horizon();
    if (n < 1) throw std::invalid_argument("horizon must be at least 1");
    if (static_cast<int>(x_ref.size()) != n + 1)
        throw std::invalid_argument("reference must have horizon + 1 entries");
    gears.validate(params.n_gears);
    validate_weights(Q);
    if (beta <= 0.0) throw std::invalid_argument("beta must be positive");
}

FixedGearNlp::FixedGearNlp(NlpProblem problem) : problem_(std::move(problem)) {
    problem_.validate();
    n_ = problem_.horizon();
    const VehicleParams& p = problem_.params;
    lumped_.resize(n_);
    slope_.resize(n_);
    for (int i = 0; i < n_; ++i) {
        lumped_[i] = p.lumped_ratio(problem_.gears[i]);
        slope_[i] = p.omega_slope(problem_.gears[i]);
    }

    // Constant linear inequalities G w <= h.
    const int rows = 2 * n_ + 2 * (n_ - 1) + 2 * n_ + 2 * n_ + 4 * n_;
    G_ = MatrixXd::Zero(rows, num_vars());
    h_ = VectorXd::Zero(rows);
    int r = 0;
    for (int i = 0; i < n_; ++i) {  // |v(i+1) - v(i)| <= a_max dt
        G_(r, v_index(i + 1)) = 1.0;
        G_(r, v_index(i)) = -1.0;
        h_(r++) = p.a_max * p.dt;
        G_(r, v_index(i + 1)) = -1.0;
        G_(r, v_index(i)) = 1.0;
        h_(r++) = p.a_max * p.dt;
    }
    for (int i = 0; i + 1 < n_; ++i) {  // |T(i+1) - T(i)| <= dT_max dt
        G_(r, T_index(i + 1)) = 1.0;
        G_(r, T_index(i)) = -1.0;
        h_(r++) = p.dT_max * p.dt;
        G_(r, T_index(i + 1)) = -1.0;
        G_(r, T_index(i)) = 1.0;
        h_(r++) = p.dT_max * p.dt;
    }
    for (int i = 0; i < n_; ++i) {  // torque and brake boxes
        G_(r, T_index(i)) = 1.0;
        h_(r++) = p.T_max;
        G_(r, T_index(i)) = -1.0;
        h_(r++) = -p.T_min;
        G_(r, Fb_index(i)) = 1.0;
        h_(r++) = p.Fb_max;
        G_(r, Fb_index(i)) = -1.0;
        h_(r++) = -p.Fb_min;
    }
    for (int i = 0; i < n_; ++i) {  // engine speed at both ends of each stage
        G_(r, v_index(i)) = slope_[i];
        h_(r++) = p.w_max;
        G_(r, v_index(i)) = -slope_[i];
        h_(r++) = -p.w_min;
        G_(r, v_index(i + 1)) = slope_[i];
        h_(r++) = p.w_max;
        G_(r, v_index(i + 1)) = -slope_[i];
        h_(r++) = -p.w_min;
    }
}

double FixedGearNlp::objective(const VectorXd& w) const {
    const VehicleParams& p = problem_.params;
    double f = 0.0;
    for (int i = 0; i <= n_; ++i) {
        const Eigen::Vector2d e(w[p_index(i)] - problem_.x_ref[i].p,
                                w[v_index(i)] - problem_.x_ref[i].v);
        f += problem_.beta * e.dot(problem_.Q * e);
    }
    for (int i = 0; i < n_; ++i) {
        const double omega = slope_[i] * w[v_index(i)];
        f += p.dt * (p.c0 + p.c1 * omega + p.c2 * omega * w[T_index(i)]);
    }
    return f;
}

VectorXd FixedGearNlp::objective_gradient(const VectorXd& w) const {
    const VehicleParams& p = problem_.params;
    VectorXd g = VectorXd::Zero(num_vars());
    for (int i = 0; i <= n_; ++i) {
        const Eigen::Vector2d e(w[p_index(i)] - problem_.x_ref[i].p,
                                w[v_index(i)] - problem_.x_ref[i].v);
        const Eigen::Vector2d ge = 2.0 * problem_.beta * (problem_.Q * e);
        g[p_index(i)] += ge[0];
        g[v_index(i)] += ge[1];
    }
    for (int i = 0; i < n_; ++i) {
        g[v_index(i)] += p.dt * slope_[i] * (p.c1 + p.c2 * w[T_index(i)]);
        g[T_index(i)] += p.dt * p.c2 * slope_[i] * w[v_index(i)];
    }
    return g;
}

MatrixXd FixedGearNlp::objective_hessian() const {
    const VehicleParams& p = problem_.params;
    MatrixXd H = MatrixXd::Zero(num_vars(), num_vars());
    for (int i = 0; i <= n_; ++i) {
        const Eigen::Matrix2d block = 2.0 * problem_.beta * problem_.Q;
        H(p_index(i), p_index(i)) += block(0, 0);
        H(p_index(i), v_index(i)) += block(0, 1);
        H(v_index(i), p_index(i)) += block(1, 0);
        H(v_index(i), v_index(i)) += block(1, 1);
    }
    for (int i = 0; i < n_; ++i) {
        const double cross = p.dt * p.c2 * slope_[i];
        H(v_index(i), T_index(i)) += cross;
        H(T_index(i), v_index(i)) += cross;
    }
    return H;
}

VectorXd FixedGearNlp::eq_constraints(const VectorXd& w) const {
    const VehicleParams& p = problem_.params;
    const double G = friction_force(p);
    VectorXd c(num_eq());
    c[0] = w[p_index(0)] - problem_.x0.p;
    c[1] = w[v_index(0)] - problem_.x0.v;
    for (int i = 0; i < n_; ++i) {
        const double v = w[v_index(i)];
        const double force = w[T_index(i)] * lumped_[i] - p.C * v * v - w[Fb_index(i)] - G;
        c[2 + 2 * i] = w[p_index(i + 1)] - w[p_index(i)] - v * p.dt;
        c[3 + 2 * i] = w[v_index(i + 1)] - v - p.dt / p.m * force;
    }
    return c;
}

MatrixXd FixedGearNlp::eq_jacobian(const VectorXd& w) const {
    const VehicleParams& p = problem_.params;
    MatrixXd J = MatrixXd::Zero(num_eq(), num_vars());
    J(0, p_index(0)) = 1.0;
    J(1, v_index(0)) = 1.0;
    for (int i = 0; i < n_; ++i) {
        const int rp = 2 + 2 * i;
        const int rv = 3 + 2 * i;
        J(rp, p_index(i + 1)) = 1.0;
        J(rp, p_index(i)) = -1.0;
        J(rp, v_index(i)) = -p.dt;
        J(rv, v_index(i + 1)) = 1.0;
        J(rv, v_index(i)) = -1.0 + p.dt / p.m * 2.0 * p.C * w[v_index(i)];
        J(rv, T_index(i)) = -p.dt / p.m * lumped_[i];
        J(rv, Fb_index(i)) = p.dt / p.m;
    }
    return J;
}

void FixedGearNlp::add_eq_curvature(const VectorXd& y, MatrixXd& H) const {
    // Only the drag term is nonlinear: each velocity defect row contributes
    // y * 2C dt / m on its stage velocity.
    const VehicleParams& p = problem_.params;
    const double coef = 2.0 * p.C * p.dt / p.m;
    for (int i = 0; i < n_; ++i) H(v_index(i), v_index(i)) += y[3 + 2 * i] * coef;
}

VectorXd FixedGearNlp::pack(const std::vector<State>& x_traj,
                            const std::vector<ReducedInput>& u_traj) const {
    if (static_cast<int>(x_traj.size()) != n_ + 1 || static_cast<int>(u_traj.size()) != n_)
        throw std::invalid_argument("trajectory lengths do not match the horizon");
    VectorXd w(num_vars());
    for (int i = 0; i <= n_; ++i) {
        w[p_index(i)] = x_traj[i].p;
        w[v_index(i)] = x_traj[i].v;
    }
    for (int i = 0; i < n_; ++i) {
        w[T_index(i)] = u_traj[i].T;
        w[Fb_index(i)] = u_traj[i].Fb;
    }
    return w;
}

void FixedGearNlp::unpack(const VectorXd& w, std::vector<State>& x_traj,
                          std::vector<ReducedInput>& u_traj) const {
    x_traj.resize(n_ + 1);
    u_traj.resize(n_);
    for (int i = 0; i <= n_; ++i) x_traj[i] = {w[p_index(i)], w[v_index(i)]};
    for (int i = 0; i < n_; ++i) u_traj[i] = {w[T_index(i)], w[Fb_index(i)]};
}

double FixedGearNlp::max_constraint_violation(const VectorXd& w) const {
    const VectorXd c = eq_constraints(w);
    const VectorXd excess = G_ * w - h_;
    double v = c.lpNorm<Eigen::Infinity>();
    if (excess.size() > 0) v = std::max(v, excess.maxCoeff());
    return v;
}

namespace {

WarmStart constant_velocity_guess(const NlpProblem& problem) {
    const VehicleParams& p = problem.params;
    const double v = problem.x0.v;
    const int n = problem.horizon();
    WarmStart ws;
    ws.x_traj.resize(n + 1);
    ws.u_traj.resize(n);
    double pos = problem.x0.p;
    for (int i = 0; i <= n; ++i) {
        ws.x_traj[i] = {pos, v};
        pos += v * p.dt;
    }
    for (int i = 0; i < n; ++i) {
        const int gear = problem.gears[i];
        if (const auto u = balance_input(v, gear, p)) {
            ws.u_traj[i] = *u;
        } else {
            const double demand = p.C * v * v + friction_force(p);
            const double T = std::clamp(demand / p.lumped_ratio(gear), p.T_min, p.T_max);
            ws.u_traj[i] = {T, p.Fb_min};
        }
    }
    return ws;
}

}  // namespace

MpcSolution solve_nlp(const NlpProblem& problem, const WarmStart* warm_start,
                      const SqpOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    FixedGearNlp transcription(problem);

    VectorXd w0;
    if (warm_start != nullptr) {
        w0 = transcription.pack(warm_start->x_traj, warm_start->u_traj);
    } else {
        const WarmStart cold = constant_velocity_guess(problem);
        w0 = transcription.pack(cold.x_traj, cold.u_traj);
    }

    const SqpResult sqp = solve_sqp(transcription, std::move(w0), options);

    MpcSolution sol;
    sol.status = sqp.status;
    sol.iterations = sqp.iterations;
    sol.kkt_residual = sqp.kkt_residual;
    transcription.unpack(sqp.w, sol.x_traj, sol.u_traj);
    sol.cost = sqp.status == SolveStatus::Optimal ? sqp.objective
                                                  : std::numeric_limits<double>::infinity();
    sol.solve_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
}

ShiftedSolution shift_solution(const MpcSolution& prev, const GearSchedule& prev_gears,
                               const State& x_now) {
    if (prev.status != SolveStatus::Optimal)
        throw std::logic_error("shift_solution requires an optimal previous solution");
    const int n = prev_gears.horizon();
    if (static_cast<int>(prev.x_traj.size()) != n + 1 ||
        static_cast<int>(prev.u_traj.size()) != n)
        throw std::invalid_argument("previous solution does not match the schedule horizon");

    ShiftedSolution s;
    s.x_bar.resize(n);
    s.u_bar.resize(n);
    s.j_bar.gears.resize(n);
    s.x_bar[0] = x_now;  // measured state replaces the prediction
    for (int i = 1; i < n; ++i) s.x_bar[i] = prev.x_traj[i + 1];
    for (int i = 0; i + 1 < n; ++i) {
        s.u_bar[i] = prev.u_traj[i + 1];
        s.j_bar.gears[i] = prev_gears[i + 1];
    }
    s.u_bar[n - 1] = prev.u_traj[n - 1];
    s.j_bar.gears[n - 1] = prev_gears[n - 1];
    return s;
}

WarmStart warm_start_from_shifted(const ShiftedSolution& shifted, const VehicleParams& params) {
    const int n = static_cast<int>(shifted.x_bar.size());
    WarmStart ws;
    ws.x_traj.assign(shifted.x_bar.begin(), shifted.x_bar.end());
    const FullInput last{shifted.u_bar.back().T, shifted.u_bar.back().Fb,
                         shifted.j_bar.gears.back()};
    ws.x_traj.push_back(step_dynamics(shifted.x_bar[n - 1], last, params));
    ws.u_traj = shifted.u_bar;
    return ws;
}

}  // namespace gearmpc
