#include "gearmpc/hierarchical.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace gearmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Transcription of the force-level problem: decision vector stacks x(0..N)
// and F(0..N-1); only the drag term in the defects is nonlinear.
class ForceNlp final : public SmoothProblem {
  public:
    ForceNlp(State x0, std::vector<State> x_ref, int N, double F_max_now,
             const VehicleParams& params, Eigen::Matrix2d Q)
        : x0_(x0), x_ref_(std::move(x_ref)), n_(N), params_(params), Q_(Q) {
        if (n_ < 2) throw std::invalid_argument("force NLP requires horizon >= 2");
        if (static_cast<int>(x_ref_.size()) != n_ + 1)
            throw std::invalid_argument("reference must have horizon + 1 entries");
        validate_weights(Q_);

        const double F_min = params_.T_min * params_.lumped_ratio(1) - params_.Fb_max;
        if (F_max_now < F_min)
            throw std::invalid_argument("force upper bound below lower bound");
        const auto [v_lo, v_hi] = velocity_bounds(params_);

        const int rows = 2 * n_ + 2 * n_ + 2 * (n_ + 1);
        G_ = MatrixXd::Zero(rows, num_vars());
        h_ = VectorXd::Zero(rows);
        int r = 0;
        for (int i = 0; i < n_; ++i) {  // acceleration limit
            G_(r, v_index(i + 1)) = 1.0;
            G_(r, v_index(i)) = -1.0;
            h_(r++) = params_.a_max * params_.dt;
            G_(r, v_index(i + 1)) = -1.0;
            G_(r, v_index(i)) = 1.0;
            h_(r++) = params_.a_max * params_.dt;
        }
        for (int i = 0; i < n_; ++i) {  // force box
            G_(r, F_index(i)) = 1.0;
            h_(r++) = F_max_now;
            G_(r, F_index(i)) = -1.0;
            h_(r++) = -F_min;
        }
        for (int i = 0; i <= n_; ++i) {  // velocity envelope
            G_(r, v_index(i)) = 1.0;
            h_(r++) = v_hi;
            G_(r, v_index(i)) = -1.0;
            h_(r++) = -v_lo;
        }
    }

    int num_vars() const override { return 2 * (n_ + 1) + n_; }
    int num_eq() const override { return 2 * (n_ + 1); }

    double objective(const VectorXd& w) const override {
        double f = 0.0;
        for (int i = 0; i <= n_; ++i) {
            const Eigen::Vector2d e(w[p_index(i)] - x_ref_[i].p, w[v_index(i)] - x_ref_[i].v);
            f += e.dot(Q_ * e);
        }
        return f;
    }

    VectorXd objective_gradient(const VectorXd& w) const override {
        VectorXd g = VectorXd::Zero(num_vars());
        for (int i = 0; i <= n_; ++i) {
            const Eigen::Vector2d e(w[p_index(i)] - x_ref_[i].p, w[v_index(i)] - x_ref_[i].v);
            const Eigen::Vector2d ge = 2.0 * (Q_ * e);
            g[p_index(i)] += ge[0];
            g[v_index(i)] += ge[1];
        }
        return g;
    }

    MatrixXd objective_hessian() const override {
        MatrixXd H = MatrixXd::Zero(num_vars(), num_vars());
        for (int i = 0; i <= n_; ++i) {
            const Eigen::Matrix2d block = 2.0 * Q_;
            H(p_index(i), p_index(i)) += block(0, 0);
            H(p_index(i), v_index(i)) += block(0, 1);
            H(v_index(i), p_index(i)) += block(1, 0);
            H(v_index(i), v_index(i)) += block(1, 1);
        }
        return H;
    }

    VectorXd eq_constraints(const VectorXd& w) const override {
        const double G = friction_force(params_);
        VectorXd c(num_eq());
        c[0] = w[p_index(0)] - x0_.p;
        c[1] = w[v_index(0)] - x0_.v;
        for (int i = 0; i < n_; ++i) {
            const double v = w[v_index(i)];
            c[2 + 2 * i] = w[p_index(i + 1)] - w[p_index(i)] - v * params_.dt;
            c[3 + 2 * i] = w[v_index(i + 1)] - v -
                           params_.dt / params_.m * (w[F_index(i)] - params_.C * v * v - G);
        }
        return c;
    }

    MatrixXd eq_jacobian(const VectorXd& w) const override {
        MatrixXd J = MatrixXd::Zero(num_eq(), num_vars());
        J(0, p_index(0)) = 1.0;
        J(1, v_index(0)) = 1.0;
        for (int i = 0; i < n_; ++i) {
            const int rp = 2 + 2 * i;
            const int rv = 3 + 2 * i;
            J(rp, p_index(i + 1)) = 1.0;
            J(rp, p_index(i)) = -1.0;
            J(rp, v_index(i)) = -params_.dt;
            J(rv, v_index(i + 1)) = 1.0;
            J(rv, v_index(i)) = -1.0 + params_.dt / params_.m * 2.0 * params_.C * w[v_index(i)];
            J(rv, F_index(i)) = -params_.dt / params_.m;
        }
        return J;
    }

    const MatrixXd& ineq_matrix() const override { return G_; }
    const VectorXd& ineq_rhs() const override { return h_; }

    void add_eq_curvature(const VectorXd& y, MatrixXd& H) const override {
        const double coef = 2.0 * params_.C * params_.dt / params_.m;
        for (int i = 0; i < n_; ++i) H(v_index(i), v_index(i)) += y[3 + 2 * i] * coef;
    }

    int p_index(int i) const { return 2 * i; }
    int v_index(int i) const { return 2 * i + 1; }
    int F_index(int i) const { return 2 * (n_ + 1) + i; }
    int horizon() const { return n_; }

  private:
    State x0_;
    std::vector<State> x_ref_;
    int n_;
    VehicleParams params_;
    Eigen::Matrix2d Q_;
    MatrixXd G_;
    VectorXd h_;
};

}  // namespace

ForceSolution solve_force_nlp(const State& x0, const std::vector<State>& x_ref, int N,
                              double F_max_now, const VehicleParams& params,
                              const Eigen::Matrix2d& Q, const SqpOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    ForceNlp transcription(x0, x_ref, N, F_max_now, params, Q);

    const double F_min = params.T_min * params.lumped_ratio(1) - params.Fb_max;
    VectorXd w0(transcription.num_vars());
    double pos = x0.p;
    for (int i = 0; i <= N; ++i) {
        w0[transcription.p_index(i)] = pos;
        w0[transcription.v_index(i)] = x0.v;
        pos += x0.v * params.dt;
    }
    const double balance = params.C * x0.v * x0.v + friction_force(params);
    for (int i = 0; i < N; ++i)
        w0[transcription.F_index(i)] = std::clamp(balance, F_min, F_max_now);

    const SqpResult sqp = solve_sqp(transcription, std::move(w0), options);

    ForceSolution sol;
    sol.status = sqp.status;
    sol.cost = sqp.objective;
    sol.iterations = sqp.iterations;
    sol.x_traj.resize(N + 1);
    sol.F_traj.resize(N);
    for (int i = 0; i <= N; ++i)
        sol.x_traj[i] = {sqp.w[transcription.p_index(i)], sqp.w[transcription.v_index(i)]};
    for (int i = 0; i < N; ++i) sol.F_traj[i] = sqp.w[transcription.F_index(i)];
    sol.solve_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
}

double max_traction_force(double v, const VehicleParams& params) {
    const std::vector<int> gears = feasible_gears(v, params);
    if (gears.empty())
        throw std::domain_error("no feasible gear at velocity " + std::to_string(v));
    // z decreases in the gear index, so the lowest feasible gear wins.
    return params.T_max * params.lumped_ratio(gears.front());
}

HierarchicalStep hierarchical_step(const State& x_now, const std::vector<State>& x_ref_window,
                                   std::optional<int> prev_gear, std::optional<double> prev_T,
                                   int N, const VehicleParams& params, const Eigen::Matrix2d& Q,
                                   const SqpOptions& options) {
    const std::vector<int> feasible = feasible_gears(x_now.v, params);
    if (feasible.empty())
        throw std::runtime_error("hierarchical controller: velocity outside the gear envelope");

    HierarchicalStep step;
    step.rule_gear = feasible.back();  // highest feasible gear
    int gear = step.rule_gear;
    if (prev_gear) gear = std::clamp(gear, *prev_gear - 1, *prev_gear + 1);
    gear = std::clamp(gear, 1, params.n_gears);

    const double F_max_now = max_traction_force(x_now.v, params);
    step.force = solve_force_nlp(x_now, x_ref_window, N, F_max_now, params, Q, options);
    if (step.force.status != SolveStatus::Optimal)
        throw std::runtime_error("hierarchical controller: force NLP infeasible");

    const double F_star = step.force.F_traj[0];
    double T = 0.0;
    double Fb = 0.0;
    if (F_star >= 0.0) {
        T = F_star / params.lumped_ratio(gear);
        Fb = 0.0;
    } else {
        T = params.T_min;
        Fb = -F_star + params.T_min * params.lumped_ratio(gear);
    }
    if (prev_T) T = std::clamp(T, *prev_T - params.dT_max * params.dt,
                               *prev_T + params.dT_max * params.dt);
    T = std::clamp(T, params.T_min, params.T_max);
    Fb = std::clamp(Fb, params.Fb_min, params.Fb_max);

    step.input = {T, Fb, gear};
    return step;
}

}  // namespace gearmpc
