#pragma once

#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "gearmpc/sqp.hpp"
#include "gearmpc/vehicle.hpp"

namespace gearmpc {

/// Gear positions over a prediction horizon. A valid schedule never skips
/// gears between consecutive steps.
struct GearSchedule {
    std::vector<int> gears;

    int horizon() const { return static_cast<int>(gears.size()); }
    int operator[](int i) const { return gears[static_cast<std::size_t>(i)]; }
    bool respects_shift_limit() const;
    /// Throws std::invalid_argument on out-of-range gears or skipped shifts.
    void validate(int n_gears = 6) const;

    bool operator==(const GearSchedule& other) const { return gears == other.gears; }
};

/// 1-norm distance between two schedules of equal length.
int schedule_distance(const GearSchedule& a, const GearSchedule& b);

/// Data of the fixed-gear optimal control problem: track x_ref over N steps
/// from x0 with the gear sequence given, trading tracking error against fuel.
struct NlpProblem {
    State x0;
    std::vector<State> x_ref;  // N + 1 entries
    GearSchedule gears;        // N entries
    double beta = 0.01;
    Eigen::Matrix2d Q = Eigen::Matrix2d::Identity();
    VehicleParams params;

    int horizon() const { return gears.horizon(); }
    void validate() const;
};

struct MpcSolution {
    SolveStatus status = SolveStatus::MaxIterations;
    double cost = std::numeric_limits<double>::infinity();
    std::vector<State> x_traj;        // N + 1
    std::vector<ReducedInput> u_traj; // N
    double solve_time = 0.0;          // seconds
    int iterations = 0;
    double kkt_residual = 0.0;
};

// Warm-start bundle carried between consecutive MPC steps: previous optimal
// trajectories advanced by one step, first state replaced by the measurement,
// last input and gear repeated.
struct ShiftedSolution {
    std::vector<State> x_bar;         // N
    std::vector<ReducedInput> u_bar;  // N
    GearSchedule j_bar;               // N
};

/// Multiple-shooting transcription of the fixed-gear problem. The decision
/// vector stacks x(0..N) and u'(0..N-1); equalities are the initial condition
/// and the dynamics defects; all remaining constraints (acceleration, torque
/// rate, torque/brake boxes, and the four engine-speed rows per stage) are
/// linear and constant, so they are assembled once.
class FixedGearNlp final : public SmoothProblem {
  public:
    explicit FixedGearNlp(NlpProblem problem);

    int num_vars() const override { return 2 * (n_ + 1) + 2 * n_; }
    int num_eq() const override { return 2 * (n_ + 1); }
    double objective(const Eigen::VectorXd& w) const override;
    Eigen::VectorXd objective_gradient(const Eigen::VectorXd& w) const override;
    Eigen::MatrixXd objective_hessian() const override;
    Eigen::VectorXd eq_constraints(const Eigen::VectorXd& w) const override;
    Eigen::MatrixXd eq_jacobian(const Eigen::VectorXd& w) const override;
    const Eigen::MatrixXd& ineq_matrix() const override { return G_; }
    const Eigen::VectorXd& ineq_rhs() const override { return h_; }
    void add_eq_curvature(const Eigen::VectorXd& y, Eigen::MatrixXd& H) const override;

    int horizon() const { return n_; }
    const NlpProblem& problem() const { return problem_; }

    Eigen::VectorXd pack(const std::vector<State>& x_traj,
                         const std::vector<ReducedInput>& u_traj) const;
    void unpack(const Eigen::VectorXd& w, std::vector<State>& x_traj,
                std::vector<ReducedInput>& u_traj) const;

    /// Largest violation over every constraint of the problem at w
    /// (equality defects and inequality excess). Used as an independent
    /// feasibility re-check in tests.
    double max_constraint_violation(const Eigen::VectorXd& w) const;

    int p_index(int i) const { return 2 * i; }
    int v_index(int i) const { return 2 * i + 1; }
    int T_index(int i) const { return 2 * (n_ + 1) + 2 * i; }
    int Fb_index(int i) const { return 2 * (n_ + 1) + 2 * i + 1; }

  private:
    NlpProblem problem_;
    int n_;
    std::vector<double> lumped_;  // z(j_i) z_f / r per stage
    std::vector<double> slope_;   // engine-speed slope per stage
    Eigen::MatrixXd G_;
    Eigen::VectorXd h_;
};

struct WarmStart {
    std::vector<State> x_traj;        // N + 1
    std::vector<ReducedInput> u_traj; // N
};

/// Solves the fixed-gear problem with the in-house SQP. Without a warm start
/// the initial guess is the constant-velocity trajectory with the
/// force-balance input, which is itself feasible whenever the schedule is the
/// backup schedule. MaxIterations results keep the infinite-cost convention
/// so callers treat them like infeasibility.
MpcSolution solve_nlp(const NlpProblem& problem, const WarmStart* warm_start = nullptr,
                      const SqpOptions& options = {});

/// Advances an optimal solution by one time step (measured state first, last
/// input and gear repeated). Throws std::logic_error for non-optimal input.
ShiftedSolution shift_solution(const MpcSolution& prev, const GearSchedule& prev_gears,
                               const State& x_now);

/// Initial trajectories for the next solve built from a shifted solution.
WarmStart warm_start_from_shifted(const ShiftedSolution& shifted, const VehicleParams& params);

}  // namespace gearmpc
