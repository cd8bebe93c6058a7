#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "gearmpc/nlp.hpp"
#include "gearmpc/vehicle.hpp"

namespace gearmpc {

// Solution of the force-level tracking problem on the simplified dynamics.
struct ForceSolution {
    SolveStatus status = SolveStatus::MaxIterations;
    double cost = 0.0;
    std::vector<double> F_traj;  // N lumped longitudinal forces (N)
    std::vector<State> x_traj;   // N + 1
    double solve_time = 0.0;
    int iterations = 0;
};

/// Tracking-only NLP over states and a lumped force input, with the
/// acceleration limit, velocity envelope, and force bounds
/// T_min z(1) z_f / r - Fb_max <= F <= F_max_now. The fuel term is absent
/// because the powertrain is not modeled at this level.
ForceSolution solve_force_nlp(const State& x0, const std::vector<State>& x_ref, int N,
                              double F_max_now, const VehicleParams& params,
                              const Eigen::Matrix2d& Q, const SqpOptions& options = {});

/// Largest wheel force available at velocity v: T_max times the largest
/// feasible lumped ratio, i.e. the lowest feasible gear. Throws
/// std::domain_error when no gear is feasible at v.
double max_traction_force(double v, const VehicleParams& params);

struct HierarchicalStep {
    FullInput input;
    int rule_gear = 0;  // gear before shift-limit clipping
    ForceSolution force;
};

/// One step of the decoupled controller: highest feasible gear (clipped to
/// within one of the previous gear), force-level NLP, then torque/brake
/// reconstruction with torque-rate clipping against the previously applied
/// torque. Throws std::runtime_error when the force NLP fails.
HierarchicalStep hierarchical_step(const State& x_now, const std::vector<State>& x_ref_window,
                                   std::optional<int> prev_gear, std::optional<double> prev_T,
                                   int N, const VehicleParams& params, const Eigen::Matrix2d& Q,
                                   const SqpOptions& options = {});

}  // namespace gearmpc
