#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace gearmpc {

// State of the longitudinal model: position p (m) and velocity v (m/s).
struct State {
    double p = 0.0;
    double v = 0.0;
};

// Continuous control action without the gear: engine torque T (Nm) and
// brake force Fb (N).
struct ReducedInput {
    double T = 0.0;
    double Fb = 0.0;
};

// Full control action including the gear position j in {1,...,6}.
struct FullInput {
    double T = 0.0;
    double Fb = 0.0;
    int gear = 1;
};

// Closed velocity interval [lo, hi] in m/s.
struct VelocityRange {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Physical constants, gear ratios, fuel coefficients and variable bounds.
///
/// Units are SI throughout except engine speed, which is in rpm (the 30/pi
/// factor in the engine-speed map assumes rpm).
struct VehicleParams {
    double m = 0.0;      // vehicle mass (kg)
    double C = 0.0;      // wind drag coefficient (kg/m)
    double mu = 0.0;     // rolling friction coefficient (-)
    double g = 9.81;     // gravitational acceleration (m/s^2)
    double alpha = 0.0;  // road angle (rad), constant per episode
    double r = 0.0;      // wheel radius (m)
    double z_f = 0.0;    // final drive ratio (-)
    std::vector<double> z;  // transmission ratios, z[j-1] for gear j; strictly decreasing
    double c0 = 0.0, c1 = 0.0, c2 = 0.0;  // fuel-rate coefficients (g/s basis)
    double dT_max = 0.0;  // max torque rate (Nm/s)
    double a_max = 0.0;   // max acceleration magnitude (m/s^2)
    double T_min = 0.0, T_max = 0.0;    // engine torque bounds (Nm)
    double Fb_min = 0.0, Fb_max = 0.0;  // brake force bounds (N)
    double w_min = 0.0, w_max = 0.0;    // engine speed bounds (rpm)
    double dt = 1.0;      // time step (s)
    int n_gears = 6;

    // z(j) with gear validity check.
    double gear_ratio(int gear) const;
    // Lumped driveline ratio z(j) * z_f / r (1/m); wheel force = T * lumped_ratio.
    double lumped_ratio(int gear) const;
    // Slope of the engine-speed map for gear j: omega(v, j) = omega_slope(j) * v.
    double omega_slope(int gear) const;

    /// Checks all type invariants; throws std::invalid_argument on violation.
    void validate() const;
};

// One endpoint check of the Proposition-1 force-balance assumption.
struct Prop1Condition {
    int gear = 0;
    double v = 0.0;       // endpoint of Omega(gear)
    double demand = 0.0;  // C v^2 + G
    double lo = 0.0;      // T_min z(j) z_f / r - Fb_max
    double hi = 0.0;      // T_max z(j) z_f / r - Fb_min
    bool pass = false;
};

struct Prop1Report {
    std::array<Prop1Condition, 12> conditions{};
    bool all_pass = false;
};

/// Constant road-load force G = mu m g cos(alpha) + m g sin(alpha) (N).
double friction_force(const VehicleParams& params);

/// Engine speed (rpm) for velocity v and gear j: 30 v z(j) z_f / (r pi).
double engine_speed(double v, int gear, const VehicleParams& params);

/// Velocity envelope implied by the engine-speed bounds:
/// v_min from (w_min, gear 1), v_max from (w_max, gear 6).
std::pair<double, double> velocity_bounds(const VehicleParams& params);

/// Set of gears Phi(v) whose engine speed stays within [w_min, w_max] at
/// velocity v. Bounds are closed, so interval endpoints are feasible.
/// May be empty for v outside the velocity envelope.
std::vector<int> feasible_gears(double v, const VehicleParams& params);

/// Velocity interval Omega(j) on which gear j is feasible.
VelocityRange gear_velocity_range(int gear, const VehicleParams& params);

/// One step of the discrete-time longitudinal dynamics.
State step_dynamics(const State& x, const FullInput& u, const VehicleParams& params);

/// Quadratic tracking cost (x - x_ref)' Q (x - x_ref).
double tracking_cost(const State& x, const State& x_ref, const Eigen::Matrix2d& Q);

/// Fuel cost over one time step: dt (c0 + c1 w + c2 w T) with w = engine_speed(v, j).
double fuel_cost(double v, double T, int gear, const VehicleParams& params);

/// Closed-loop performance metric: sum over aligned steps of
/// beta * tracking_cost + fuel_cost. Throws on length mismatch.
double episode_metric(const std::vector<std::pair<State, FullInput>>& trajectory,
                      const std::vector<State>& reference, double beta,
                      const Eigen::Matrix2d& Q, const VehicleParams& params);

/// Evaluates the force-balance existence condition at both endpoints of
/// Omega(j) for every gear (6 x 2 conditions). The balance
/// u1 z(j) z_f / r - C v^2 - u2 - G = 0 has a solution within the torque and
/// brake boxes iff [T_min z zf/r - Fb_max, T_max z zf/r - Fb_min] contains
/// C v^2 + G.
Prop1Report check_prop1_assumption(const VehicleParams& params);

/// Torque/brake pair holding velocity v constant in gear j, preferring
/// minimal brake use. Empty when no in-bounds balance exists.
std::optional<ReducedInput> balance_input(double v, int gear, const VehicleParams& params);

/// Rejects weight matrices that are not symmetric positive definite.
void validate_weights(const Eigen::Matrix2d& Q);

/// Built-in default profile: a mid-size truck calibrated so the velocity
/// envelope is exactly [2.2, 44.4] m/s.
VehicleParams default_params();

/// Loads a vehicle profile from a JSON document. Validates all type
/// invariants and, unless allow_infeasible_backup is set, refuses profiles
/// whose Proposition-1 report fails.
VehicleParams load_params(const std::string& path, bool allow_infeasible_backup = false);
VehicleParams params_from_json_text(const std::string& text, bool allow_infeasible_backup = false);

/// Serializes a profile back to the JSON schema accepted by load_params.
std::string params_to_json_text(const VehicleParams& params);

}  // namespace gearmpc
