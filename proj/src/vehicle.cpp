#include "gearmpc/vehicle.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <json.hpp>

namespace gearmpc {

namespace {

constexpr double kPi = std::numbers::pi;

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

double VehicleParams::gear_ratio(int gear) const {
    if (gear < 1 || gear > n_gears)
        throw std::invalid_argument("gear index out of range: " + std::to_string(gear));
    return z[static_cast<std::size_t>(gear - 1)];
}

double VehicleParams::lumped_ratio(int gear) const { return gear_ratio(gear) * z_f / r; }

double VehicleParams::omega_slope(int gear) const {
    return 30.0 * gear_ratio(gear) * z_f / (r * kPi);
}

void VehicleParams::validate() const {
    require(m > 0.0, "mass must be positive");
    require(C >= 0.0, "drag coefficient must be non-negative");
    require(r > 0.0, "wheel radius must be positive");
    require(z_f > 0.0, "final drive ratio must be positive");
    require(dt > 0.0, "time step must be positive");
    require(n_gears == 6, "profile must define exactly 6 gears");
    require(static_cast<int>(z.size()) == n_gears, "gear ratio list must have 6 entries");
    for (int j = 1; j <= n_gears; ++j) {
        require(z[j - 1] > 0.0, "gear ratios must be positive");
        if (j > 1) require(z[j - 1] < z[j - 2], "gear ratios must be strictly decreasing");
    }
    require(T_min < T_max, "torque bounds must satisfy T_min < T_max");
    require(Fb_min < Fb_max, "brake bounds must satisfy Fb_min < Fb_max");
    require(w_min < w_max, "engine speed bounds must satisfy w_min < w_max");
    require(w_min > 0.0, "w_min must be positive");
    require(dT_max > 0.0, "torque rate bound must be positive");
    require(a_max > 0.0, "acceleration bound must be positive");

    const auto [v_lo, v_hi] = velocity_bounds(*this);
    require(v_lo < v_hi, "velocity envelope is empty (v_min >= v_max)");
    // Consecutive gear ranges must overlap, otherwise no continuous upshift
    // path exists through the envelope.
    for (int j = 1; j < n_gears; ++j) {
        const VelocityRange a = gear_velocity_range(j, *this);
        const VelocityRange b = gear_velocity_range(j + 1, *this);
        require(a.hi > b.lo, "velocity ranges of gears " + std::to_string(j) + " and " +
                                 std::to_string(j + 1) + " do not overlap");
    }
}

double friction_force(const VehicleParams& p) {
    return p.mu * p.m * p.g * std::cos(p.alpha) + p.m * p.g * std::sin(p.alpha);
}

double engine_speed(double v, int gear, const VehicleParams& p) {
    return p.omega_slope(gear) * v;
}

std::pair<double, double> velocity_bounds(const VehicleParams& p) {
    const double v_min = kPi * p.w_min * p.r / (30.0 * p.gear_ratio(1) * p.z_f);
    const double v_max = kPi * p.w_max * p.r / (30.0 * p.gear_ratio(p.n_gears) * p.z_f);
    return {v_min, v_max};
}

std::vector<int> feasible_gears(double v, const VehicleParams& p) {
    std::vector<int> out;
    for (int j = 1; j <= p.n_gears; ++j) {
        const double w = engine_speed(v, j, p);
        if (w >= p.w_min && w <= p.w_max) out.push_back(j);
    }
    return out;
}

VelocityRange gear_velocity_range(int gear, const VehicleParams& p) {
    const double s = 30.0 * p.gear_ratio(gear) * p.z_f / (p.r * kPi);
    return {p.w_min / s, p.w_max / s};
}

State step_dynamics(const State& x, const FullInput& u, const VehicleParams& p) {
    const double force = u.T * p.lumped_ratio(u.gear) - p.C * x.v * x.v - u.Fb - friction_force(p);
    return {x.p + x.v * p.dt, x.v + p.dt / p.m * force};
}

double tracking_cost(const State& x, const State& x_ref, const Eigen::Matrix2d& Q) {
    const Eigen::Vector2d e(x.p - x_ref.p, x.v - x_ref.v);
    return e.dot(Q * e);
}

double fuel_cost(double v, double T, int gear, const VehicleParams& p) {
    const double w = engine_speed(v, gear, p);
    return p.dt * (p.c0 + p.c1 * w + p.c2 * w * T);
}

double episode_metric(const std::vector<std::pair<State, FullInput>>& trajectory,
                      const std::vector<State>& reference, double beta,
                      const Eigen::Matrix2d& Q, const VehicleParams& params) {
    if (trajectory.size() != reference.size())
        throw std::invalid_argument("trajectory and reference lengths differ");
    double total = 0.0;
    for (std::size_t k = 0; k < trajectory.size(); ++k) {
        const auto& [x, u] = trajectory[k];
        total += beta * tracking_cost(x, reference[k], Q) + fuel_cost(x.v, u.T, u.gear, params);
    }
    return total;
}

Prop1Report check_prop1_assumption(const VehicleParams& p) {
    Prop1Report report;
    const double G = friction_force(p);
    report.all_pass = true;
    std::size_t idx = 0;
    for (int j = 1; j <= p.n_gears; ++j) {
        const VelocityRange range = gear_velocity_range(j, p);
        const double n_j = p.lumped_ratio(j);
        for (const double v : {range.lo, range.hi}) {
            Prop1Condition c;
            c.gear = j;
            c.v = v;
            c.demand = p.C * v * v + G;
            c.lo = p.T_min * n_j - p.Fb_max;
            c.hi = p.T_max * n_j - p.Fb_min;
            c.pass = c.demand >= c.lo && c.demand <= c.hi;
            report.all_pass = report.all_pass && c.pass;
            report.conditions[idx++] = c;
        }
    }
    return report;
}

std::optional<ReducedInput> balance_input(double v, int gear, const VehicleParams& p) {
    const double n_j = p.lumped_ratio(gear);
    const double demand = p.C * v * v + friction_force(p);
    // Prefer zero extra braking; fall back to braking off surplus idle torque.
    double T = (demand + p.Fb_min) / n_j;
    double Fb = p.Fb_min;
    if (T > p.T_max) return std::nullopt;
    if (T < p.T_min) {
        T = p.T_min;
        Fb = T * n_j - demand;
        if (Fb > p.Fb_max) return std::nullopt;
    }
    return ReducedInput{T, Fb};
}

void validate_weights(const Eigen::Matrix2d& Q) {
    if (std::abs(Q(0, 1) - Q(1, 0)) > 1e-12 * (1.0 + Q.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("tracking weight matrix must be symmetric");
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(Q);
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw std::invalid_argument("tracking weight matrix must be positive definite");
}

VehicleParams default_params() {
    VehicleParams p;
    p.m = 4500.0;
    p.C = 0.75;
    p.mu = 0.010;
    p.g = 9.81;
    p.alpha = 0.0;
    p.r = 0.5;
    p.z_f = 3.0;
    // First and top gear close the engine-speed algebra so the velocity
    // envelope is exactly [2.2, 44.4] m/s; intermediate gears are geometric.
    p.z = {7.139983303613166, 4.98059109102311, 3.4742780985812156,
           2.423529273068986, 1.6905653407022412, 1.1792765216177903};
    p.c0 = 0.05;     // g/s at idle
    p.c1 = 1.0e-4;   // g/s per rpm
    p.c2 = 5.8e-6;   // g/s per (rpm Nm)
    p.dT_max = 100.0;
    p.a_max = 3.0;
    p.T_min = 15.0;
    p.T_max = 300.0;
    p.Fb_min = 0.0;
    p.Fb_max = 9000.0;
    p.w_min = 900.0;
    p.w_max = 3000.0;
    p.dt = 1.0;
    p.n_gears = 6;
    return p;
}

namespace {

VehicleParams params_from_json(const nlohmann::json& j, bool allow_infeasible_backup) {
    VehicleParams p;
    try {
        p.m = j.at("m").get<double>();
        p.C = j.at("C").get<double>();
        p.mu = j.at("mu").get<double>();
        p.g = j.at("g").get<double>();
        p.alpha = j.at("alpha").get<double>();
        p.r = j.at("r").get<double>();
        p.z_f = j.at("z_f").get<double>();
        p.z = j.at("z").get<std::vector<double>>();
        p.c0 = j.at("c0").get<double>();
        p.c1 = j.at("c1").get<double>();
        p.c2 = j.at("c2").get<double>();
        p.dT_max = j.at("dT_max").get<double>();
        p.a_max = j.at("a_max").get<double>();
        p.T_min = j.at("T_min").get<double>();
        p.T_max = j.at("T_max").get<double>();
        p.Fb_min = j.at("Fb_min").get<double>();
        p.Fb_max = j.at("Fb_max").get<double>();
        p.w_min = j.at("w_min").get<double>();
        p.w_max = j.at("w_max").get<double>();
        p.dt = j.at("dt").get<double>();
        p.n_gears = j.at("n_gears").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("vehicle profile: ") + e.what());
    }
    p.validate();
    if (!allow_infeasible_backup && !check_prop1_assumption(p).all_pass)
        throw std::invalid_argument(
            "vehicle profile fails the backup feasibility conditions; "
            "pass allow_infeasible_backup to load anyway (unsafe)");
    return p;
}

}  // namespace

VehicleParams load_params(const std::string& path, bool allow_infeasible_backup) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open vehicle profile: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("vehicle profile " + path + ": " + e.what());
    }
    return params_from_json(j, allow_infeasible_backup);
}

VehicleParams params_from_json_text(const std::string& text, bool allow_infeasible_backup) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("vehicle profile: ") + e.what());
    }
    return params_from_json(j, allow_infeasible_backup);
}

std::string params_to_json_text(const VehicleParams& p) {
    nlohmann::ordered_json j;
    j["m"] = p.m;
    j["C"] = p.C;
    j["mu"] = p.mu;
    j["g"] = p.g;
    j["alpha"] = p.alpha;
    j["r"] = p.r;
    j["z_f"] = p.z_f;
    j["z"] = p.z;
    j["c0"] = p.c0;
    j["c1"] = p.c1;
    j["c2"] = p.c2;
    j["dT_max"] = p.dT_max;
    j["a_max"] = p.a_max;
    j["T_min"] = p.T_min;
    j["T_max"] = p.T_max;
    j["Fb_min"] = p.Fb_min;
    j["Fb_max"] = p.Fb_max;
    j["w_min"] = p.w_min;
    j["w_max"] = p.w_max;
    j["dt"] = p.dt;
    j["n_gears"] = p.n_gears;
    return j.dump(2) + "\n";
}

}  // namespace gearmpc
