#include "gearmpc/minlp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gearmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Strict-improvement rule shared by both search modes: an incumbent is
// replaced only when beaten by more than a relative tie tolerance, so the
// lexicographically first of near-equal schedules wins in either mode.
bool improves(double cost, double best) {
    if (!std::isfinite(best)) return std::isfinite(cost);
    return cost < best - 1e-9 * std::max(1.0, std::abs(best));
}

// Velocities reachable i steps from v0 under the acceleration limit must be
// able to satisfy both engine-speed conditions of stage i (at step i and
// step i+1) for gear j. Necessary condition only, so pruning is sound.
bool stage_reachable(double v0, int stage, int gear, const VehicleParams& params) {
    const VelocityRange range = gear_velocity_range(gear, params);
    const double radius_now = stage * params.a_max * params.dt;
    const double radius_next = (stage + 1) * params.a_max * params.dt;
    const bool now_ok = v0 - radius_now <= range.hi && v0 + radius_now >= range.lo;
    const bool next_ok = v0 - radius_next <= range.hi && v0 + radius_next >= range.lo;
    return now_ok && next_ok;
}

struct Search {
    const State& x0;
    const std::vector<State>& x_ref;
    int N;
    const GearSearchConfig& config;
    const VehicleParams& params;
    double beta;
    const Eigen::Matrix2d& Q;
    const SqpOptions& options;
    bool bounds_valid;  // truncated-prefix costs lower-bound full costs
    std::optional<int> first_gear;

    MinlpResult result;
    double best_cost = kInf;

    NlpProblem make_problem(const GearSchedule& gears) const {
        NlpProblem problem;
        problem.x0 = x0;
        problem.x_ref.assign(x_ref.begin(), x_ref.begin() + gears.horizon() + 1);
        problem.gears = gears;
        problem.beta = beta;
        problem.Q = Q;
        problem.params = params;
        return problem;
    }

    bool budget_left() {
        if (result.nlp_solves >= config.leaf_budget) {
            result.budget_exhausted = true;
            return false;
        }
        return true;
    }

    bool gear_admissible(int gear, int depth, int prev) const {
        if (depth == 0)
            return !(config.enforce_first_gear_continuity && first_gear &&
                     std::abs(gear - *first_gear) > 1);
        return std::abs(gear - prev) <= 1;
    }

    // Leaf solves always start from the same deterministic cold guess so that
    // exhaustive and branch-and-bound evaluate identical leaves identically.
    void evaluate_leaf(const GearSchedule& gears) {
        ++result.nlp_solves;
        const MpcSolution sol = solve_nlp(make_problem(gears), nullptr, options);
        if (sol.status != SolveStatus::Optimal) return;
        if (improves(sol.cost, best_cost)) {
            best_cost = sol.cost;
            result.solution = sol;
            result.schedule = gears;
        }
    }

    // Lower bound for all completions of a partial schedule: the exact NLP
    // value over the truncated horizon. Infinity prunes the whole subtree.
    double bound(const GearSchedule& partial, const WarmStart* warm, MpcSolution* out) {
        ++result.nlp_solves;
        const MpcSolution sol = solve_nlp(make_problem(partial), warm, options);
        if (out != nullptr) *out = sol;
        return sol.status == SolveStatus::Optimal ? sol.cost : kInf;
    }

    // One-stage extension of a truncated solution, used only as a warm start.
    WarmStart extend_warm(const MpcSolution& sol, int gear) const {
        WarmStart ws;
        ws.x_traj = sol.x_traj;
        ws.u_traj = sol.u_traj;
        const double v = ws.x_traj.back().v;
        ReducedInput u;
        if (const auto bal = balance_input(v, gear, params)) {
            u = *bal;
        } else {
            u = {std::clamp((params.C * v * v + friction_force(params)) /
                                params.lumped_ratio(gear),
                            params.T_min, params.T_max),
                 params.Fb_min};
        }
        ws.x_traj.push_back(step_dynamics(ws.x_traj.back(), {u.T, u.Fb, gear}, params));
        ws.u_traj.push_back(u);
        return ws;
    }

    void dfs(GearSchedule& partial, const MpcSolution* parent_bound) {
        const int depth = partial.horizon();
        if (depth == N) {
            if (budget_left()) evaluate_leaf(partial);
            return;
        }
        const int prev = depth == 0 ? 0 : partial[depth - 1];
        for (int gear = 1; gear <= params.n_gears; ++gear) {
            if (!gear_admissible(gear, depth, prev)) continue;
            if (config.prune_by_speed_reachability &&
                !stage_reachable(x0.v, depth, gear, params)) {
                ++result.pruned_reachability;
                continue;
            }
            partial.gears.push_back(gear);
            bool explore = true;
            MpcSolution node_bound;
            const MpcSolution* child_bound = nullptr;
            if (bounds_valid && partial.horizon() < N) {
                if (!budget_left()) {
                    partial.gears.pop_back();
                    return;
                }
                WarmStart warm;
                const WarmStart* warm_ptr = nullptr;
                if (parent_bound != nullptr && parent_bound->status == SolveStatus::Optimal) {
                    warm = extend_warm(*parent_bound, gear);
                    warm_ptr = &warm;
                }
                const double lb = bound(partial, warm_ptr, &node_bound);
                // Back the bound value off by a small margin before pruning
                // so solver round-off cannot discard the exhaustive winner.
                const double guarded = lb - 1e-7 * std::max(1.0, std::abs(lb));
                if (!improves(guarded, best_cost)) {
                    ++result.pruned_bound;
                    explore = false;
                } else {
                    child_bound = &node_bound;
                }
            }
            if (explore) dfs(partial, child_bound);
            partial.gears.pop_back();
            if (result.budget_exhausted) return;
        }
    }
};

}  // namespace

std::vector<GearSchedule> enumerate_gear_sequences(std::optional<int> j_start, int N,
                                                   bool enforce_first_gear_continuity) {
    if (N < 1) throw std::invalid_argument("horizon must be at least 1");
    std::vector<GearSchedule> out;
    GearSchedule current;
    current.gears.reserve(static_cast<std::size_t>(N));
    const int n_gears = 6;
    auto recurse = [&](auto&& self, int depth) -> void {
        if (depth == N) {
            out.push_back(current);
            return;
        }
        for (int gear = 1; gear <= n_gears; ++gear) {
            if (depth == 0) {
                if (enforce_first_gear_continuity && j_start && std::abs(gear - *j_start) > 1)
                    continue;
            } else if (std::abs(gear - current.gears.back()) > 1) {
                continue;
            }
            current.gears.push_back(gear);
            self(self, depth + 1);
            current.gears.pop_back();
        }
    };
    recurse(recurse, 0);
    return out;
}

MinlpResult solve_minlp(const State& x0, const std::vector<State>& x_ref, int N,
                        const GearSearchConfig& config, const VehicleParams& params,
                        double beta, const Eigen::Matrix2d& Q, std::optional<int> j_start,
                        const SqpOptions& nlp_options) {
    if (N < 1) throw std::invalid_argument("horizon must be at least 1");
    if (static_cast<int>(x_ref.size()) < N + 1)
        throw std::invalid_argument("reference window too short for the horizon");
    if (config.leaf_budget < 1) throw std::invalid_argument("leaf budget must be at least 1");

    const auto t0 = std::chrono::steady_clock::now();
    // Truncated-prefix bounding needs nonnegative stage costs.
    const bool bounds_valid =
        params.c0 >= 0.0 && params.c1 >= 0.0 && params.c2 >= 0.0 && params.T_min >= 0.0;

    Search search{x0, x_ref, N,           config,      params, beta,
                  Q,  nlp_options, bounds_valid, j_start};
    search.result.solution.status = SolveStatus::Infeasible;
    search.result.solution.cost = kInf;

    if (config.mode == SearchMode::Exhaustive) {
        for (const GearSchedule& gears :
             enumerate_gear_sequences(j_start, N, config.enforce_first_gear_continuity)) {
            if (config.prune_by_speed_reachability) {
                bool reachable = true;
                for (int i = 0; i < N && reachable; ++i)
                    reachable = stage_reachable(x0.v, i, gears[i], params);
                if (!reachable) {
                    ++search.result.pruned_reachability;
                    continue;
                }
            }
            if (!search.budget_left()) break;
            search.evaluate_leaf(gears);
        }
    } else {
        GearSchedule partial;
        search.dfs(partial, nullptr);
    }

    search.result.total_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return search.result;
}

}  // namespace gearmpc
