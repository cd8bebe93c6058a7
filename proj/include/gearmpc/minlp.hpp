#pragma once

#include <optional>
#include <vector>

#include "gearmpc/nlp.hpp"

namespace gearmpc {

enum class SearchMode { Exhaustive, BranchAndBound };

struct GearSearchConfig {
    SearchMode mode = SearchMode::BranchAndBound;
    bool prune_by_speed_reachability = true;
    long leaf_budget = 1000000;  // max NLP solves, leaf and bound combined
    bool enforce_first_gear_continuity = false;
};

struct MinlpResult {
    MpcSolution solution;   // winning fixed-gear solution (infinite cost if none)
    GearSchedule schedule;  // winning schedule (empty if none)
    long nlp_solves = 0;
    bool budget_exhausted = false;
    long pruned_reachability = 0;
    long pruned_bound = 0;
    double total_time = 0.0;  // seconds across the whole search
};

/// Every gear sequence in {1..6}^N obeying the no-skip rule, in lexicographic
/// order. With j_start given and continuity enforced, the first gear is also
/// restricted to within one of j_start.
std::vector<GearSchedule> enumerate_gear_sequences(std::optional<int> j_start, int N,
                                                   bool enforce_first_gear_continuity = false);

/// Exact solver for the speed/gear co-optimization problem: searches the gear
/// sequences satisfying the no-skip constraint with the fixed-gear NLP as leaf
/// evaluator. Ties between equal-cost schedules go to the lexicographically
/// smallest. Exhaustive mode sweeps every sequence; branch-and-bound prunes
/// with truncated-horizon NLP lower bounds and velocity-reachability checks,
/// and returns the same winner.
MinlpResult solve_minlp(const State& x0, const std::vector<State>& x_ref, int N,
                        const GearSearchConfig& config, const VehicleParams& params,
                        double beta, const Eigen::Matrix2d& Q,
                        std::optional<int> j_start = std::nullopt,
                        const SqpOptions& nlp_options = {});

}  // namespace gearmpc
