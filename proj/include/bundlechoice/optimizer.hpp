#pragma once

#include <functional>
#include <span>
#include <vector>

#include "bundlechoice/common.hpp"

namespace bundlechoice {

// Differential evolution (DE/rand/1/bin) for the non-smooth, piecewise
// constant criterion functions. Out-of-box mutants are clipped to the bounds.

struct DEConfig {
    int population_size = 0;  // 0 -> 10 * dimension
    double weight = 0.8;      // F
    double crossover = 0.9;   // CR
    int max_generations = 300;
    std::vector<double> lower;
    std::vector<double> upper;
    std::uint64_t seed = 0;
    // Early stop when the best value fails to improve by more than `tolerance`
    // for `stall_generations` consecutive generations; 0 disables.
    double tolerance = 0.0;
    int stall_generations = 0;
};

struct DEResult {
    std::vector<double> argmin;
    double min_value = 0.0;
    int generations_used = 0;
    std::vector<double> best_history;  // best value after each generation
};

using Objective = std::function<double(std::span<const double>)>;

DEResult de_minimize(const Objective& objective, const DEConfig& config);

// convenience: symmetric box [-bound, bound]^dim
DEConfig de_default_config(int dimension, double bound = 10.0, std::uint64_t seed = 0);

}  // namespace bundlechoice
