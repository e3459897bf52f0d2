#include "bundlechoice/optimizer.hpp"

#include <cmath>
#include <limits>

namespace bundlechoice {

namespace {

double guarded_eval(const Objective& f, std::span<const double> x) {
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

}  // namespace

DEConfig de_default_config(int dimension, double bound, std::uint64_t seed) {
    DEConfig cfg;
    cfg.population_size = 10 * dimension;
    cfg.lower.assign(dimension, -bound);
    cfg.upper.assign(dimension, bound);
    cfg.seed = seed;
    return cfg;
}

DEResult de_minimize(const Objective& objective, const DEConfig& config) {
    const int dim = static_cast<int>(config.lower.size());
    if (dim == 0) throw ConfigError("de_minimize: empty bounds");
    if (config.upper.size() != config.lower.size())
        throw ConfigError("de_minimize: bounds length mismatch");
    for (int j = 0; j < dim; ++j)
        if (!(config.lower[j] < config.upper[j]))
            throw ConfigError("de_minimize: need lower < upper per dimension");
    const int np = config.population_size > 0 ? config.population_size : 10 * dim;
    if (np < 4) throw ConfigError("de_minimize: population must be at least 4");

    Rng rng(config.seed);
    Matrix pop(np, dim);
    std::vector<double> cost(np);
    for (int i = 0; i < np; ++i) {
        for (int j = 0; j < dim; ++j)
            pop(i, j) = config.lower[j] + rng.uniform() * (config.upper[j] - config.lower[j]);
        cost[i] = guarded_eval(objective, pop.row(i));
    }

    int best = 0;
    for (int i = 1; i < np; ++i)
        if (cost[i] < cost[best]) best = i;
    if (!std::isfinite(cost[best]))
        throw EstimationError("de_minimize: objective non-finite on the whole initial population");

    DEResult result;
    result.best_history.reserve(config.max_generations);
    std::vector<double> trial(dim);
    double last_best = cost[best];
    int stall = 0;
    int gen = 0;

    for (; gen < config.max_generations; ++gen) {
        for (int i = 0; i < np; ++i) {
            int r1, r2, r3;
            do { r1 = rng.uniform_int(np); } while (r1 == i);
            do { r2 = rng.uniform_int(np); } while (r2 == i || r2 == r1);
            do { r3 = rng.uniform_int(np); } while (r3 == i || r3 == r1 || r3 == r2);
            const int j_rand = rng.uniform_int(dim);
            for (int j = 0; j < dim; ++j) {
                if (j == j_rand || rng.uniform() < config.crossover) {
                    double v = pop(r1, j) + config.weight * (pop(r2, j) - pop(r3, j));
                    if (v < config.lower[j]) v = config.lower[j];
                    if (v > config.upper[j]) v = config.upper[j];
                    trial[j] = v;
                } else {
                    trial[j] = pop(i, j);
                }
            }
            const double c = guarded_eval(objective, trial);
            if (c <= cost[i]) {
                for (int j = 0; j < dim; ++j) pop(i, j) = trial[j];
                cost[i] = c;
                if (c < cost[best]) best = i;
            }
        }
        result.best_history.push_back(cost[best]);
        if (config.stall_generations > 0) {
            if (last_best - cost[best] <= config.tolerance) {
                if (++stall >= config.stall_generations) { ++gen; break; }
            } else {
                stall = 0;
            }
            last_best = cost[best];
        }
    }

    result.argmin.assign(pop.row(best).begin(), pop.row(best).end());
    result.min_value = cost[best];
    result.generations_used = gen;
    return result;
}

}  // namespace bundlechoice
