#include "bundlechoice/panel_ms.hpp"

#include <chrono>
#include <cmath>

#include "bundlechoice/detail/sign_cache.hpp"

namespace bundlechoice {

namespace {

using detail::SignCache;
using detail::SignCacheBuilder;

inline int pm(int bit) { return bit == 0 ? 1 : -1; }

// the matched quantity is the within-agent change, so sigma_hat is the sample
// sd of the period differences of the column
double difference_column_sd(const PanelDataset& data, const Matrix& m, int j) {
    std::vector<double> diffs;
    diffs.reserve(static_cast<std::size_t>(data.n) * data.t_periods * (data.t_periods - 1) / 2);
    for (int i = 0; i < data.n; ++i)
        for (int t = 1; t < data.t_periods; ++t)
            for (int s = 0; s < t; ++s)
                diffs.push_back(m(data.row(i, t), j) - m(data.row(i, s), j));
    return sample_sd(diffs);
}

// product kernel over the within-agent differences of one matching block
double block_weight(const Matrix& mat, const std::vector<std::uint8_t>& discrete, int rt, int rs,
                    std::span<const double> bw, int order) {
    double weight = 1.0;
    for (int j = 0; j < mat.cols(); ++j) {
        const double a = mat(rt, j), b = mat(rs, j);
        if (discrete[j]) {
            if (a != b) return 0.0;
        } else {
            weight *= gaussian_kernel(order, (a - b) / bw[j]) / bw[j];
        }
    }
    return weight;
}

SignCache build_stage1(const PanelDataset& data, const PanelMSBandwidths& bw, int order,
                       double prune_ratio) {
    const int k1 = data.k1();
    SignCacheBuilder builder(k1);
    std::vector<double> diff(k1);
    long switchers = 0;
    for (int i = 0; i < data.n; ++i) {
        bool used = false;
        for (int t = 1; t < data.t_periods; ++t) {
            for (int s = 0; s < t; ++s) {
                const int rt = data.row(i, t), rs = data.row(i, s);
                const ChoiceOutcome ct = data.choice[rt], cs = data.choice[rs];
                const int s1 = pm(cs.d1) - pm(ct.d1);
                const int s2 = pm(cs.d2) - pm(ct.d2);
                if (s1 == 0 && s2 == 0) continue;
                if (s1 != 0) {
                    const double w2b = block_weight(data.x2, data.x_discrete, rt, rs, bw.x2, order) *
                                       block_weight(data.w, data.w_discrete, rt, rs, bw.w, order);
                    if (w2b != 0.0) {
                        for (int j = 0; j < k1; ++j) diff[j] = data.x1(rt, j) - data.x1(rs, j);
                        builder.add(w2b * s1, diff);
                        used = true;
                    }
                }
                if (s2 != 0) {
                    const double w1b = block_weight(data.x1, data.x_discrete, rt, rs, bw.x1, order) *
                                       block_weight(data.w, data.w_discrete, rt, rs, bw.w, order);
                    if (w1b != 0.0) {
                        for (int j = 0; j < k1; ++j) diff[j] = data.x2(rt, j) - data.x2(rs, j);
                        builder.add(w1b * s2, diff);
                        used = true;
                    }
                }
            }
        }
        switchers += used;
    }
    SignCache cache = builder.finalize(prune_ratio);
    cache.contributing_units = switchers;
    return cache;
}

SignCache build_stage2(const PanelDataset& data, const PanelMSBandwidths& bw, int order,
                       double prune_ratio) {
    const int k2 = data.k2();
    SignCacheBuilder builder(k2);
    std::vector<double> diff(k2);
    long switchers = 0;
    for (int i = 0; i < data.n; ++i) {
        bool used = false;
        for (int t = 1; t < data.t_periods; ++t) {
            for (int s = 0; s < t; ++s) {
                const int rt = data.row(i, t), rs = data.row(i, s);
                const int dy = (data.choice[rt] == ChoiceOutcome{1, 1}) -
                               (data.choice[rs] == ChoiceOutcome{1, 1});
                if (dy == 0) continue;
                const double weight =
                    block_weight(data.x1, data.x_discrete, rt, rs, bw.x1, order) *
                    block_weight(data.x2, data.x_discrete, rt, rs, bw.x2, order);
                if (weight == 0.0) continue;
                for (int j = 0; j < k2; ++j) diff[j] = data.w(rt, j) - data.w(rs, j);
                builder.add(weight * dy, diff);
                used = true;
            }
        }
        switchers += used;
    }
    SignCache cache = builder.finalize(prune_ratio);
    cache.contributing_units = switchers;
    return cache;
}

void check_normalized(std::span<const double> v, const char* what) {
    if (v.empty() || v[0] != 1.0)
        throw InputError(std::string(what) + ": first coordinate must be normalized to 1");
}

std::vector<double> maximize_cache(const SignCache& cache, const PanelMSConfig& cfg, int dim,
                                   std::uint64_t seed, bool bootstrap_run) {
    if (dim == 0) return {};
    DEConfig de = cfg.de;
    if (de.lower.empty()) {
        de.lower.assign(dim, -cfg.search_bound);
        de.upper.assign(dim, cfg.search_bound);
    }
    if (de.population_size <= 0) de.population_size = 10 * dim;
    if (bootstrap_run && cfg.bootstrap_de_generations > 0)
        de.max_generations = cfg.bootstrap_de_generations;
    de.seed = seed;
    const DEResult res =
        de_minimize([&cache](std::span<const double> f) { return -cache.eval_sign(f); }, de);
    return res.argmin;
}

PanelMSBandwidths uniform_bandwidths(const PanelDataset& data, double h) {
    PanelMSBandwidths bw;
    bw.x1.assign(data.k1(), h);
    bw.x2.assign(data.k1(), h);
    bw.w.assign(data.k2(), h);
    return bw;
}

}  // namespace

PanelMSBandwidths panel_ms_bandwidths(const PanelDataset& data, const PanelMSConfig& cfg) {
    const BandwidthSpec rule{cfg.c3, BandwidthRule::panel};
    PanelMSBandwidths bw;
    auto fill = [&](const Matrix& m, const std::vector<std::uint8_t>& discrete,
                    std::vector<double>& out) {
        out.assign(m.cols(), 0.0);
        for (int j = 0; j < m.cols(); ++j) {
            if (discrete[j]) continue;
            const double sd = difference_column_sd(data, m, j);
            if (!(sd > 0.0))
                throw EstimationError("panel_ms_bandwidths: zero-variance matching column");
            out[j] = bandwidth(data.n, sd, rule);
        }
    };
    fill(data.x1, data.x_discrete, bw.x1);
    fill(data.x2, data.x_discrete, bw.x2);
    fill(data.w, data.w_discrete, bw.w);
    return bw;
}

double ms_beta_objective(const PanelDataset& data, std::span<const double> b, double h,
                         const PanelMSConfig& cfg) {
    if (data.t_periods < 2) throw InputError("ms_beta_objective: need at least two periods");
    if (!(h > 0.0)) throw InputError("ms_beta_objective: bandwidth must be positive");
    check_normalized(b, "ms_beta_objective");
    const SignCache cache =
        build_stage1(data, uniform_bandwidths(data, h), cfg.kernel_order, 0.0);
    return cache.eval_sign(b.subspan(1));
}

double ms_gamma_objective(const PanelDataset& data, std::span<const double> r, double sigma,
                          const PanelMSConfig& cfg) {
    if (!(sigma > 0.0)) throw InputError("ms_gamma_objective: bandwidth must be positive");
    check_normalized(r, "ms_gamma_objective");
    const SignCache cache =
        build_stage2(data, uniform_bandwidths(data, sigma), cfg.kernel_order, 0.0);
    return cache.eval_sign(r.subspan(1));
}

EstimationResult estimate_panel_ms(const PanelDataset& data, const PanelMSConfig& cfg,
                                   std::uint64_t seed) {
    if (data.n < 1 || data.t_periods < 2)
        throw InputError("estimate_panel_ms: need agents observed in at least two periods");
    const auto t0 = std::chrono::steady_clock::now();
    const PanelMSBandwidths bw = panel_ms_bandwidths(data, cfg);

    SignCache cache1 = build_stage1(data, bw, cfg.kernel_order, cfg.prune_ratio);
    if (cache1.empty())
        throw EstimationError("estimate_panel_ms: stage-1 criterion identically zero (no "
                              "switchers with positive matching weight)");
    const std::vector<double> b_free = maximize_cache(
        cache1, cfg, data.k1() - 1, derive_seed(seed, 0, SeedPurpose::de_stage1), false);
    std::vector<double> beta{1.0};
    beta.insert(beta.end(), b_free.begin(), b_free.end());

    SignCache cache2 = build_stage2(data, bw, cfg.kernel_order, cfg.prune_ratio);
    if (cache2.empty())
        throw EstimationError("estimate_panel_ms: stage-2 criterion identically zero (no bundle "
                              "switchers with positive matching weight)");
    const std::vector<double> r_free = maximize_cache(
        cache2, cfg, data.k2() - 1, derive_seed(seed, 0, SeedPurpose::de_stage2), false);
    std::vector<double> gamma{1.0};
    gamma.insert(gamma.end(), r_free.begin(), r_free.end());

    EstimationResult res;
    res.estimate.beta = beta;
    res.estimate.gamma = gamma;
    for (int j = 2; j <= data.k1(); ++j) res.free_names.push_back("beta_" + std::to_string(j));
    for (int j = 2; j <= data.k2(); ++j) res.free_names.push_back("gamma_" + std::to_string(j));
    res.free_values.assign(beta.begin() + 1, beta.end());
    res.free_values.insert(res.free_values.end(), gamma.begin() + 1, gamma.end());
    res.stage1_criterion = cache1.eval_sign(b_free);
    res.stage2_criterion = cache2.eval_sign(r_free);
    res.bandwidths_stage1 = bw.x1;
    res.bandwidths_stage1.insert(res.bandwidths_stage1.end(), bw.x2.begin(), bw.x2.end());
    res.bandwidths_stage1.insert(res.bandwidths_stage1.end(), bw.w.begin(), bw.w.end());
    res.bandwidths_stage2 = res.bandwidths_stage1;  // shared h_N = sigma_N rule
    res.switchers_stage1 = cache1.contributing_units;
    res.switchers_stage2 = cache2.contributing_units;
    res.seed = seed;
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

std::array<double, 2> numerical_bootstrap_epsilons(int n_agents, int k1, int k2,
                                                   const NumericalBootstrapSpec& nb) {
    if (nb.epsilon1 > 0.0 && nb.epsilon2 > 0.0) return {nb.epsilon1, nb.epsilon2};
    const double n = static_cast<double>(n_agents);
    const double ln = std::log(n);
    if (nb.rule == EpsilonRule::section4) {
        const double eps = nb.c4 * std::pow(n, -5.0 / 7.0) * std::pow(ln, -5.0 / 14.0);
        return {eps, eps};
    }
    const double kk = static_cast<double>(k1 + k2);
    const double e1 = nb.c4 * std::pow(n, -(kk + 2.0) / (kk + 3.0)) *
                      std::pow(ln, -kk / (2.0 * kk + 6.0));
    const double e2 = nb.c4 * std::pow(n, -(2.0 * k1 + 2.0) / (2.0 * k1 + 3.0)) *
                      std::pow(ln, -static_cast<double>(k1) / (2.0 * k1 + 3.0));
    return {e1, e2};
}

namespace {

// perturbed objective: (1 - lambda)/N * (base(b) - base(hat)) + lambda/N * (star(b) - star(hat))
struct PerturbedObjective {
    const SignCache* base;
    const SignCache* star;
    double base_offset, star_offset, lambda;
    int n;

    double operator()(std::span<const double> f) const {
        const double base_part = base->eval_indicator(f) - base_offset;
        const double star_part = star->eval_indicator(f) - star_offset;
        return ((1.0 - lambda) * base_part + lambda * star_part) / n;
    }
};

}  // namespace

EstimationResult numerical_bootstrap(const PanelDataset& data, const PanelMSConfig& cfg,
                                     const NumericalBootstrapSpec& nb,
                                     const EstimationResult& point, int b_draws,
                                     std::uint64_t seed) {
    if (b_draws < 2) throw InputError("numerical_bootstrap: need B >= 2");
    const auto eps = numerical_bootstrap_epsilons(data.n, data.k1(), data.k2(), nb);
    const double lambda1 = std::sqrt(data.n * eps[0]);
    const double lambda2 = std::sqrt(data.n * eps[1]);

    const PanelMSBandwidths bw = panel_ms_bandwidths(data, cfg);
    const SignCache base1 = build_stage1(data, bw, cfg.kernel_order, cfg.prune_ratio);
    const SignCache base2 = build_stage2(data, bw, cfg.kernel_order, cfg.prune_ratio);
    const std::span<const double> beta_free(point.estimate.beta.data() + 1, data.k1() - 1);
    const std::span<const double> gamma_free(point.estimate.gamma.data() + 1, data.k2() - 1);
    const double off1 = base1.eval_indicator(beta_free);
    const double off2 = base2.eval_indicator(gamma_free);

    EstimationResult res = point;
    res.epsilon1 = eps[0];
    res.epsilon2 = eps[1];
    const int free1 = data.k1() - 1;
    const int n_free = static_cast<int>(point.free_values.size());

    std::vector<std::vector<double>> draws;
    draws.reserve(b_draws);
    for (int b = 0; b < b_draws; ++b) {
        const std::uint64_t draw_seed = derive_seed(seed, 3000 + b, SeedPurpose::bootstrap);
        const PanelDataset star = resample(data, draw_seed);
        try {
            const SignCache star1 = build_stage1(star, bw, cfg.kernel_order, cfg.prune_ratio);
            const SignCache star2 = build_stage2(star, bw, cfg.kernel_order, cfg.prune_ratio);
            if (star1.flat() || star2.flat())
                throw EstimationError("degenerate resample");

            std::vector<double> row;
            row.reserve(n_free);
            if (free1 > 0) {
                DEConfig de = cfg.de;
                if (de.lower.empty()) {
                    de.lower.assign(free1, -cfg.search_bound);
                    de.upper.assign(free1, cfg.search_bound);
                }
                if (de.population_size <= 0) de.population_size = 10 * free1;
                if (cfg.bootstrap_de_generations > 0)
                    de.max_generations = cfg.bootstrap_de_generations;
                de.seed = derive_seed(draw_seed, 1, SeedPurpose::de_stage1);
                const PerturbedObjective obj{&base1, &star1, off1,
                                             star1.eval_indicator(beta_free), lambda1, data.n};
                const DEResult r = de_minimize(
                    [&obj](std::span<const double> f) { return -obj(f); }, de);
                row.insert(row.end(), r.argmin.begin(), r.argmin.end());
            }
            if (const int free2 = data.k2() - 1; free2 > 0) {
                DEConfig de = cfg.de;
                if (de.lower.empty()) {
                    de.lower.assign(free2, -cfg.search_bound);
                    de.upper.assign(free2, cfg.search_bound);
                }
                if (de.population_size <= 0) de.population_size = 10 * free2;
                if (cfg.bootstrap_de_generations > 0)
                    de.max_generations = cfg.bootstrap_de_generations;
                de.seed = derive_seed(draw_seed, 2, SeedPurpose::de_stage2);
                const PerturbedObjective obj{&base2, &star2, off2,
                                             star2.eval_indicator(gamma_free), lambda2, data.n};
                const DEResult r = de_minimize(
                    [&obj](std::span<const double> f) { return -obj(f); }, de);
                row.insert(row.end(), r.argmin.begin(), r.argmin.end());
            }
            draws.push_back(std::move(row));
        } catch (const EstimationError&) {
            ++res.excluded_draws;
        }
    }
    if (static_cast<int>(draws.size()) < 2)
        throw EstimationError("numerical_bootstrap: fewer than two usable draws");

    res.bootstrap_draws = Matrix(static_cast<int>(draws.size()), n_free);
    for (int b = 0; b < res.bootstrap_draws.rows(); ++b)
        for (int j = 0; j < n_free; ++j) res.bootstrap_draws(b, j) = draws[b][j];
    res.ci.resize(n_free);
    std::vector<double> col(draws.size());
    for (int j = 0; j < n_free; ++j) {
        for (std::size_t b = 0; b < draws.size(); ++b) col[b] = draws[b][j];
        res.ci[j] = percentile_ci(col);
    }
    return res;
}

double numerical_bootstrap_objective_beta(const PanelDataset& data, const PanelMSConfig& cfg,
                                          double epsilon, const EstimationResult& point,
                                          std::uint64_t resample_seed,
                                          std::span<const double> free) {
    const PanelMSBandwidths bw = panel_ms_bandwidths(data, cfg);
    const SignCache base = build_stage1(data, bw, cfg.kernel_order, cfg.prune_ratio);
    const PanelDataset star_data = resample(data, resample_seed);
    const SignCache star = build_stage1(star_data, bw, cfg.kernel_order, cfg.prune_ratio);
    const std::span<const double> beta_free(point.estimate.beta.data() + 1, data.k1() - 1);
    const PerturbedObjective obj{&base, &star, base.eval_indicator(beta_free),
                                 star.eval_indicator(beta_free), std::sqrt(data.n * epsilon),
                                 data.n};
    return obj(free);
}

double classic_bootstrap_objective_beta(const PanelDataset& data, const PanelMSConfig& cfg,
                                        const EstimationResult& point,
                                        std::uint64_t resample_seed,
                                        std::span<const double> free) {
    const PanelMSBandwidths bw = panel_ms_bandwidths(data, cfg);
    const PanelDataset star_data = resample(data, resample_seed);
    const SignCache star = build_stage1(star_data, bw, cfg.kernel_order, cfg.prune_ratio);
    const std::span<const double> beta_free(point.estimate.beta.data() + 1, data.k1() - 1);
    return (star.eval_indicator(free) - star.eval_indicator(beta_free)) / data.n;
}

namespace {

EtaTestResult eta_test_panel_impl(const PanelDataset& data, const ParamVector& estimates,
                                  const PanelMSBandwidths& bw, int kernel_order, int b_draws,
                                  std::uint64_t seed) {
    check_normalized(estimates.gamma, "eta_test_panel gamma");
    if (b_draws < 2) throw InputError("eta_test_panel: need B >= 2");
    std::vector<double> contrib(data.n, 0.0);
    for (int i = 0; i < data.n; ++i) {
        for (int t = 1; t < data.t_periods; ++t)
            for (int s = 0; s < t; ++s) {
                const int rt = data.row(i, t), rs = data.row(i, s);
                const int dy = (data.choice[rt] == ChoiceOutcome{1, 1}) -
                               (data.choice[rs] == ChoiceOutcome{1, 1});
                if (dy == 0) continue;
                const double weight =
                    block_weight(data.x1, data.x_discrete, rt, rs, bw.x1, kernel_order) *
                    block_weight(data.x2, data.x_discrete, rt, rs, bw.x2, kernel_order);
                if (weight == 0.0) continue;
                double idx = 0.0;
                for (int j = 0; j < data.k2(); ++j)
                    idx += (data.w(rt, j) - data.w(rs, j)) * estimates.gamma[j];
                contrib[i] += weight * dy * sign_pm1(idx);
            }
    }
    EtaTestResult out;
    for (double c : contrib) out.statistic += c;
    out.statistic /= data.n;
    out.draws.reserve(b_draws);
    for (int b = 0; b < b_draws; ++b) {
        Rng rng(derive_seed(seed, 4000 + b, SeedPurpose::bootstrap));
        double total = 0.0;
        for (int i = 0; i < data.n; ++i) total += contrib[rng.uniform_int(data.n)];
        out.draws.push_back(total / data.n);
    }
    out.ci_lower_5pct = quantile(out.draws, 0.05);
    out.supports_positive_eta = out.ci_lower_5pct > 0.0;
    return out;
}

}  // namespace

EtaTestResult eta_test_panel(const PanelDataset& data, const ParamVector& estimates,
                             const PanelMSConfig& cfg, int b_draws, std::uint64_t seed) {
    return eta_test_panel_impl(data, estimates, panel_ms_bandwidths(data, cfg), cfg.kernel_order,
                               b_draws, seed);
}

EtaTestResult eta_test_panel(const PanelDataset& data, const ParamVector& estimates, double sigma,
                             int kernel_order, int b_draws, std::uint64_t seed) {
    if (!(sigma > 0.0)) throw InputError("eta_test_panel: bandwidth must be positive");
    return eta_test_panel_impl(data, estimates, uniform_bandwidths(data, sigma), kernel_order,
                               b_draws, seed);
}

}  // namespace bundlechoice
