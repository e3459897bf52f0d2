#include "bundlechoice/mrc.hpp"

#include <chrono>
#include <cmath>

#include "bundlechoice/detail/sign_cache.hpp"

namespace bundlechoice {

namespace {

using detail::SignCache;
using detail::SignCacheBuilder;

double column_sd(const Matrix& m, int j) {
    std::vector<double> col(m.rows());
    for (int i = 0; i < m.rows(); ++i) col[i] = m(i, j);
    return sample_sd(col);
}

// (-1)^{d1} summed against the two observations' outcomes
inline int sign_sum(int di, int dm) {
    return (dm == 0 ? 1 : -1) - (di == 0 ? 1 : -1);  // in {-2, 0, 2}
}

// product kernel over one matching block (x_other, w) with per-column
// bandwidths; discrete columns must match exactly
double pair_block_weight(const CrossSectionDataset& data, const Matrix& x_other, int i, int m,
                         std::span<const double> x_bw, std::span<const double> w_bw, int order) {
    double weight = 1.0;
    for (int j = 0; j < data.k1(); ++j) {
        const double a = x_other(i, j), b = x_other(m, j);
        if (data.x_discrete[j]) {
            if (a != b) return 0.0;
        } else {
            weight *= gaussian_kernel(order, (a - b) / x_bw[j]) / x_bw[j];
        }
    }
    for (int j = 0; j < data.k2(); ++j) {
        const double a = data.w(i, j), b = data.w(m, j);
        if (data.w_discrete[j]) {
            if (a != b) return 0.0;
        } else {
            weight *= gaussian_kernel(order, (a - b) / w_bw[j]) / w_bw[j];
        }
    }
    return weight;
}

SignCache build_stage1_cache(const CrossSectionDataset& data, std::span<const double> x1_bw,
                             std::span<const double> x2_bw, std::span<const double> w_bw,
                             int order, double prune_ratio) {
    const int k1 = data.k1();
    SignCacheBuilder builder(k1);
    std::vector<double> diff(k1);
    long contributing = 0;
    for (int i = 0; i < data.n - 1; ++i) {
        for (int m = i + 1; m < data.n; ++m) {
            const ChoiceOutcome ci = data.choice[i], cm = data.choice[m];
            const int s1 = sign_sum(ci.d1, cm.d1);
            const int s2 = sign_sum(ci.d2, cm.d2);
            if (s1 == 0 && s2 == 0) continue;
            bool used = false;
            if (s1 != 0) {
                const double w = pair_block_weight(data, data.x2, i, m, x2_bw, w_bw, order);
                if (w != 0.0) {
                    for (int j = 0; j < k1; ++j) diff[j] = data.x1(i, j) - data.x1(m, j);
                    builder.add(w * s1, diff);
                    used = true;
                }
            }
            if (s2 != 0) {
                const double w = pair_block_weight(data, data.x1, i, m, x1_bw, w_bw, order);
                if (w != 0.0) {
                    for (int j = 0; j < k1; ++j) diff[j] = data.x2(i, j) - data.x2(m, j);
                    builder.add(w * s2, diff);
                    used = true;
                }
            }
            contributing += used;
        }
    }
    SignCache cache = builder.finalize(prune_ratio);
    cache.contributing_units = contributing;
    return cache;
}

std::vector<double> fitted_index(const CrossSectionDataset& data, const Matrix& x,
                                 std::span<const double> beta) {
    std::vector<double> v(data.n);
    for (int i = 0; i < data.n; ++i) v[i] = dot(x.row(i), beta);
    return v;
}

SignCache build_stage2_cache(const CrossSectionDataset& data, std::span<const double> beta_hat,
                             double sigma1, double sigma2, int order, double prune_ratio) {
    const int k2 = data.k2();
    SignCacheBuilder builder(k2);
    const std::vector<double> v1 = fitted_index(data, data.x1, beta_hat);
    const std::vector<double> v2 = fitted_index(data, data.x2, beta_hat);
    std::vector<double> diff(k2);
    long contributing = 0;
    for (int i = 0; i < data.n - 1; ++i) {
        for (int m = i + 1; m < data.n; ++m) {
            const int dy = (data.choice[i] == ChoiceOutcome{1, 1}) -
                           (data.choice[m] == ChoiceOutcome{1, 1});
            if (dy == 0) continue;
            const double weight = gaussian_kernel(order, (v1[i] - v1[m]) / sigma1) / sigma1 *
                                  gaussian_kernel(order, (v2[i] - v2[m]) / sigma2) / sigma2;
            if (weight == 0.0) continue;
            for (int j = 0; j < k2; ++j) diff[j] = data.w(i, j) - data.w(m, j);
            builder.add(weight * dy, diff);
            ++contributing;
        }
    }
    SignCache cache = builder.finalize(prune_ratio);
    cache.contributing_units = contributing;
    return cache;
}

void check_normalized(std::span<const double> v, const char* what) {
    if (v.empty() || v[0] != 1.0)
        throw InputError(std::string(what) + ": first coordinate must be normalized to 1");
}

DEConfig stage_de_config(const MRCConfig& cfg, int dim, std::uint64_t seed, bool bootstrap_run) {
    DEConfig de = cfg.de;
    if (de.lower.empty()) {
        de.lower.assign(dim, -cfg.search_bound);
        de.upper.assign(dim, cfg.search_bound);
    }
    if (de.population_size <= 0) de.population_size = 10 * dim;
    if (bootstrap_run && cfg.bootstrap_de_generations > 0)
        de.max_generations = cfg.bootstrap_de_generations;
    de.seed = seed;
    return de;
}

// maximizes the cached criterion over the free coordinates; empty result for
// dimension zero
std::vector<double> maximize_cache(const SignCache& cache, const MRCConfig& cfg, int dim,
                                   std::uint64_t seed, bool bootstrap_run) {
    if (dim == 0) return {};
    const DEConfig de = stage_de_config(cfg, dim, seed, bootstrap_run);
    const DEResult res = de_minimize(
        [&cache](std::span<const double> f) { return -cache.eval_sign(f); }, de);
    return res.argmin;
}

std::vector<std::string> mrc_free_names(int k1, int k2) {
    std::vector<std::string> names;
    for (int j = 2; j <= k1; ++j) names.push_back("beta_" + std::to_string(j));
    for (int j = 2; j <= k2; ++j) names.push_back("gamma_" + std::to_string(j));
    return names;
}

}  // namespace

MRCBandwidths mrc_bandwidths(const CrossSectionDataset& data, const MRCConfig& cfg,
                             std::span<const double> beta_hat) {
    MRCBandwidths bw;
    const BandwidthSpec stage1{cfg.c1, BandwidthRule::cross_stage1};
    auto fill = [&](const Matrix& m, const std::vector<std::uint8_t>& discrete,
                    std::vector<double>& out) {
        out.assign(m.cols(), 0.0);
        for (int j = 0; j < m.cols(); ++j) {
            if (discrete[j]) continue;
            const double sd = column_sd(m, j);
            if (!(sd > 0.0))
                throw EstimationError("mrc_bandwidths: zero-variance continuous matching column");
            out[j] = bandwidth(data.n, sd, stage1);
        }
    };
    fill(data.x1, data.x_discrete, bw.x1);
    fill(data.x2, data.x_discrete, bw.x2);
    fill(data.w, data.w_discrete, bw.w);

    if (!beta_hat.empty()) {
        const BandwidthSpec stage2{cfg.c2, BandwidthRule::cross_stage2};
        const std::vector<double> v1 = fitted_index(data, data.x1, beta_hat);
        const std::vector<double> v2 = fitted_index(data, data.x2, beta_hat);
        const double sd1 = sample_sd(v1), sd2 = sample_sd(v2);
        if (!(sd1 > 0.0) || !(sd2 > 0.0))
            throw EstimationError("mrc_bandwidths: fitted indexes have zero variance");
        bw.sigma1 = bandwidth(data.n, sd1, stage2);
        bw.sigma2 = bandwidth(data.n, sd2, stage2);
    }
    return bw;
}

double mrc_beta_objective(const CrossSectionDataset& data, std::span<const double> b, double h,
                          const MRCConfig& cfg) {
    if (data.n < 2) throw InputError("mrc_beta_objective: need at least two observations");
    if (!(h > 0.0)) throw InputError("mrc_beta_objective: bandwidth must be positive");
    check_normalized(b, "mrc_beta_objective");
    const std::vector<double> x_bw(data.k1(), h), w_bw(data.k2(), h);
    const SignCache cache =
        build_stage1_cache(data, x_bw, x_bw, w_bw, cfg.stage1_kernel_order, 0.0);
    return cache.eval_sign(b.subspan(1));
}

double mrc_gamma_objective(const CrossSectionDataset& data, std::span<const double> r,
                           std::span<const double> beta_hat, double sigma, const MRCConfig& cfg) {
    if (!(sigma > 0.0)) throw InputError("mrc_gamma_objective: bandwidth must be positive");
    check_normalized(r, "mrc_gamma_objective");
    check_normalized(beta_hat, "mrc_gamma_objective beta_hat");
    const SignCache cache =
        build_stage2_cache(data, beta_hat, sigma, sigma, cfg.stage2_kernel_order, 0.0);
    return cache.eval_sign(r.subspan(1));
}

EstimationResult estimate_mrc(const CrossSectionDataset& data, const MRCConfig& cfg,
                              std::uint64_t seed) {
    if (data.n < 2) throw InputError("estimate_mrc: need at least two observations");
    const auto t0 = std::chrono::steady_clock::now();
    MRCBandwidths bw = mrc_bandwidths(data, cfg, {});
    SignCache cache1 =
        build_stage1_cache(data, bw.x1, bw.x2, bw.w, cfg.stage1_kernel_order, cfg.prune_ratio);
    if (cache1.empty())
        throw EstimationError(
            "estimate_mrc: stage-1 criterion identically zero (no pairs with differing choices "
            "and positive matching weight)");
    const std::vector<double> b_free = maximize_cache(
        cache1, cfg, data.k1() - 1, derive_seed(seed, 0, SeedPurpose::de_stage1), false);
    std::vector<double> beta{1.0};
    beta.insert(beta.end(), b_free.begin(), b_free.end());

    const MRCBandwidths bw2 = mrc_bandwidths(data, cfg, beta);
    SignCache cache2 = build_stage2_cache(data, beta, bw2.sigma1, bw2.sigma2,
                                          cfg.stage2_kernel_order, cfg.prune_ratio);
    if (cache2.empty())
        throw EstimationError(
            "estimate_mrc: stage-2 criterion identically zero (no variation in bundle choices "
            "near matched indexes)");
    const std::vector<double> r_free = maximize_cache(
        cache2, cfg, data.k2() - 1, derive_seed(seed, 0, SeedPurpose::de_stage2), false);
    std::vector<double> gamma{1.0};
    gamma.insert(gamma.end(), r_free.begin(), r_free.end());

    EstimationResult res;
    res.estimate.beta = beta;
    res.estimate.gamma = gamma;
    res.free_names = mrc_free_names(data.k1(), data.k2());
    res.free_values.assign(beta.begin() + 1, beta.end());
    res.free_values.insert(res.free_values.end(), gamma.begin() + 1, gamma.end());
    res.stage1_criterion = cache1.eval_sign(b_free);
    res.stage2_criterion = cache2.eval_sign(r_free);
    res.bandwidths_stage1 = bw.x1;
    res.bandwidths_stage1.insert(res.bandwidths_stage1.end(), bw.x2.begin(), bw.x2.end());
    res.bandwidths_stage1.insert(res.bandwidths_stage1.end(), bw.w.begin(), bw.w.end());
    res.bandwidths_stage2 = {bw2.sigma1, bw2.sigma2};
    res.switchers_stage1 = cache1.contributing_units;
    res.switchers_stage2 = cache2.contributing_units;
    res.seed = seed;
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

EstimationResult bootstrap_mrc(const CrossSectionDataset& data, const MRCConfig& cfg, int b_draws,
                               std::uint64_t seed) {
    if (b_draws < 2) throw InputError("bootstrap_mrc: need B >= 2");
    EstimationResult res = estimate_mrc(data, cfg, seed);
    // the bandwidth sequences are kept fixed across resamples
    MRCBandwidths bw = mrc_bandwidths(data, cfg, res.estimate.beta);

    const int n_free = static_cast<int>(res.free_values.size());
    const int free1 = data.k1() - 1;
    std::vector<std::vector<double>> draws;
    draws.reserve(b_draws);
    for (int b = 0; b < b_draws; ++b) {
        const std::uint64_t draw_seed = derive_seed(seed, 1000 + b, SeedPurpose::bootstrap);
        const CrossSectionDataset star = resample(data, draw_seed);
        try {
            SignCache cache1 = build_stage1_cache(star, bw.x1, bw.x2, bw.w,
                                                  cfg.stage1_kernel_order, cfg.prune_ratio);
            if (cache1.empty()) throw EstimationError("degenerate stage-1 resample");
            const std::vector<double> b_free =
                maximize_cache(cache1, cfg, free1,
                               derive_seed(draw_seed, 1, SeedPurpose::de_stage1), true);
            std::vector<double> beta{1.0};
            beta.insert(beta.end(), b_free.begin(), b_free.end());
            SignCache cache2 = build_stage2_cache(star, beta, bw.sigma1, bw.sigma2,
                                                  cfg.stage2_kernel_order, cfg.prune_ratio);
            if (cache2.empty()) throw EstimationError("degenerate stage-2 resample");
            const std::vector<double> r_free =
                maximize_cache(cache2, cfg, data.k2() - 1,
                               derive_seed(draw_seed, 2, SeedPurpose::de_stage2), true);
            std::vector<double> row(b_free);
            row.insert(row.end(), r_free.begin(), r_free.end());
            draws.push_back(std::move(row));
        } catch (const EstimationError&) {
            ++res.excluded_draws;
        }
    }
    if (static_cast<int>(draws.size()) < 2)
        throw EstimationError("bootstrap_mrc: fewer than two usable bootstrap draws");

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

EtaTestResult eta_test_cross(const CrossSectionDataset& data, const ParamVector& estimates,
                             const MRCConfig& cfg, int b_draws, std::uint64_t seed) {
    const MRCBandwidths bw = mrc_bandwidths(data, cfg, estimates.beta);
    return eta_test_cross(data, estimates, bw.sigma1, bw.sigma2, cfg.stage2_kernel_order, b_draws,
                          seed);
}

EtaTestResult eta_test_cross(const CrossSectionDataset& data, const ParamVector& estimates,
                             double sigma1, double sigma2, int order, int b_draws,
                             std::uint64_t seed) {
    if (b_draws < 2) throw InputError("eta_test_cross: need B >= 2");
    if (!(sigma1 > 0.0) || !(sigma2 > 0.0))
        throw InputError("eta_test_cross: bandwidths must be positive");
    check_normalized(estimates.beta, "eta_test_cross beta");
    check_normalized(estimates.gamma, "eta_test_cross gamma");

    const std::vector<double> v1 = fitted_index(data, data.x1, estimates.beta);
    const std::vector<double> v2 = fitted_index(data, data.x2, estimates.beta);
    std::vector<double> wg(data.n);
    std::vector<double> y11(data.n);
    for (int i = 0; i < data.n; ++i) {
        wg[i] = dot(data.w.row(i), estimates.gamma);
        y11[i] = data.choice[i] == ChoiceOutcome{1, 1} ? 1.0 : 0.0;
    }

    auto statistic = [&](std::span<const int> idx) {
        const int n = static_cast<int>(idx.size());
        double total = 0.0;
        for (int a = 0; a < n - 1; ++a) {
            const int i = idx[a];
            for (int bb = a + 1; bb < n; ++bb) {
                const int m = idx[bb];
                const double dy = y11[i] - y11[m];
                if (dy == 0.0) continue;
                const double dwg = wg[i] - wg[m];
                if (dwg == 0.0) continue;  // the two ordered pairs cancel
                const double weight = gaussian_kernel(order, (v1[i] - v1[m]) / sigma1) / sigma1 *
                                      gaussian_kernel(order, (v2[i] - v2[m]) / sigma2) / sigma2;
                total += 2.0 * weight * dy * sign_pm1(dwg);
            }
        }
        return total / (static_cast<double>(n) * (n - 1));
    };

    std::vector<int> base(data.n);
    for (int i = 0; i < data.n; ++i) base[i] = i;
    EtaTestResult out;
    out.statistic = statistic(base);
    out.draws.reserve(b_draws);
    std::vector<int> idx(data.n);
    for (int b = 0; b < b_draws; ++b) {
        Rng rng(derive_seed(seed, 2000 + b, SeedPurpose::bootstrap));
        for (int i = 0; i < data.n; ++i) idx[i] = rng.uniform_int(data.n);
        out.draws.push_back(statistic(idx));
    }
    out.ci_lower_5pct = quantile(out.draws, 0.05);
    out.supports_positive_eta = out.ci_lower_5pct > 0.0;
    return out;
}

}  // namespace bundlechoice
