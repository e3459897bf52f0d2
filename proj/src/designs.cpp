#include "bundlechoice/designs.hpp"

#include <cmath>
#include <string>

namespace bundlechoice {

namespace {

constexpr int kMaxTieRedraws = 1000;

double bundle_transform(BundleLink link, double x) {
    return link == BundleLink::cubic ? x * x * x : x;
}

double logistic_from_normal(double z) { return logistic_quantile(std_normal_cdf(z)); }
double beta22_from_normal(double z) { return beta22_quantile(std_normal_cdf(z)); }

struct Latents {
    double eps1 = 0.0, eps2 = 0.0, eta = 0.0;
};

Latents draw_latents(Rng& rng, double eps_corr, bool eta_zero) {
    Latents l;
    double e[2];
    equicorrelated_normals(rng, eps_corr, e);
    l.eps1 = e[0];
    l.eps2 = e[1];
    l.eta = eta_zero ? 0.0 : beta22_quantile(rng.uniform());
    return l;
}

ChoiceOutcome choose_with_redraws(Rng& rng, const DesignSpec& spec, double u1_det, double u2_det,
                                  double bundle_index, long& tie_redraws) {
    for (int attempt = 0; attempt < kMaxTieRedraws; ++attempt) {
        const Latents l = draw_latents(rng, spec.correlation, spec.eta_zero);
        const double u10 = u1_det + l.eps1;
        const double u01 = u2_det + l.eps2;
        const double u11 = u10 + u01 + l.eta * bundle_transform(spec.bundle_link, bundle_index);
        try {
            return choose(u10, u01, u11);
        } catch (const TieError&) {
            ++tie_redraws;
        }
    }
    throw EstimationError("simulate_design: persistent utility ties; degenerate design");
}

void require_n(int n) {
    if (n < 2) throw InputError("simulate_design: need n >= 2");
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

CrossSectionDataset resample(const CrossSectionDataset& data, std::uint64_t seed) {
    Rng rng(seed);
    CrossSectionDataset out = data;
    out.tie_redraws = 0;
    for (int i = 0; i < data.n; ++i) {
        const int src = rng.uniform_int(data.n);
        for (int j = 0; j < data.k1(); ++j) {
            out.x1(i, j) = data.x1(src, j);
            out.x2(i, j) = data.x2(src, j);
        }
        for (int j = 0; j < data.k2(); ++j) out.w(i, j) = data.w(src, j);
        for (int j = 0; j < data.k3(); ++j) out.s(i, j) = data.s(src, j);
        out.choice[i] = data.choice[src];
    }
    return out;
}

PanelDataset resample(const PanelDataset& data, std::uint64_t seed) {
    Rng rng(seed);
    PanelDataset out = data;
    out.tie_redraws = 0;
    for (int i = 0; i < data.n; ++i) {
        const int src = rng.uniform_int(data.n);
        for (int t = 0; t < data.t_periods; ++t) {
            const int rd = out.row(i, t), rs = data.row(src, t);
            for (int j = 0; j < data.k1(); ++j) {
                out.x1(rd, j) = data.x1(rs, j);
                out.x2(rd, j) = data.x2(rs, j);
            }
            for (int j = 0; j < data.k2(); ++j) out.w(rd, j) = data.w(rs, j);
            for (int j = 0; j < data.k3(); ++j) out.s(rd, j) = data.s(rs, j);
            out.choice[rd] = data.choice[rs];
        }
    }
    return out;
}

void equicorrelated_normals(Rng& rng, double rho, std::span<double> out) {
    if (rho <= 0.0) {
        for (double& z : out) z = rng.normal();
        return;
    }
    const double a = std::sqrt(rho), b = std::sqrt(1.0 - rho);
    const double z0 = rng.normal();
    for (double& z : out) z = a * z0 + b * rng.normal();
}

void equicorrelated_bernoulli(Rng& rng, double rho, double p, std::span<double> out) {
    if (rho <= 0.0) {
        for (double& x : out) x = rng.bernoulli(p) ? 1.0 : 0.0;
        return;
    }
    const double mix = std::sqrt(rho);
    const double common = rng.bernoulli(p) ? 1.0 : 0.0;
    for (double& x : out) {
        const bool use_common = rng.bernoulli(mix);
        const double own = rng.bernoulli(p) ? 1.0 : 0.0;
        x = use_common ? common : own;
    }
}

DesignSpec make_design(int design_id) {
    DesignSpec spec;
    spec.design_id = design_id;
    spec.true_params.beta = {1.0, 1.0};
    spec.true_params.gamma = {1.0, 1.0};
    spec.true_params.rho1 = {1.0};
    spec.true_params.rho2 = {1.0};
    spec.true_params.rho_b = {};  // the bundle index carries no common regressor
    switch (design_id) {
        case 1:
        case 3:
            spec.correlation = 0.0;
            break;
        case 2:
            spec.correlation = 0.5;
            break;
        case 4:
            spec.correlation = 0.25;
            break;
        default:
            throw ConfigError("make_design: design_id must be 1..4");
    }
    return spec;
}

ChoiceOutcome choose(double u10, double u01, double u11) {
    const double u[4] = {0.0, u10, u01, u11};
    int best = 0;
    for (int k = 1; k < 4; ++k)
        if (u[k] > u[best]) best = k;
    for (int k = 0; k < 4; ++k)
        if (k != best && u[k] == u[best]) throw TieError("choose: tied maximal utilities");
    return ChoiceOutcome::from_index(best);
}

// ---------------------------------------------------------------------------
// Cross-sectional simulation (designs 1 and 2, and the custom design)
// ---------------------------------------------------------------------------

namespace {

CrossSectionDataset simulate_custom_cross(const DesignSpec& spec, int n, std::uint64_t seed) {
    const auto& cfg = spec.custom;
    const int k1 = static_cast<int>(cfg.x_support.size());
    const int k2 = static_cast<int>(cfg.w_support.size());
    const int k3 = static_cast<int>(cfg.s_support.size());
    CrossSectionDataset d;
    d.n = n;
    d.x1 = Matrix(n, k1);
    d.x2 = Matrix(n, k1);
    d.w = Matrix(n, k2);
    d.s = Matrix(n, k3);
    d.x_discrete = cfg.x_discrete;
    d.w_discrete = cfg.w_discrete;
    d.s_discrete = cfg.s_discrete;
    d.x_categories.assign(k1, 0);
    d.w_categories.assign(k2, 0);
    d.s_categories.assign(k3, 0);
    for (int j = 0; j < k1; ++j)
        if (j < static_cast<int>(cfg.x_discrete.size()) && cfg.x_discrete[j])
            d.x_categories[j] = static_cast<int>(cfg.x_support[j].size());
    for (int j = 0; j < k2; ++j)
        if (j < static_cast<int>(cfg.w_discrete.size()) && cfg.w_discrete[j])
            d.w_categories[j] = static_cast<int>(cfg.w_support[j].size());
    for (int j = 0; j < k3; ++j)
        if (j < static_cast<int>(cfg.s_discrete.size()) && cfg.s_discrete[j])
            d.s_categories[j] = static_cast<int>(cfg.s_support[j].size());
    d.choice.resize(n);

    const auto& tp = spec.true_params;
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < k1; ++j) {
            d.x1(i, j) = cfg.x_support[j][rng.uniform_int(static_cast<int>(cfg.x_support[j].size()))];
            d.x2(i, j) = cfg.x_support[j][rng.uniform_int(static_cast<int>(cfg.x_support[j].size()))];
        }
        for (int j = 0; j < k2; ++j)
            d.w(i, j) = cfg.w_support[j][rng.uniform_int(static_cast<int>(cfg.w_support[j].size()))];
        for (int j = 0; j < k3; ++j)
            d.s(i, j) = cfg.s_support[j][rng.uniform_int(static_cast<int>(cfg.s_support[j].size()))];

        const double u1 = dot(d.x1.row(i), tp.beta) + (k3 ? dot(d.s.row(i), tp.rho1) : 0.0);
        const double u2 = dot(d.x2.row(i), tp.beta) + (k3 ? dot(d.s.row(i), tp.rho2) : 0.0);
        double bidx = dot(d.w.row(i), tp.gamma);
        if (!tp.rho_b.empty()) bidx += dot(d.s.row(i), tp.rho_b);
        d.choice[i] = choose_with_redraws(rng, spec, u1, u2, bidx, d.tie_redraws);
    }
    return d;
}

}  // namespace

CrossSectionDataset simulate_cross(const DesignSpec& spec, int n, std::uint64_t seed) {
    require_n(n);
    if (spec.is_panel()) throw InputError("simulate_cross: panel design requested");
    if (spec.design_id == 0) return simulate_custom_cross(spec, n, seed);

    // designs 1 and 2: X_j = (Logistic, Bernoulli(1/3)), W = (Logistic, N(0,1)), S = N(0,1)
    CrossSectionDataset d;
    d.n = n;
    d.x1 = Matrix(n, 2);
    d.x2 = Matrix(n, 2);
    d.w = Matrix(n, 2);
    d.s = Matrix(n, 1);
    d.x_discrete = {0, 1};
    d.w_discrete = {0, 0};
    d.s_discrete = {0};
    d.x_categories = {0, 2};
    d.w_categories = {0, 0};
    d.s_categories = {0};
    d.choice.resize(n);

    const auto& tp = spec.true_params;
    const double rho = spec.design_id == 2 ? 0.5 : 0.0;  // regressor/error correlation
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        double zx[2];
        equicorrelated_normals(rng, rho, zx);  // latent pair for (X_{i1,1}, X_{i2,1})
        d.x1(i, 0) = logistic_from_normal(zx[0]);
        d.x2(i, 0) = logistic_from_normal(zx[1]);
        double xb[2];
        equicorrelated_bernoulli(rng, rho, 1.0 / 3.0, xb);
        d.x1(i, 1) = xb[0];
        d.x2(i, 1) = xb[1];
        d.w(i, 0) = logistic_quantile(rng.uniform());
        d.w(i, 1) = rng.normal();
        d.s(i, 0) = rng.normal();

        const double u1 = dot(d.x1.row(i), tp.beta) + d.s(i, 0) * tp.rho1[0];
        const double u2 = dot(d.x2.row(i), tp.beta) + d.s(i, 0) * tp.rho2[0];
        const double bidx = dot(d.w.row(i), tp.gamma);
        d.choice[i] = choose_with_redraws(rng, spec, u1, u2, bidx, d.tie_redraws);
    }
    return d;
}

// ---------------------------------------------------------------------------
// Panel simulation (designs 3 and 4, and the custom design with panel = true)
// ---------------------------------------------------------------------------

namespace {

PanelDataset simulate_custom_panel(const DesignSpec& spec, int n, std::uint64_t seed) {
    DesignSpec cross = spec;
    cross.custom.panel = false;
    const int T = spec.t_periods;
    // independent periods, no fixed effects: reuse the cross draw per (i, t)
    CrossSectionDataset flat = simulate_custom_cross(cross, n * T, seed);
    PanelDataset d;
    d.n = n;
    d.t_periods = T;
    d.x1 = std::move(flat.x1);
    d.x2 = std::move(flat.x2);
    d.w = std::move(flat.w);
    d.s = std::move(flat.s);
    d.x_discrete = std::move(flat.x_discrete);
    d.w_discrete = std::move(flat.w_discrete);
    d.s_discrete = std::move(flat.s_discrete);
    d.x_categories = std::move(flat.x_categories);
    d.w_categories = std::move(flat.w_categories);
    d.s_categories = std::move(flat.s_categories);
    d.choice = std::move(flat.choice);
    d.tie_redraws = flat.tie_redraws;
    return d;
}

}  // namespace

PanelDataset simulate_panel(const DesignSpec& spec, int n, std::uint64_t seed) {
    require_n(n);
    if (!spec.is_panel()) throw InputError("simulate_panel: cross-sectional design requested");
    if (spec.design_id == 0) return simulate_custom_panel(spec, n, seed);
    if (spec.t_periods != 2)
        throw ConfigError("simulate_panel: designs 3 and 4 are two-period designs");

    const int T = 2;
    PanelDataset d;
    d.n = n;
    d.t_periods = T;
    d.x1 = Matrix(n * T, 2);
    d.x2 = Matrix(n * T, 2);
    d.w = Matrix(n * T, 2);
    d.s = Matrix(n * T, 1);
    d.x_discrete = {0, 1};
    d.w_discrete = {0, 0};
    d.s_discrete = {0};
    d.x_categories = {0, 2};
    d.w_categories = {0, 0};
    d.s_categories = {0};
    d.choice.resize(n * T);

    const auto& tp = spec.true_params;
    const double rho = spec.design_id == 4 ? 0.25 : 0.0;
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        // x_cont[j][t], x_disc[j][t]: 4-variate blocks with equicorrelation rho
        double zx[4];
        equicorrelated_normals(rng, rho, zx);
        double xc[4];
        for (int k = 0; k < 4; ++k) xc[k] = logistic_from_normal(zx[k]);
        double xd[4];
        equicorrelated_bernoulli(rng, rho, 1.0 / 3.0, xd);
        double ze[4];
        equicorrelated_normals(rng, rho, ze);  // eps_{jt}

        // serially correlated agent-level processes (two periods each)
        double zw1[2], zw2[2], zs[2], zeta[2];
        equicorrelated_normals(rng, rho, zw1);
        equicorrelated_normals(rng, rho, zw2);
        equicorrelated_normals(rng, rho, zs);
        equicorrelated_normals(rng, rho, zeta);

        const int j1t1 = 0, j1t2 = 1, j2t1 = 2, j2t2 = 3;  // layout of the 4-variate blocks
        const double alpha1 = (xc[j1t1] + xc[j1t2]) / 4.0;
        const double alpha2 = (xc[j2t1] + xc[j2t2]) / 4.0;
        double w1[2];
        w1[0] = logistic_from_normal(zw1[0]);
        w1[1] = logistic_from_normal(zw1[1]);
        const double alpha_b = (w1[0] + w1[1]) / 4.0;

        for (int t = 0; t < T; ++t) {
            const int r = d.row(i, t);
            d.x1(r, 0) = xc[t == 0 ? j1t1 : j1t2];
            d.x1(r, 1) = xd[t == 0 ? j1t1 : j1t2];
            d.x2(r, 0) = xc[t == 0 ? j2t1 : j2t2];
            d.x2(r, 1) = xd[t == 0 ? j2t1 : j2t2];
            d.w(r, 0) = w1[t];
            d.w(r, 1) = zw2[t];
            d.s(r, 0) = zs[t];
            const double eta = spec.eta_zero ? 0.0 : beta22_from_normal(zeta[t]);

            const double u1 = dot(d.x1.row(r), tp.beta) + d.s(r, 0) * tp.rho1[0] + alpha1 +
                              ze[t == 0 ? j1t1 : j1t2];
            const double u2 = dot(d.x2.row(r), tp.beta) + d.s(r, 0) * tp.rho2[0] + alpha2 +
                              ze[t == 0 ? j2t1 : j2t2];
            const double bidx = dot(d.w.row(r), tp.gamma) + alpha_b;
            const double u11 = u1 + u2 + eta * bundle_transform(spec.bundle_link, bidx);
            try {
                d.choice[r] = choose(u1, u2, u11);
            } catch (const TieError&) {
                // redraw this period's latents (eps_1t, eps_2t, eta_t), keeping
                // covariates fixed; the redraw keeps the within-period error
                // correlation but not the serial one (ties are measure zero)
                const double base1 = u1 - ze[t == 0 ? j1t1 : j1t2];
                const double base2 = u2 - ze[t == 0 ? j2t1 : j2t2];
                ++d.tie_redraws;
                d.choice[r] = choose_with_redraws(rng, spec, base1, base2, bidx, d.tie_redraws);
            }
        }
    }
    return d;
}

// ---------------------------------------------------------------------------
// Brute-force choice-probability oracle
// ---------------------------------------------------------------------------

std::array<double, 4> choice_probability_from_indexes(const DesignSpec& spec, double u1_det,
                                                      double u2_det, double bundle_index,
                                                      int n_mc, std::uint64_t seed) {
    if (n_mc < 1000) throw InputError("true_choice_probability: need n_mc >= 1000");
    Rng rng(seed);
    std::array<long, 4> counts = {0, 0, 0, 0};
    const double fb = bundle_transform(spec.bundle_link, bundle_index);
    for (int m = 0; m < n_mc; ++m) {
        for (int attempt = 0;; ++attempt) {
            const Latents l = draw_latents(rng, spec.correlation, spec.eta_zero);
            const double u10 = u1_det + l.eps1;
            const double u01 = u2_det + l.eps2;
            const double u11 = u10 + u01 + l.eta * fb;
            try {
                ++counts[choose(u10, u01, u11).index()];
                break;
            } catch (const TieError&) {
                if (attempt >= kMaxTieRedraws)
                    throw EstimationError("oracle: persistent utility ties");
            }
        }
    }
    std::array<double, 4> p;
    for (int k = 0; k < 4; ++k) p[k] = static_cast<double>(counts[k]) / static_cast<double>(n_mc);
    return p;
}

std::array<double, 4> true_choice_probability(const DesignSpec& spec, const CovariateRow& z,
                                              int n_mc, std::uint64_t seed) {
    const auto& tp = spec.true_params;
    double u1 = dot(z.x1, tp.beta) + z.alpha1;
    double u2 = dot(z.x2, tp.beta) + z.alpha2;
    if (!z.s.empty()) {
        u1 += dot(z.s, tp.rho1);
        u2 += dot(z.s, tp.rho2);
    }
    double bidx = dot(z.w, tp.gamma) + z.alpha_b;
    if (!z.s.empty() && !tp.rho_b.empty()) bidx += dot(z.s, tp.rho_b);
    return choice_probability_from_indexes(spec, u1, u2, bidx, n_mc, seed);
}

}  // namespace bundlechoice
