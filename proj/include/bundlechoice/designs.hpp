#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "bundlechoice/common.hpp"

namespace bundlechoice {

// Random-utility data generating processes for the four simulation designs,
// a configurable finite-support design for oracle studies, and a brute-force
// Monte Carlo oracle for the conditional choice probabilities.

struct ChoiceOutcome {
    std::uint8_t d1 = 0;
    std::uint8_t d2 = 0;

    int index() const { return d1 + 2 * d2; }  // (0,0)=0 (1,0)=1 (0,1)=2 (1,1)=3
    static ChoiceOutcome from_index(int k) {
        return {static_cast<std::uint8_t>(k & 1), static_cast<std::uint8_t>((k >> 1) & 1)};
    }
    bool operator==(const ChoiceOutcome&) const = default;
};

inline constexpr std::array<int, 4> kAllOutcomes = {0, 1, 2, 3};

struct CrossSectionDataset {
    int n = 0;
    Matrix x1, x2;  // N x k1 each; x1 and x2 share column semantics
    Matrix w;       // N x k2
    Matrix s;       // N x k3 (k3 may be 0)
    std::vector<std::uint8_t> x_discrete, w_discrete, s_discrete;
    std::vector<int> x_categories, w_categories, s_categories;  // 0 on continuous columns
    std::vector<ChoiceOutcome> choice;
    long tie_redraws = 0;

    int k1() const { return x1.cols(); }
    int k2() const { return w.cols(); }
    int k3() const { return s.cols(); }
};

struct PanelDataset {
    int n = 0;
    int t_periods = 0;
    Matrix x1, x2, w, s;  // (n * t_periods) rows, agent-major
    std::vector<std::uint8_t> x_discrete, w_discrete, s_discrete;
    std::vector<int> x_categories, w_categories, s_categories;
    std::vector<ChoiceOutcome> choice;  // per (agent, period) row
    long tie_redraws = 0;

    int row(int i, int t) const { return i * t_periods + t; }
    int k1() const { return x1.cols(); }
    int k2() const { return w.cols(); }
    int k3() const { return s.cols(); }
};

enum class BundleLink { identity, cubic };

// theta = (beta, gamma, rho1, rho2, rho_b); first components of beta and gamma
// are pinned to 1 by the scale normalization. rho blocks may be empty.
struct ParamVector {
    std::vector<double> beta;
    std::vector<double> gamma;
    std::vector<double> rho1;
    std::vector<double> rho2;
    std::vector<double> rho_b;
};

// Finite-support design used for identification checks: covariate values are
// drawn uniformly from small per-column supports so the oracle can evaluate
// choice probabilities cell by cell.
struct CustomDesignConfig {
    std::vector<std::vector<double>> x_support;  // k1 columns (shared by X1, X2)
    std::vector<std::vector<double>> w_support;  // k2 columns
    std::vector<std::vector<double>> s_support;  // k3 columns
    std::vector<std::uint8_t> x_discrete, w_discrete, s_discrete;
    bool panel = false;
};

struct DesignSpec {
    int design_id = 1;  // 1..4 as in the simulation study; 0 = custom
    ParamVector true_params;
    BundleLink bundle_link = BundleLink::identity;
    double correlation = 0.0;  // cross-equation error correlation
    bool eta_zero = false;     // interaction weight degenerate at zero
    int t_periods = 2;
    CustomDesignConfig custom;

    bool is_panel() const {
        return design_id == 3 || design_id == 4 || (design_id == 0 && custom.panel);
    }
};

// canonical specs: designs 1/2 cross-sectional, 3/4 two-period panel
DesignSpec make_design(int design_id);

// argmax over {0, u10, u01, u11}; exact ties throw TieError
ChoiceOutcome choose(double u10, double u01, double u11);

CrossSectionDataset simulate_cross(const DesignSpec& spec, int n, std::uint64_t seed);
PanelDataset simulate_panel(const DesignSpec& spec, int n, std::uint64_t seed);

// one observation(-period) worth of covariates plus optional fixed effects
struct CovariateRow {
    std::vector<double> x1, x2, w, s;
    double alpha1 = 0.0, alpha2 = 0.0, alpha_b = 0.0;
};

// Monte Carlo integration over the latent draws; probabilities over D in the
// outcome index order (0,0),(1,0),(0,1),(1,1).
std::array<double, 4> true_choice_probability(const DesignSpec& spec, const CovariateRow& z,
                                              int n_mc, std::uint64_t seed);

// same oracle with the deterministic utility indexes supplied directly
std::array<double, 4> choice_probability_from_indexes(const DesignSpec& spec, double u1_det,
                                                      double u2_det, double bundle_index,
                                                      int n_mc, std::uint64_t seed);

double dot(std::span<const double> a, std::span<const double> b);

// bootstrap resamples: rows with replacement (cross), agents with replacement (panel)
CrossSectionDataset resample(const CrossSectionDataset& data, std::uint64_t seed);
PanelDataset resample(const PanelDataset& data, std::uint64_t seed);

// Equicorrelated standard normals: z_k = sqrt(rho) z0 + sqrt(1-rho) g_k.
void equicorrelated_normals(Rng& rng, double rho, std::span<double> out);

// One-factor correlated Bernoulli block: X_k = B_k ? C : E_k with
// B_k ~ Bern(sqrt(rho)); exact marginal p and pairwise correlation rho.
void equicorrelated_bernoulli(Rng& rng, double rho, double p, std::span<double> out);

}  // namespace bundlechoice
