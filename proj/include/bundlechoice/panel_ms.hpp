#pragma once

#include "bundlechoice/kernels.hpp"
#include "bundlechoice/optimizer.hpp"
#include "bundlechoice/results.hpp"

namespace bundlechoice {

// Panel localized maximum-score estimation, the numerical bootstrap for its
// cube-root-type estimators, and the panel interaction test. Only switchers
// (agents whose choices differ across periods) contribute to the criteria.

struct PanelMSConfig {
    int kernel_order = 2;
    double c3 = 2.0;  // shared bandwidth constant (h_N = sigma_N rule)
    double search_bound = 10.0;
    double prune_ratio = 1e-12;
    DEConfig de;
    int bootstrap_de_generations = 0;  // 0 -> same as de.max_generations
};

enum class EpsilonRule {
    section4,  // c4 * N^{-5/7} * ln(N)^{-5/14}, both stages
    rate,      // the k-dependent rate pair
};

struct NumericalBootstrapSpec {
    EpsilonRule rule = EpsilonRule::section4;
    double c4 = 2.0;
    double epsilon1 = 0.0, epsilon2 = 0.0;  // explicit values override the rule when > 0
};

// first-stage criterion summed over agents and period pairs, single bandwidth h
double ms_beta_objective(const PanelDataset& data, std::span<const double> b, double h,
                         const PanelMSConfig& cfg = {});

// covariate-matched second stage, single bandwidth sigma
double ms_gamma_objective(const PanelDataset& data, std::span<const double> r, double sigma,
                          const PanelMSConfig& cfg = {});

EstimationResult estimate_panel_ms(const PanelDataset& data, const PanelMSConfig& cfg,
                                   std::uint64_t seed);

std::array<double, 2> numerical_bootstrap_epsilons(int n_agents, int k1, int k2,
                                                   const NumericalBootstrapSpec& nb);

// B agent-level resamples maximizing the perturbed criteria; returns a copy of
// `point` with draws, percentile CIs and the epsilon values filled in.
EstimationResult numerical_bootstrap(const PanelDataset& data, const PanelMSConfig& cfg,
                                     const NumericalBootstrapSpec& nb,
                                     const EstimationResult& point, int b_draws,
                                     std::uint64_t seed);

// Perturbed and classic bootstrap objectives for one resample, exposed so the
// epsilon = 1/N collapse can be checked pointwise.
double numerical_bootstrap_objective_beta(const PanelDataset& data, const PanelMSConfig& cfg,
                                          double epsilon, const EstimationResult& point,
                                          std::uint64_t resample_seed,
                                          std::span<const double> free);
double classic_bootstrap_objective_beta(const PanelDataset& data, const PanelMSConfig& cfg,
                                        const EstimationResult& point,
                                        std::uint64_t resample_seed,
                                        std::span<const double> free);

EtaTestResult eta_test_panel(const PanelDataset& data, const ParamVector& estimates, double sigma,
                             int kernel_order, int b_draws, std::uint64_t seed);
EtaTestResult eta_test_panel(const PanelDataset& data, const ParamVector& estimates,
                             const PanelMSConfig& cfg, int b_draws, std::uint64_t seed);

struct PanelMSBandwidths {
    std::vector<double> x1, x2, w;  // per continuous column, zero at discrete ones
};

PanelMSBandwidths panel_ms_bandwidths(const PanelDataset& data, const PanelMSConfig& cfg);

}  // namespace bundlechoice
