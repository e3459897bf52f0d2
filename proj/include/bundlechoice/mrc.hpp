#pragma once

#include "bundlechoice/kernels.hpp"
#include "bundlechoice/optimizer.hpp"
#include "bundlechoice/results.hpp"

namespace bundlechoice {

// Two-step localized maximum-rank-correlation estimation for the
// cross-sectional bundle model, its nonparametric bootstrap, and the
// criterion-based interaction test.

struct MRCConfig {
    int stage1_kernel_order = 6;
    int stage2_kernel_order = 4;
    double c1 = 1.0;  // stage-1 bandwidth constant
    double c2 = 2.0;  // stage-2 bandwidth constant
    double search_bound = 10.0;
    double prune_ratio = 1e-12;  // entries below ratio * max |weight| are dropped
    DEConfig de;                 // bounds/population sized per stage at run time
    int bootstrap_de_generations = 0;  // 0 -> same as de.max_generations
};

// Criterion (sum over unordered pairs and all four alternatives) at parameter
// b with b[0] = 1; a single bandwidth h is applied to every continuous
// matching variable, discrete ones are exactly matched.
double mrc_beta_objective(const CrossSectionDataset& data, std::span<const double> b, double h,
                          const MRCConfig& cfg = {});

// Second-stage criterion at r with r[0] = 1, matching on the fitted indexes
// X_j' beta_hat with bandwidth sigma.
double mrc_gamma_objective(const CrossSectionDataset& data, std::span<const double> r,
                           std::span<const double> beta_hat, double sigma,
                           const MRCConfig& cfg = {});

EstimationResult estimate_mrc(const CrossSectionDataset& data, const MRCConfig& cfg,
                              std::uint64_t seed);

// B resamples with replacement; each re-runs both stages on the resample
// (stage 2 matches on the resample's own beta_hat*). Percentile CIs.
EstimationResult bootstrap_mrc(const CrossSectionDataset& data, const MRCConfig& cfg, int b_draws,
                               std::uint64_t seed);

// Statistic evaluated at the supplied estimates; bootstrap redraws the sample
// without re-estimating (beta_hat, gamma_hat).
EtaTestResult eta_test_cross(const CrossSectionDataset& data, const ParamVector& estimates,
                             double sigma1, double sigma2, int kernel_order, int b_draws,
                             std::uint64_t seed);

// bandwidths from the stage-2 rule in cfg
EtaTestResult eta_test_cross(const CrossSectionDataset& data, const ParamVector& estimates,
                             const MRCConfig& cfg, int b_draws, std::uint64_t seed);

// ---------------------------------------------------------------------------
// internals shared with the acceptance suite (bandwidth plumbing)
// ---------------------------------------------------------------------------

// per continuous column bandwidths; zero entries sit at discrete columns
struct MRCBandwidths {
    std::vector<double> x1, x2, w;  // stage 1
    double sigma1 = 0.0, sigma2 = 0.0;  // stage 2 (fitted-index matching)
};

MRCBandwidths mrc_bandwidths(const CrossSectionDataset& data, const MRCConfig& cfg,
                             std::span<const double> beta_hat);

}  // namespace bundlechoice
