#pragma once

#include <array>
#include <string>
#include <vector>

#include "bundlechoice/designs.hpp"

namespace bundlechoice {

// Shared result schema for the MRC, MS and LAD estimators. Free coordinates
// are the non-normalized entries of theta in block order
// (beta[1:], gamma[1:], rho1, rho2, rho_b).
struct EstimationResult {
    ParamVector estimate;
    std::vector<std::string> free_names;
    std::vector<double> free_values;

    double stage1_criterion = 0.0;
    double stage2_criterion = 0.0;
    double criterion = 0.0;  // single-criterion estimators (LAD)

    Matrix bootstrap_draws;                  // B x n_free (valid draws only)
    std::vector<std::array<double, 2>> ci;   // percentile interval per free coordinate
    int excluded_draws = 0;

    std::vector<double> bandwidths_stage1;
    std::vector<double> bandwidths_stage2;
    double epsilon1 = 0.0, epsilon2 = 0.0;   // numerical bootstrap tuning
    long switchers_stage1 = 0, switchers_stage2 = 0;
    double first_stage_clamp_rate = -1.0;    // LAD diagnostics
    double first_stage_loss = -1.0;

    std::uint64_t seed = 0;
    double seconds = 0.0;
};

struct EtaTestResult {
    double statistic = 0.0;       // criterion-based test statistic
    double ci_lower_5pct = 0.0;   // 5% quantile of the bootstrap statistics
    bool supports_positive_eta = false;  // lower endpoint above zero
    std::vector<double> draws;
};

}  // namespace bundlechoice
