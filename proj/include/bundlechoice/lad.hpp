#pragma once

#include "bundlechoice/firststage.hpp"
#include "bundlechoice/optimizer.hpp"
#include "bundlechoice/results.hpp"

namespace bundlechoice {

// Least-absolute-deviations estimation: sign predictions from the three
// pairwise index differences are scored against first-stage estimates of the
// choice-probability differences.

struct PredictionIndicators {
    std::uint8_t plus = 0;
    std::uint8_t minus = 0;
};

// Weak-inequality sign patterns per alternative; at exact zeros both
// indicators can fire.
PredictionIndicators indicators(double dx1, double dx2, double dw, ChoiceOutcome d);

// Oracle loss: 2 for a prediction contradicting the sign of the exact delta_p,
// 0 for a correct prediction or no prediction.
double lad_loss(const PredictionIndicators& ind, double delta_p);

// Debiased loss with a plug-in estimate, in [1, 3]:
// [|I+ - dp| + |I- + dp|] (I+ + I-) + [1 - (I+ + I-)]
double lad_loss_debiased(const PredictionIndicators& ind, double delta_p_hat);

struct LADConfig {
    NWConfig nw;
    MLPConfig mlp;
    DEConfig de;
    double search_bound = 10.0;
    bool include_rho_b = false;  // the simulation designs carry no common
                                 // regressor in the bundle index
    bool combine_all_alternatives = true;
    int single_alternative = 1;  // outcome index used when combining is off
    int bootstrap_de_generations = 0;
};

// free-coordinate packing (beta[1:], gamma[1:], rho1, rho2, rho_b)
struct LADLayout {
    int k1 = 0, k2 = 0, k3 = 0;
    bool include_rho_b = false;

    int n_free() const { return (k1 - 1) + (k2 - 1) + k3 + k3 + (include_rho_b ? k3 : 0); }
    ParamVector unpack(std::span<const double> free) const;
    std::vector<double> pack(const ParamVector& theta) const;
    std::vector<std::string> names() const;
};

// sum over pairs and alternatives of the debiased losses
double lad_objective_cross(const CrossSectionDataset& data, const ParamVector& theta,
                           const ChoiceProbModel& model, const LADConfig& cfg = {});
double lad_objective_panel(const PanelDataset& data, const ParamVector& theta,
                           const MLPChoiceProbability& model, const LADConfig& cfg = {});

// probability differences supplied directly, one 4-vector per (agent, t, s)
using PanelDeltaFn = std::function<std::array<double, 4>(int agent, int t, int s)>;
double lad_objective_panel(const PanelDataset& data, const ParamVector& theta,
                           const PanelDeltaFn& deltas, const LADConfig& cfg = {});

EstimationResult estimate_lad_cross(const CrossSectionDataset& data, const LADConfig& cfg,
                                    std::uint64_t seed);
EstimationResult estimate_lad_panel(const PanelDataset& data, const LADConfig& cfg,
                                    std::uint64_t seed);

// resampled re-estimation (first stage refit per draw); percentile CIs
EstimationResult bootstrap_lad_cross(const CrossSectionDataset& data, const LADConfig& cfg,
                                     int b_draws, std::uint64_t seed);
EstimationResult bootstrap_lad_panel(const PanelDataset& data, const LADConfig& cfg, int b_draws,
                                     std::uint64_t seed);

}  // namespace bundlechoice
