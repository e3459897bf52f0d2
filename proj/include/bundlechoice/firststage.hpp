#pragma once

#include <array>
#include <memory>
#include <span>
#include <vector>

#include "bundlechoice/designs.hpp"
#include "bundlechoice/kernels.hpp"

namespace bundlechoice {

// Nonparametric choice-probability estimation feeding the LAD estimators:
// Nadaraya-Watson with mixed kernels for the cross-sectional model and a
// small sigmoid network for the panel model.

class ChoiceProbModel {
public:
    virtual ~ChoiceProbModel() = default;
    // clamped to [0, 1]
    virtual double probability(ChoiceOutcome d, std::span<const double> z) const = 0;
};

inline double delta_p_hat(const ChoiceProbModel& model, ChoiceOutcome d,
                          std::span<const double> z_i, std::span<const double> z_m) {
    return model.probability(d, z_i) - model.probability(d, z_m);
}

// feature layout shared by both first-stage estimators: (x1 | x2 | w | s)
struct FeatureLayout {
    int k1 = 0, k2 = 0, k3 = 0;
    std::vector<std::uint8_t> discrete;  // per feature column
    std::vector<int> categories;

    int total() const { return 2 * k1 + k2 + k3; }
    static FeatureLayout from_cross(const CrossSectionDataset& data);
    static FeatureLayout from_panel(const PanelDataset& data);
};

std::vector<double> feature_row(const CrossSectionDataset& data, int i);
std::vector<double> feature_row(const PanelDataset& data, int i, int t);

// ---------------------------------------------------------------------------
// Nadaraya-Watson
// ---------------------------------------------------------------------------

struct NWConfig {
    int kernel_order = 4;
    double silverman_constant = 1.06;
    double discrete_lambda = -1.0;  // negative -> 1/N
};

// one-off evaluation straight from the dataset; bandwidths are per feature
// column (entries at discrete columns are ignored)
double nw_probability(const CrossSectionDataset& data, ChoiceOutcome d,
                      std::span<const double> z, std::span<const double> bandwidths,
                      double discrete_lambda, int kernel_order = 4);

class NWChoiceProbability final : public ChoiceProbModel {
public:
    NWChoiceProbability(const CrossSectionDataset& data, NWConfig cfg = {});

    std::array<double, 4> probabilities(std::span<const double> z, bool* clamped = nullptr) const;
    double probability(ChoiceOutcome d, std::span<const double> z) const override;

    const std::vector<double>& bandwidths() const { return bandwidths_; }
    double discrete_lambda() const { return lambda_; }

private:
    Matrix features_;
    std::vector<int> target_;  // outcome index per training row
    FeatureLayout layout_;
    std::vector<double> bandwidths_;
    double lambda_ = 0.0;
    int order_ = 4;
};

// ---------------------------------------------------------------------------
// Feedforward network (two hidden layers, three neurons, logistic sigmoid)
// ---------------------------------------------------------------------------

struct MLPConfig {
    int neurons_per_layer = 3;
    double learning_rate = 0.5;
    int epochs = 5000;
    std::uint64_t seed = 0;
};

class MLP {
public:
    // zero-initialized network (prediction 0.5 everywhere)
    MLP(int n_inputs, const MLPConfig& cfg = {});

    // full-batch gradient descent on mean squared error; deterministic in seed
    static MLP train(const Matrix& features, std::span<const double> targets,
                     const MLPConfig& cfg);

    double predict(std::span<const double> z) const;

    // flat parameter access plus loss/gradient, used by the finite-difference check
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> p);
    double loss(const Matrix& features, std::span<const double> targets) const;
    std::vector<double> loss_gradient(const Matrix& features, std::span<const double> targets) const;

    void randomize_weights(std::uint64_t seed);  // uniform on [-0.5, 0.5]
    void set_standardization(std::vector<double> means, std::vector<double> sds);

    int n_inputs() const { return n_inputs_; }
    int hidden_units() const { return hidden_; }
    double final_training_loss() const { return final_loss_; }
    const Matrix& layer_weights(int layer) const { return layers_[layer].w; }
    const std::vector<double>& layer_bias(int layer) const { return layers_[layer].b; }
    const std::vector<double>& feature_means() const { return feat_mean_; }
    const std::vector<double>& feature_sds() const { return feat_sd_; }

private:
    struct Layer {
        Matrix w;  // out x in
        std::vector<double> b;
    };
    std::vector<double> forward(std::span<const double> z_std) const;

    int n_inputs_ = 0;
    int hidden_ = 3;
    std::array<Layer, 3> layers_;
    std::vector<double> feat_mean_, feat_sd_;
    double final_loss_ = 0.0;
};

// Panel first stage: one network per alternative, trained on all ordered
// period pairs with features (Z_t, Z_s) and target 1[Y_dt = 1].
class MLPChoiceProbability final : public ChoiceProbModel {
public:
    MLPChoiceProbability(const PanelDataset& data, MLPConfig cfg = {});

    // z is the concatenated (Z_t, Z_s) feature row of length 2 * layout.total()
    double probability(ChoiceOutcome d, std::span<const double> z) const override;

    double delta(ChoiceOutcome d, const PanelDataset& data, int i, int t, int s) const;

    const MLP& network(int outcome_index) const { return nets_[outcome_index]; }
    double training_loss(int outcome_index) const { return nets_[outcome_index].final_training_loss(); }

private:
    std::vector<MLP> nets_;
};

}  // namespace bundlechoice
