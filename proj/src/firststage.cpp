#include "bundlechoice/firststage.hpp"

#include <cmath>
#include <string>

namespace bundlechoice {

// ---------------------------------------------------------------------------
// feature layout
// ---------------------------------------------------------------------------

namespace {

template <class Dataset>
FeatureLayout layout_from(const Dataset& data) {
    FeatureLayout l;
    l.k1 = data.k1();
    l.k2 = data.k2();
    l.k3 = data.k3();
    l.discrete.reserve(l.total());
    l.categories.reserve(l.total());
    for (int rep = 0; rep < 2; ++rep)
        for (int j = 0; j < l.k1; ++j) {
            l.discrete.push_back(data.x_discrete[j]);
            l.categories.push_back(data.x_categories[j]);
        }
    for (int j = 0; j < l.k2; ++j) {
        l.discrete.push_back(data.w_discrete[j]);
        l.categories.push_back(data.w_categories[j]);
    }
    for (int j = 0; j < l.k3; ++j) {
        l.discrete.push_back(data.s_discrete[j]);
        l.categories.push_back(data.s_categories[j]);
    }
    return l;
}

template <class Dataset>
void fill_feature_row(const Dataset& data, int row, std::vector<double>& out) {
    out.clear();
    for (double v : data.x1.row(row)) out.push_back(v);
    for (double v : data.x2.row(row)) out.push_back(v);
    for (double v : data.w.row(row)) out.push_back(v);
    for (double v : data.s.row(row)) out.push_back(v);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

FeatureLayout FeatureLayout::from_cross(const CrossSectionDataset& data) { return layout_from(data); }
FeatureLayout FeatureLayout::from_panel(const PanelDataset& data) { return layout_from(data); }

std::vector<double> feature_row(const CrossSectionDataset& data, int i) {
    std::vector<double> out;
    fill_feature_row(data, i, out);
    return out;
}

std::vector<double> feature_row(const PanelDataset& data, int i, int t) {
    std::vector<double> out;
    fill_feature_row(data, data.row(i, t), out);
    return out;
}

// ---------------------------------------------------------------------------
// Nadaraya-Watson
// ---------------------------------------------------------------------------

namespace {

double nw_weight(std::span<const double> train_row, std::span<const double> z,
                 const FeatureLayout& layout, std::span<const double> bandwidths, double lambda,
                 int order) {
    double w = 1.0;
    for (int c = 0; c < layout.total(); ++c) {
        if (layout.discrete[c]) {
            w *= aitchison_aitken(lambda, static_cast<int>(train_row[c]), static_cast<int>(z[c]),
                                  layout.categories[c] > 0 ? layout.categories[c] : 2);
        } else {
            w *= gaussian_kernel(order, (z[c] - train_row[c]) / bandwidths[c]);
        }
        if (w == 0.0) return 0.0;
    }
    return w;
}

std::array<double, 4> nw_ratio(const Matrix& features, std::span<const int> target,
                               const FeatureLayout& layout, std::span<const double> z,
                               std::span<const double> bandwidths, double lambda, int order,
                               bool* clamped) {
    double denom = 0.0;
    std::array<double, 4> numer = {0.0, 0.0, 0.0, 0.0};
    for (int i = 0; i < features.rows(); ++i) {
        const double w = nw_weight(features.row(i), z, layout, bandwidths, lambda, order);
        denom += w;
        numer[target[i]] += w;
    }
    if (denom == 0.0 || !std::isfinite(denom))
        throw EstimationError("nw_probability: zero total kernel weight at query point");
    bool any_clamped = false;
    std::array<double, 4> p;
    for (int k = 0; k < 4; ++k) {
        const double raw = numer[k] / denom;
        p[k] = std::min(1.0, std::max(0.0, raw));
        any_clamped = any_clamped || p[k] != raw;
    }
    if (clamped) *clamped = any_clamped;
    return p;
}

}  // namespace

double nw_probability(const CrossSectionDataset& data, ChoiceOutcome d, std::span<const double> z,
                      std::span<const double> bandwidths, double discrete_lambda,
                      int kernel_order) {
    const FeatureLayout layout = FeatureLayout::from_cross(data);
    Matrix features(data.n, layout.total());
    std::vector<int> target(data.n);
    std::vector<double> row;
    for (int i = 0; i < data.n; ++i) {
        fill_feature_row(data, i, row);
        for (int c = 0; c < layout.total(); ++c) features(i, c) = row[c];
        target[i] = data.choice[i].index();
    }
    return nw_ratio(features, target, layout, z, bandwidths, discrete_lambda, kernel_order,
                    nullptr)[d.index()];
}

NWChoiceProbability::NWChoiceProbability(const CrossSectionDataset& data, NWConfig cfg)
    : layout_(FeatureLayout::from_cross(data)), order_(cfg.kernel_order) {
    if (data.n < 1) throw InputError("NWChoiceProbability: empty dataset");
    features_ = Matrix(data.n, layout_.total());
    target_.resize(data.n);
    std::vector<double> row;
    for (int i = 0; i < data.n; ++i) {
        fill_feature_row(data, i, row);
        for (int c = 0; c < layout_.total(); ++c) features_(i, c) = row[c];
        target_[i] = data.choice[i].index();
    }
    lambda_ = cfg.discrete_lambda >= 0.0 ? cfg.discrete_lambda : 1.0 / data.n;

    bandwidths_.assign(layout_.total(), 0.0);
    std::vector<double> col(data.n);
    for (int c = 0; c < layout_.total(); ++c) {
        if (layout_.discrete[c]) continue;
        for (int i = 0; i < data.n; ++i) col[i] = features_(i, c);
        bandwidths_[c] = cfg.silverman_constant * sample_sd(col) *
                         std::pow(static_cast<double>(data.n), -0.2);
        if (!(bandwidths_[c] > 0.0))
            throw EstimationError("NWChoiceProbability: zero-variance continuous column");
    }
}

std::array<double, 4> NWChoiceProbability::probabilities(std::span<const double> z,
                                                         bool* clamped) const {
    return nw_ratio(features_, target_, layout_, z, bandwidths_, lambda_, order_, clamped);
}

double NWChoiceProbability::probability(ChoiceOutcome d, std::span<const double> z) const {
    return probabilities(z)[d.index()];
}

// ---------------------------------------------------------------------------
// MLP
// ---------------------------------------------------------------------------

MLP::MLP(int n_inputs, const MLPConfig& cfg) : n_inputs_(n_inputs), hidden_(cfg.neurons_per_layer) {
    if (n_inputs < 1 || hidden_ < 1) throw ConfigError("MLP: layer sizes must be positive");
    layers_[0].w = Matrix(hidden_, n_inputs_);
    layers_[0].b.assign(hidden_, 0.0);
    layers_[1].w = Matrix(hidden_, hidden_);
    layers_[1].b.assign(hidden_, 0.0);
    layers_[2].w = Matrix(1, hidden_);
    layers_[2].b.assign(1, 0.0);
    feat_mean_.assign(n_inputs_, 0.0);
    feat_sd_.assign(n_inputs_, 1.0);
}

void MLP::randomize_weights(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& layer : layers_) {
        for (double& v : layer.w.data()) v = rng.uniform() - 0.5;
        for (double& v : layer.b) v = rng.uniform() - 0.5;
    }
}

void MLP::set_standardization(std::vector<double> means, std::vector<double> sds) {
    feat_mean_ = std::move(means);
    feat_sd_ = std::move(sds);
}

std::vector<double> MLP::parameters() const {
    std::vector<double> p;
    for (const auto& layer : layers_) {
        p.insert(p.end(), layer.w.data().begin(), layer.w.data().end());
        p.insert(p.end(), layer.b.begin(), layer.b.end());
    }
    return p;
}

void MLP::set_parameters(std::span<const double> p) {
    std::size_t at = 0;
    for (auto& layer : layers_) {
        for (double& v : layer.w.data()) v = p[at++];
        for (double& v : layer.b) v = p[at++];
    }
    if (at != p.size()) throw InputError("MLP::set_parameters: length mismatch");
}

std::vector<double> MLP::forward(std::span<const double> z_std) const {
    // activations for all layers concatenated: a1 (hidden), a2 (hidden), output
    std::vector<double> acts;
    acts.reserve(2 * hidden_ + 1);
    std::vector<double> cur(z_std.begin(), z_std.end());
    for (int l = 0; l < 3; ++l) {
        const auto& layer = layers_[l];
        std::vector<double> next(layer.b.size());
        for (int o = 0; o < static_cast<int>(layer.b.size()); ++o) {
            double acc = layer.b[o];
            for (int in = 0; in < layer.w.cols(); ++in) acc += layer.w(o, in) * cur[in];
            next[o] = sigmoid(acc);
        }
        acts.insert(acts.end(), next.begin(), next.end());
        cur = std::move(next);
    }
    return acts;
}

double MLP::predict(std::span<const double> z) const {
    if (static_cast<int>(z.size()) != n_inputs_) throw InputError("MLP::predict: dimension mismatch");
    std::vector<double> std_row(n_inputs_);
    for (int c = 0; c < n_inputs_; ++c) std_row[c] = (z[c] - feat_mean_[c]) / feat_sd_[c];
    return forward(std_row).back();
}

double MLP::loss(const Matrix& features, std::span<const double> targets) const {
    double total = 0.0;
    std::vector<double> std_row(n_inputs_);
    for (int i = 0; i < features.rows(); ++i) {
        for (int c = 0; c < n_inputs_; ++c)
            std_row[c] = (features(i, c) - feat_mean_[c]) / feat_sd_[c];
        const double e = forward(std_row).back() - targets[i];
        total += e * e;
    }
    return total / features.rows();
}

std::vector<double> MLP::loss_gradient(const Matrix& features,
                                       std::span<const double> targets) const {
    const int h = hidden_;
    Matrix gw1(h, n_inputs_), gw2(h, h), gw3(1, h);
    std::vector<double> gb1(h, 0.0), gb2(h, 0.0), gb3(1, 0.0);

    std::vector<double> std_row(n_inputs_);
    const double scale = 2.0 / features.rows();
    for (int i = 0; i < features.rows(); ++i) {
        for (int c = 0; c < n_inputs_; ++c)
            std_row[c] = (features(i, c) - feat_mean_[c]) / feat_sd_[c];
        const std::vector<double> acts = forward(std_row);
        std::span<const double> a1(acts.data(), h);
        std::span<const double> a2(acts.data() + h, h);
        const double out = acts[2 * h];

        const double d3 = scale * (out - targets[i]) * out * (1.0 - out);
        gb3[0] += d3;
        for (int j = 0; j < h; ++j) gw3(0, j) += d3 * a2[j];

        std::vector<double> d2(h);
        for (int j = 0; j < h; ++j) d2[j] = layers_[2].w(0, j) * d3 * a2[j] * (1.0 - a2[j]);
        for (int j = 0; j < h; ++j) {
            gb2[j] += d2[j];
            for (int k = 0; k < h; ++k) gw2(j, k) += d2[j] * a1[k];
        }

        std::vector<double> d1(h, 0.0);
        for (int k = 0; k < h; ++k) {
            double acc = 0.0;
            for (int j = 0; j < h; ++j) acc += layers_[1].w(j, k) * d2[j];
            d1[k] = acc * a1[k] * (1.0 - a1[k]);
        }
        for (int k = 0; k < h; ++k) {
            gb1[k] += d1[k];
            for (int c = 0; c < n_inputs_; ++c) gw1(k, c) += d1[k] * std_row[c];
        }
    }

    std::vector<double> g;
    g.insert(g.end(), gw1.data().begin(), gw1.data().end());
    g.insert(g.end(), gb1.begin(), gb1.end());
    g.insert(g.end(), gw2.data().begin(), gw2.data().end());
    g.insert(g.end(), gb2.begin(), gb2.end());
    g.insert(g.end(), gw3.data().begin(), gw3.data().end());
    g.insert(g.end(), gb3.begin(), gb3.end());
    return g;
}

MLP MLP::train(const Matrix& features, std::span<const double> targets, const MLPConfig& cfg) {
    if (features.rows() < 1) throw InputError("MLP::train: empty training set");
    if (static_cast<int>(targets.size()) != features.rows())
        throw InputError("MLP::train: target length mismatch");
    for (double v : features.data())
        if (!std::isfinite(v)) throw InputError("MLP::train: non-finite feature");

    MLP net(features.cols(), cfg);
    net.randomize_weights(cfg.seed);

    // per-column standardization; constant columns pass through unscaled
    std::vector<double> means(features.cols()), sds(features.cols());
    for (int c = 0; c < features.cols(); ++c) {
        double m = 0.0;
        for (int i = 0; i < features.rows(); ++i) m += features(i, c);
        m /= features.rows();
        double ss = 0.0;
        for (int i = 0; i < features.rows(); ++i)
            ss += (features(i, c) - m) * (features(i, c) - m);
        const double sd = features.rows() > 1 ? std::sqrt(ss / (features.rows() - 1)) : 0.0;
        means[c] = m;
        sds[c] = sd > 0.0 ? sd : 1.0;
    }
    net.set_standardization(std::move(means), std::move(sds));

    std::vector<double> params = net.parameters();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::vector<double> grad = net.loss_gradient(features, targets);
        for (std::size_t j = 0; j < params.size(); ++j) params[j] -= cfg.learning_rate * grad[j];
        net.set_parameters(params);
    }
    net.final_loss_ = net.loss(features, targets);
    if (!std::isfinite(net.final_loss_))
        throw EstimationError("MLP::train: non-finite training loss after " +
                              std::to_string(cfg.epochs) + " epochs");
    return net;
}

// ---------------------------------------------------------------------------
// panel first stage
// ---------------------------------------------------------------------------

MLPChoiceProbability::MLPChoiceProbability(const PanelDataset& data, MLPConfig cfg) {
    const FeatureLayout layout = FeatureLayout::from_panel(data);
    const int T = data.t_periods;
    const int pairs_per_agent = T * (T - 1);  // ordered pairs
    Matrix features(data.n * pairs_per_agent, 2 * layout.total());
    std::vector<std::array<double, 4>> targets(data.n * pairs_per_agent);

    int at = 0;
    std::vector<double> zt, zs;
    for (int i = 0; i < data.n; ++i) {
        for (int t = 0; t < T; ++t)
            for (int s = 0; s < T; ++s) {
                if (t == s) continue;
                zt = feature_row(data, i, t);
                zs = feature_row(data, i, s);
                for (int c = 0; c < layout.total(); ++c) {
                    features(at, c) = zt[c];
                    features(at, layout.total() + c) = zs[c];
                }
                const int y = data.choice[data.row(i, t)].index();
                for (int k = 0; k < 4; ++k) targets[at][k] = (y == k) ? 1.0 : 0.0;
                ++at;
            }
    }

    nets_.reserve(4);
    std::vector<double> target_col(features.rows());
    for (int k = 0; k < 4; ++k) {
        for (int r = 0; r < features.rows(); ++r) target_col[r] = targets[r][k];
        MLPConfig per = cfg;
        per.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(k), SeedPurpose::first_stage);
        nets_.push_back(MLP::train(features, target_col, per));
    }
}

double MLPChoiceProbability::probability(ChoiceOutcome d, std::span<const double> z) const {
    const double p = nets_[d.index()].predict(z);
    return std::min(1.0, std::max(0.0, p));
}

double MLPChoiceProbability::delta(ChoiceOutcome d, const PanelDataset& data, int i, int t,
                                   int s) const {
    const std::vector<double> zt = feature_row(data, i, t);
    const std::vector<double> zs = feature_row(data, i, s);
    std::vector<double> ts;
    ts.reserve(zt.size() * 2);
    ts.insert(ts.end(), zt.begin(), zt.end());
    ts.insert(ts.end(), zs.begin(), zs.end());
    std::vector<double> st;
    st.reserve(zt.size() * 2);
    st.insert(st.end(), zs.begin(), zs.end());
    st.insert(st.end(), zt.begin(), zt.end());
    return probability(d, ts) - probability(d, st);
}

}  // namespace bundlechoice
