#include "bundlechoice/lad.hpp"

#include <chrono>
#include <cmath>

namespace bundlechoice {

PredictionIndicators indicators(double dx1, double dx2, double dw, ChoiceOutcome d) {
    const bool g1 = dx1 >= 0.0, l1 = dx1 <= 0.0;
    const bool g2 = dx2 >= 0.0, l2 = dx2 <= 0.0;
    const bool gb = dw >= 0.0, lb = dw <= 0.0;
    PredictionIndicators ind;
    switch (d.index()) {
        case 1:  // (1,0)
            ind.plus = g1 && l2 && lb;
            ind.minus = l1 && g2 && gb;
            break;
        case 2:  // (0,1)
            ind.plus = l1 && g2 && lb;
            ind.minus = g1 && l2 && gb;
            break;
        case 3:  // (1,1)
            ind.plus = g1 && g2 && gb;
            ind.minus = l1 && l2 && lb;
            break;
        default:  // (0,0): mirror of (1,1)
            ind.plus = l1 && l2 && lb;
            ind.minus = g1 && g2 && gb;
            break;
    }
    return ind;
}

double lad_loss(const PredictionIndicators& ind, double delta_p) {
    const bool wrong_plus = ind.plus && delta_p < 0.0;
    const bool wrong_minus = ind.minus && delta_p > 0.0;
    return (wrong_plus || wrong_minus) ? 2.0 : 0.0;
}

double lad_loss_debiased(const PredictionIndicators& ind, double delta_p_hat) {
    if (std::abs(delta_p_hat) > 1.0)
        throw InputError("lad_loss_debiased: delta_p_hat outside [-1, 1]");
    const int fired = ind.plus + ind.minus;
    const double bracket =
        std::abs(ind.plus - delta_p_hat) + std::abs(ind.minus + delta_p_hat);
    return bracket * fired + (1.0 - fired);
}

// ---------------------------------------------------------------------------
// free-coordinate layout
// ---------------------------------------------------------------------------

ParamVector LADLayout::unpack(std::span<const double> free) const {
    ParamVector theta;
    std::size_t at = 0;
    theta.beta.assign(1, 1.0);
    for (int j = 1; j < k1; ++j) theta.beta.push_back(free[at++]);
    theta.gamma.assign(1, 1.0);
    for (int j = 1; j < k2; ++j) theta.gamma.push_back(free[at++]);
    for (int j = 0; j < k3; ++j) theta.rho1.push_back(free[at++]);
    for (int j = 0; j < k3; ++j) theta.rho2.push_back(free[at++]);
    if (include_rho_b)
        for (int j = 0; j < k3; ++j) theta.rho_b.push_back(free[at++]);
    return theta;
}

std::vector<double> LADLayout::pack(const ParamVector& theta) const {
    if (theta.beta.empty() || theta.beta[0] != 1.0 || theta.gamma.empty() ||
        theta.gamma[0] != 1.0)
        throw InputError("LADLayout::pack: beta and gamma must lead with 1");
    std::vector<double> f;
    f.insert(f.end(), theta.beta.begin() + 1, theta.beta.end());
    f.insert(f.end(), theta.gamma.begin() + 1, theta.gamma.end());
    f.insert(f.end(), theta.rho1.begin(), theta.rho1.end());
    f.insert(f.end(), theta.rho2.begin(), theta.rho2.end());
    if (include_rho_b) f.insert(f.end(), theta.rho_b.begin(), theta.rho_b.end());
    if (static_cast<int>(f.size()) != n_free())
        throw InputError("LADLayout::pack: parameter blocks do not match the layout");
    return f;
}

std::vector<std::string> LADLayout::names() const {
    std::vector<std::string> out;
    for (int j = 2; j <= k1; ++j) out.push_back("beta_" + std::to_string(j));
    for (int j = 2; j <= k2; ++j) out.push_back("gamma_" + std::to_string(j));
    for (int j = 1; j <= k3; ++j) out.push_back("rho1_" + std::to_string(j));
    for (int j = 1; j <= k3; ++j) out.push_back("rho2_" + std::to_string(j));
    if (include_rho_b)
        for (int j = 1; j <= k3; ++j) out.push_back("rhob_" + std::to_string(j));
    return out;
}

// ---------------------------------------------------------------------------
// pairwise criterion cache
// ---------------------------------------------------------------------------

namespace {

// Per pair: index-difference blocks plus an 8-way loss table over the strict
// sign combinations of the three indexes. Exact zeros fall back to the weak
// inequalities with the stored deltas.
class PairCriterion {
public:
    PairCriterion(LADLayout layout, bool combine, int single_d)
        : layout_(layout), combine_(combine), single_d_(single_d) {
        stride_ = 2 * layout_.k1 + layout_.k2 + layout_.k3;
    }

    void add_pair(std::span<const double> dx1, std::span<const double> dx2,
                  std::span<const double> dw, std::span<const double> ds,
                  const std::array<double, 4>& delta) {
        diffs_.insert(diffs_.end(), dx1.begin(), dx1.end());
        diffs_.insert(diffs_.end(), dx2.begin(), dx2.end());
        diffs_.insert(diffs_.end(), dw.begin(), dw.end());
        diffs_.insert(diffs_.end(), ds.begin(), ds.end());
        deltas_.insert(deltas_.end(), delta.begin(), delta.end());
        for (int combo = 0; combo < 8; ++combo) {
            const double i1 = (combo & 4) ? 1.0 : -1.0;
            const double i2 = (combo & 2) ? 1.0 : -1.0;
            const double ib = (combo & 1) ? 1.0 : -1.0;
            tables_.push_back(loss_at(i1, i2, ib, delta));
        }
        ++n_pairs_;
    }

    double loss_at(double i1, double i2, double ib, const std::array<double, 4>& delta) const {
        double total = 0.0;
        for (int k = 0; k < 4; ++k) {
            if (!combine_ && k != single_d_) continue;
            total += lad_loss_debiased(indicators(i1, i2, ib, ChoiceOutcome::from_index(k)),
                                       delta[k]);
        }
        return total;
    }

    double eval(std::span<const double> free) const {
        const int k1 = layout_.k1, k2 = layout_.k2, k3 = layout_.k3;
        const double* beta = free.data();            // k1 - 1 entries
        const double* gamma = beta + (k1 - 1);       // k2 - 1 entries
        const double* rho1 = gamma + (k2 - 1);       // k3
        const double* rho2 = rho1 + k3;              // k3
        const double* rho_b = rho2 + k3;             // k3 when present
        double total = 0.0;
        for (long p = 0; p < n_pairs_; ++p) {
            const double* d = diffs_.data() + p * stride_;
            const double* dx1 = d;
            const double* dx2 = d + k1;
            const double* dw = d + 2 * k1;
            const double* ds = d + 2 * k1 + k2;
            double i1 = dx1[0], i2 = dx2[0], ib = dw[0];
            for (int j = 1; j < k1; ++j) {
                i1 += dx1[j] * beta[j - 1];
                i2 += dx2[j] * beta[j - 1];
            }
            for (int j = 1; j < k2; ++j) ib += dw[j] * gamma[j - 1];
            for (int j = 0; j < k3; ++j) {
                i1 += ds[j] * rho1[j];
                i2 += ds[j] * rho2[j];
                if (layout_.include_rho_b) ib += ds[j] * rho_b[j];
            }
            if (i1 != 0.0 && i2 != 0.0 && ib != 0.0) {
                const int combo = ((i1 > 0.0) << 2) | ((i2 > 0.0) << 1) | (ib > 0.0);
                total += tables_[p * 8 + combo];
            } else {
                const std::array<double, 4> delta = {deltas_[p * 4], deltas_[p * 4 + 1],
                                                     deltas_[p * 4 + 2], deltas_[p * 4 + 3]};
                total += loss_at(i1, i2, ib, delta);
            }
        }
        return total;
    }

    long pairs() const { return n_pairs_; }

private:
    LADLayout layout_;
    bool combine_;
    int single_d_;
    int stride_ = 0;
    long n_pairs_ = 0;
    std::vector<double> diffs_;
    std::vector<double> tables_;
    std::vector<double> deltas_;
};

std::vector<double> row_diff(const Matrix& m, int i, int j_row) {
    std::vector<double> out(m.cols());
    for (int c = 0; c < m.cols(); ++c) out[c] = m(i, c) - m(j_row, c);
    return out;
}

PairCriterion build_cross_criterion(const CrossSectionDataset& data,
                                    const std::vector<std::array<double, 4>>& row_probs,
                                    const LADLayout& layout, const LADConfig& cfg) {
    PairCriterion crit(layout, cfg.combine_all_alternatives, cfg.single_alternative);
    for (int i = 0; i < data.n - 1; ++i)
        for (int m = i + 1; m < data.n; ++m) {
            std::array<double, 4> delta;
            for (int k = 0; k < 4; ++k) delta[k] = row_probs[i][k] - row_probs[m][k];
            crit.add_pair(row_diff(data.x1, i, m), row_diff(data.x2, i, m),
                          row_diff(data.w, i, m), row_diff(data.s, i, m), delta);
        }
    return crit;
}

PairCriterion build_panel_criterion(const PanelDataset& data,
                                    const std::vector<std::array<double, 4>>& pair_deltas,
                                    const LADLayout& layout, const LADConfig& cfg) {
    PairCriterion crit(layout, cfg.combine_all_alternatives, cfg.single_alternative);
    int at = 0;
    for (int i = 0; i < data.n; ++i)
        for (int t = 1; t < data.t_periods; ++t)
            for (int s = 0; s < t; ++s) {
                const int rt = data.row(i, t), rs = data.row(i, s);
                crit.add_pair(row_diff(data.x1, rt, rs), row_diff(data.x2, rt, rs),
                              row_diff(data.w, rt, rs), row_diff(data.s, rt, rs),
                              pair_deltas[at++]);
            }
    return crit;
}

std::vector<std::array<double, 4>> cross_row_probabilities(const CrossSectionDataset& data,
                                                           const ChoiceProbModel& model) {
    std::vector<std::array<double, 4>> probs(data.n);
    for (int i = 0; i < data.n; ++i) {
        const std::vector<double> z = feature_row(data, i);
        for (int k = 0; k < 4; ++k)
            probs[i][k] = model.probability(ChoiceOutcome::from_index(k), z);
    }
    return probs;
}

std::vector<std::array<double, 4>> panel_pair_deltas(const PanelDataset& data,
                                                     const MLPChoiceProbability& model) {
    std::vector<std::array<double, 4>> deltas;
    deltas.reserve(static_cast<std::size_t>(data.n) * data.t_periods * (data.t_periods - 1) / 2);
    for (int i = 0; i < data.n; ++i)
        for (int t = 1; t < data.t_periods; ++t)
            for (int s = 0; s < t; ++s) {
                std::array<double, 4> d;
                for (int k = 0; k < 4; ++k)
                    d[k] = model.delta(ChoiceOutcome::from_index(k), data, i, t, s);
                deltas.push_back(d);
            }
    return deltas;
}

LADLayout layout_for(int k1, int k2, int k3, const LADConfig& cfg) {
    LADLayout layout;
    layout.k1 = k1;
    layout.k2 = k2;
    layout.k3 = k3;
    layout.include_rho_b = cfg.include_rho_b && k3 > 0;
    return layout;
}

EstimationResult minimize_criterion(const PairCriterion& crit, const LADLayout& layout,
                                    const LADConfig& cfg, std::uint64_t seed,
                                    bool bootstrap_run) {
    const int dim = layout.n_free();
    EstimationResult res;
    res.free_names = layout.names();
    if (dim == 0) {
        res.estimate = layout.unpack({});
        res.criterion = crit.eval({});
        return res;
    }
    DEConfig de = cfg.de;
    if (de.lower.empty()) {
        de.lower.assign(dim, -cfg.search_bound);
        de.upper.assign(dim, cfg.search_bound);
    }
    if (de.population_size <= 0) de.population_size = 10 * dim;
    if (bootstrap_run && cfg.bootstrap_de_generations > 0)
        de.max_generations = cfg.bootstrap_de_generations;
    de.seed = derive_seed(seed, 0, SeedPurpose::de_stage1);
    const DEResult opt =
        de_minimize([&crit](std::span<const double> f) { return crit.eval(f); }, de);
    res.estimate = layout.unpack(opt.argmin);
    res.free_values = opt.argmin;
    res.criterion = opt.min_value;
    return res;
}

}  // namespace

double lad_objective_cross(const CrossSectionDataset& data, const ParamVector& theta,
                           const ChoiceProbModel& model, const LADConfig& cfg) {
    LADConfig local = cfg;
    local.include_rho_b = !theta.rho_b.empty();
    const LADLayout layout = layout_for(data.k1(), data.k2(), data.k3(), local);
    const PairCriterion crit =
        build_cross_criterion(data, cross_row_probabilities(data, model), layout, local);
    return crit.eval(layout.pack(theta));
}

double lad_objective_panel(const PanelDataset& data, const ParamVector& theta,
                           const MLPChoiceProbability& model, const LADConfig& cfg) {
    return lad_objective_panel(
        data, theta,
        [&model, &data](int i, int t, int s) {
            std::array<double, 4> d;
            for (int k = 0; k < 4; ++k)
                d[k] = model.delta(ChoiceOutcome::from_index(k), data, i, t, s);
            return d;
        },
        cfg);
}

double lad_objective_panel(const PanelDataset& data, const ParamVector& theta,
                           const PanelDeltaFn& deltas, const LADConfig& cfg) {
    LADConfig local = cfg;
    local.include_rho_b = !theta.rho_b.empty();
    const LADLayout layout = layout_for(data.k1(), data.k2(), data.k3(), local);
    std::vector<std::array<double, 4>> pair_deltas;
    for (int i = 0; i < data.n; ++i)
        for (int t = 1; t < data.t_periods; ++t)
            for (int s = 0; s < t; ++s) pair_deltas.push_back(deltas(i, t, s));
    const PairCriterion crit = build_panel_criterion(data, pair_deltas, layout, local);
    return crit.eval(layout.pack(theta));
}

EstimationResult estimate_lad_cross(const CrossSectionDataset& data, const LADConfig& cfg,
                                    std::uint64_t seed) {
    if (data.n < 2) throw InputError("estimate_lad_cross: need at least two observations");
    const auto t0 = std::chrono::steady_clock::now();
    NWConfig nw_cfg = cfg.nw;
    const NWChoiceProbability model(data, nw_cfg);

    std::vector<std::array<double, 4>> probs(data.n);
    long clamped_rows = 0;
    for (int i = 0; i < data.n; ++i) {
        bool clamped = false;
        probs[i] = model.probabilities(feature_row(data, i), &clamped);
        clamped_rows += clamped;
    }

    const LADLayout layout = layout_for(data.k1(), data.k2(), data.k3(), cfg);
    const PairCriterion crit = build_cross_criterion(data, probs, layout, cfg);
    EstimationResult res = minimize_criterion(crit, layout, cfg, seed, false);
    res.first_stage_clamp_rate = static_cast<double>(clamped_rows) / data.n;
    res.bandwidths_stage1 = model.bandwidths();
    res.seed = seed;
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

EstimationResult estimate_lad_panel(const PanelDataset& data, const LADConfig& cfg,
                                    std::uint64_t seed) {
    if (data.n < 1 || data.t_periods < 2)
        throw InputError("estimate_lad_panel: need a two-period panel");
    const auto t0 = std::chrono::steady_clock::now();
    MLPConfig mlp_cfg = cfg.mlp;
    mlp_cfg.seed = derive_seed(seed, 0, SeedPurpose::first_stage);
    const MLPChoiceProbability model(data, mlp_cfg);

    const LADLayout layout = layout_for(data.k1(), data.k2(), data.k3(), cfg);
    const PairCriterion crit = build_panel_criterion(data, panel_pair_deltas(data, model),
                                                     layout, cfg);
    EstimationResult res = minimize_criterion(crit, layout, cfg, seed, false);
    double loss = 0.0;
    for (int k = 0; k < 4; ++k) loss += model.training_loss(k);
    res.first_stage_loss = loss / 4.0;
    res.seed = seed;
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

namespace {

template <class Dataset, class Estimator>
EstimationResult bootstrap_lad(const Dataset& data, const LADConfig& cfg, int b_draws,
                               std::uint64_t seed, const Estimator& estimate) {
    if (b_draws < 2) throw InputError("bootstrap_lad: need B >= 2");
    EstimationResult res = estimate(data, cfg, seed);
    const int n_free = static_cast<int>(res.free_values.size());
    std::vector<std::vector<double>> draws;
    draws.reserve(b_draws);
    LADConfig draw_cfg = cfg;
    if (cfg.bootstrap_de_generations > 0)
        draw_cfg.de.max_generations = cfg.bootstrap_de_generations;
    for (int b = 0; b < b_draws; ++b) {
        const std::uint64_t draw_seed = derive_seed(seed, 5000 + b, SeedPurpose::bootstrap);
        try {
            const Dataset star = resample(data, draw_seed);
            draws.push_back(estimate(star, draw_cfg, draw_seed).free_values);
        } catch (const EstimationError&) {
            ++res.excluded_draws;
        }
    }
    if (static_cast<int>(draws.size()) < 2)
        throw EstimationError("bootstrap_lad: fewer than two usable draws");
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

}  // namespace

EstimationResult bootstrap_lad_cross(const CrossSectionDataset& data, const LADConfig& cfg,
                                     int b_draws, std::uint64_t seed) {
    return bootstrap_lad(data, cfg, b_draws, seed,
                         [](const CrossSectionDataset& d, const LADConfig& c, std::uint64_t s) {
                             return estimate_lad_cross(d, c, s);
                         });
}

EstimationResult bootstrap_lad_panel(const PanelDataset& data, const LADConfig& cfg, int b_draws,
                                     std::uint64_t seed) {
    return bootstrap_lad(data, cfg, b_draws, seed,
                         [](const PanelDataset& d, const LADConfig& c, std::uint64_t s) {
                             return estimate_lad_panel(d, c, s);
                         });
}

}  // namespace bundlechoice
