#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <map>
#include <vector>

#include "bundlechoice/lad.hpp"

using namespace bundlechoice;

namespace {

// fixed per-row probabilities keyed by the exact feature bytes
class TableModel final : public ChoiceProbModel {
public:
    void set(const std::vector<double>& z, const std::array<double, 4>& p) { table_[key(z)] = p; }
    double probability(ChoiceOutcome d, std::span<const double> z) const override {
        return table_.at(key(std::vector<double>(z.begin(), z.end())))[d.index()];
    }

private:
    static std::string key(const std::vector<double>& z) {
        std::string k(z.size() * sizeof(double), '\0');
        std::memcpy(k.data(), z.data(), k.size());
        return k;
    }
    std::map<std::string, std::array<double, 4>> table_;
};

CrossSectionDataset pair_toy(double x1_i, double x1_m, double x2_i, double x2_m, double w_i,
                             double w_m) {
    CrossSectionDataset d;
    d.n = 2;
    d.x1 = Matrix(2, 1);
    d.x2 = Matrix(2, 1);
    d.w = Matrix(2, 1);
    d.s = Matrix(2, 0);
    d.x_discrete = {0};
    d.w_discrete = {0};
    d.x_categories = {0};
    d.w_categories = {0};
    d.x1(0, 0) = x1_i;
    d.x1(1, 0) = x1_m;
    d.x2(0, 0) = x2_i;
    d.x2(1, 0) = x2_m;
    d.w(0, 0) = w_i;
    d.w(1, 0) = w_m;
    d.choice = {ChoiceOutcome{1, 0}, ChoiceOutcome{0, 0}};
    return d;
}

}  // namespace

TEST_CASE("indicator sign patterns") {
    // (1,0): (+,-,-) fires the plus indicator
    auto ind = indicators(0.5, -0.3, -0.2, ChoiceOutcome{1, 0});
    CHECK(ind.plus == 1);
    CHECK(ind.minus == 0);
    // weak inequalities: all-zero indexes fire both
    ind = indicators(0.0, 0.0, 0.0, ChoiceOutcome{1, 0});
    CHECK(ind.plus == 1);
    CHECK(ind.minus == 1);
    // (1,1): (+,+,+)
    ind = indicators(0.5, 0.5, 0.5, ChoiceOutcome{1, 1});
    CHECK(ind.plus == 1);
    CHECK(ind.minus == 0);
    // (0,0) mirrors (1,1)
    for (double a : {-0.7, 0.4})
        for (double b : {-0.2, 0.9})
            for (double c : {-0.5, 0.3}) {
                const auto zz = indicators(a, b, c, ChoiceOutcome{0, 0});
                const auto oo = indicators(a, b, c, ChoiceOutcome{1, 1});
                CHECK(zz.plus == oo.minus);
                CHECK(zz.minus == oo.plus);
            }
    // (0,1): (-,+,-)
    ind = indicators(-1.0, 1.0, -1.0, ChoiceOutcome{0, 1});
    CHECK(ind.plus == 1);
    CHECK(ind.minus == 0);
    // both indicators only at exact zeros
    Rng rng(4);
    for (int rep = 0; rep < 200; ++rep) {
        const double a = rng.normal(), b = rng.normal(), c = rng.normal();
        for (int k = 0; k < 4; ++k) {
            const auto r = indicators(a, b, c, ChoiceOutcome::from_index(k));
            if (r.plus && r.minus) CHECK((a == 0.0 || b == 0.0 || c == 0.0));
        }
    }
}

TEST_CASE("oracle loss takes values in {0, 2}") {
    PredictionIndicators plus{1, 0}, minus{0, 1}, none{0, 0};
    CHECK(lad_loss(plus, 0.4) == 0.0);
    CHECK(lad_loss(plus, 0.0) == 0.0);
    CHECK(lad_loss(plus, -0.4) == 2.0);
    CHECK(lad_loss(minus, -0.4) == 0.0);
    CHECK(lad_loss(minus, 0.4) == 2.0);
    CHECK(lad_loss(none, 0.9) == 0.0);
    CHECK(lad_loss(none, -0.9) == 0.0);
}

TEST_CASE("debiased loss values and range") {
    PredictionIndicators plus{1, 0}, none{0, 0};
    CHECK(lad_loss_debiased(plus, 0.3) == doctest::Approx(1.0));
    CHECK(lad_loss_debiased(plus, -0.3) == doctest::Approx(1.6));
    CHECK(lad_loss_debiased(none, 0.77) == doctest::Approx(1.0));
    CHECK_THROWS_AS(lad_loss_debiased(plus, 1.2), InputError);
    // range [1, 3] over indicator states and the delta grid
    for (int state = 0; state < 4; ++state) {
        const PredictionIndicators ind{static_cast<std::uint8_t>(state & 1),
                                       static_cast<std::uint8_t>((state >> 1) & 1)};
        for (double dp = -1.0; dp <= 1.0; dp += 0.05) {
            const double q = lad_loss_debiased(ind, dp);
            CHECK(q >= 1.0 - 1e-12);
            CHECK(q <= 3.0 + 1e-12);
        }
    }
}

TEST_CASE("loss equivalences with exact delta_p") {
    // {q = 0} <=> {q^D = 1} and {q = 2} <=> {q^D = 1 + 2|dp|} away from dp = 0
    const PredictionIndicators states[] = {{0, 0}, {1, 0}, {0, 1}};
    for (const auto& ind : states)
        for (double dp : {-1.0, -0.6, -0.2, 0.2, 0.6, 1.0}) {
            const double q = lad_loss(ind, dp);
            const double qd = lad_loss_debiased(ind, dp);
            if (q == 0.0) CHECK(qd == doctest::Approx(1.0));
            if (q == 2.0) CHECK(qd == doctest::Approx(1.0 + 2.0 * std::abs(dp)));
            CHECK((q == 0.0 || q == 2.0));
        }
    // at exact index zeros both indicators fire; the debiased loss is 3
    const PredictionIndicators both{1, 1};
    for (double dp : {-0.8, 0.0, 0.8})
        CHECK(lad_loss_debiased(both, dp) == doctest::Approx(3.0));
}

TEST_CASE("cross objective: one informative pair plus three silent alternatives") {
    // signs (+,-,-): only the (1,0) plus indicator fires
    CrossSectionDataset d = pair_toy(1.0, 0.0, 0.0, 1.0, 0.0, 1.0);
    TableModel model;
    model.set(feature_row(d, 0), {0.1, 0.5, 0.2, 0.2});
    model.set(feature_row(d, 1), {0.1, 0.1, 0.4, 0.4});  // delta_(1,0) = 0.4
    ParamVector theta;
    theta.beta = {1.0};
    theta.gamma = {1.0};
    CHECK(lad_objective_cross(d, theta, model) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("cross objective: uninformative sign pattern scores the constant") {
    // signs (+,+,-) are uninformative for every alternative
    CrossSectionDataset d = pair_toy(1.0, 0.0, 1.0, 0.0, 0.0, 1.0);
    TableModel model;
    model.set(feature_row(d, 0), {0.3, 0.3, 0.2, 0.2});
    model.set(feature_row(d, 1), {0.25, 0.3, 0.25, 0.2});
    ParamVector theta;
    theta.beta = {1.0};
    theta.gamma = {1.0};
    CHECK(lad_objective_cross(d, theta, model) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("indicators are invariant to positive rescaling of the indexes") {
    Rng rng(12);
    for (int rep = 0; rep < 100; ++rep) {
        const double a = rng.normal(), b = rng.normal(), c = rng.normal();
        const double lambda = 0.1 + 5.0 * rng.uniform();
        for (int k = 0; k < 4; ++k) {
            const auto base = indicators(a, b, c, ChoiceOutcome::from_index(k));
            const auto scaled = indicators(lambda * a, lambda * b, lambda * c,
                                           ChoiceOutcome::from_index(k));
            CHECK(base.plus == scaled.plus);
            CHECK(base.minus == scaled.minus);
        }
    }
}

TEST_CASE("estimate_lad_cross recovers design-1 parameters") {
    const DesignSpec spec = make_design(1);
    const CrossSectionDataset d = simulate_cross(spec, 300, 515);
    const EstimationResult res = estimate_lad_cross(d, LADConfig{}, 77);
    CHECK(std::abs(res.estimate.beta[1] - 1.0) < 1.0);
    CHECK(std::abs(res.estimate.gamma[1] - 1.0) < 1.0);
    CHECK(std::abs(res.estimate.rho1[0] - 1.0) < 1.0);
    CHECK(std::abs(res.estimate.rho2[0] - 1.0) < 1.0);
    CHECK(res.estimate.rho_b.empty());
    CHECK(res.first_stage_clamp_rate >= 0.0);
    REQUIRE(res.free_names.size() == 4);
    CHECK(res.free_names[0] == "beta_2");
    CHECK(res.free_names[2] == "rho1_1");
}

TEST_CASE("objective is piecewise constant and permutation invariant") {
    const DesignSpec spec = make_design(1);
    const CrossSectionDataset d = simulate_cross(spec, 60, 2029);
    const NWChoiceProbability model(d);
    ParamVector theta;
    theta.beta = {1.0, 0.7};
    theta.gamma = {1.0, -0.4};
    theta.rho1 = {0.9};
    theta.rho2 = {1.1};
    const double base = lad_objective_cross(d, theta, model);
    ParamVector nudged = theta;
    nudged.beta[1] += 1e-12;
    nudged.rho1[0] -= 1e-12;
    CHECK(lad_objective_cross(d, nudged, model) == base);

    CrossSectionDataset perm = d;
    for (int i = 0; i < d.n; ++i) {
        const int src = (i * 13 + 7) % d.n;
        for (int j = 0; j < d.k1(); ++j) {
            perm.x1(i, j) = d.x1(src, j);
            perm.x2(i, j) = d.x2(src, j);
        }
        for (int j = 0; j < d.k2(); ++j) perm.w(i, j) = d.w(src, j);
        for (int j = 0; j < d.k3(); ++j) perm.s(i, j) = d.s(src, j);
        perm.choice[i] = d.choice[src];
    }
    const NWChoiceProbability perm_model(perm);
    CHECK(lad_objective_cross(perm, theta, perm_model) == doctest::Approx(base).epsilon(1e-10));
}

TEST_CASE("panel objective: identical periods contribute 3 per alternative") {
    const DesignSpec spec = make_design(3);
    PanelDataset d = simulate_panel(spec, 12, 88);
    // make agent 0's covariates identical across periods
    for (int j = 0; j < d.k1(); ++j) {
        d.x1(d.row(0, 1), j) = d.x1(d.row(0, 0), j);
        d.x2(d.row(0, 1), j) = d.x2(d.row(0, 0), j);
    }
    for (int j = 0; j < d.k2(); ++j) d.w(d.row(0, 1), j) = d.w(d.row(0, 0), j);
    for (int j = 0; j < d.k3(); ++j) d.s(d.row(0, 1), j) = d.s(d.row(0, 0), j);

    MLPConfig mlp;
    mlp.epochs = 60;
    mlp.seed = 5;
    const MLPChoiceProbability model(d, mlp);
    ParamVector theta;
    theta.beta = {1.0, 1.0};
    theta.gamma = {1.0, 1.0};
    theta.rho1 = {1.0};
    theta.rho2 = {1.0};

    // agent 0: all three indexes are exactly zero for every parameter value,
    // both indicators fire, and each alternative scores 2*2 - 1 = 3
    double others = 0.0;
    LADConfig cfg;
    for (int i = 1; i < d.n; ++i) {
        double i1 = 0, i2 = 0, ib = 0;
        const int rt = d.row(i, 1), rs = d.row(i, 0);
        for (int j = 0; j < d.k1(); ++j) {
            i1 += (d.x1(rt, j) - d.x1(rs, j)) * theta.beta[j];
            i2 += (d.x2(rt, j) - d.x2(rs, j)) * theta.beta[j];
        }
        i1 += (d.s(rt, 0) - d.s(rs, 0)) * theta.rho1[0];
        i2 += (d.s(rt, 0) - d.s(rs, 0)) * theta.rho2[0];
        for (int j = 0; j < d.k2(); ++j) ib += (d.w(rt, j) - d.w(rs, j)) * theta.gamma[j];
        for (int k = 0; k < 4; ++k) {
            const ChoiceOutcome dk = ChoiceOutcome::from_index(k);
            others += lad_loss_debiased(indicators(i1, i2, ib, dk),
                                        model.delta(dk, d, i, 1, 0));
        }
    }
    CHECK(lad_objective_panel(d, theta, model, cfg) ==
          doctest::Approx(others + 12.0).epsilon(1e-10));
}

TEST_CASE("grid identification on a finite-support design with exact deltas") {
    // supports are spaced so every wrong grid point flips at least one index
    // sign on realized pairs (correct predictions and silence both score 1;
    // only an actual wrong prediction separates candidates)
    DesignSpec spec;
    spec.design_id = 0;
    spec.custom.x_support = {{-1.17, 0.11, 0.63, 1.42}, {0.0, 1.0}};
    spec.custom.w_support = {{-1.17, 0.11, 0.63, 1.42}, {-0.53, 0.47}};
    spec.custom.s_support = {{0.0, 0.91}};
    spec.custom.x_discrete = {0, 1};
    spec.custom.w_discrete = {0, 0};
    spec.custom.s_discrete = {1};
    spec.true_params.beta = {1.0, 1.0};
    spec.true_params.gamma = {1.0, 1.0};
    spec.true_params.rho1 = {1.0};
    spec.true_params.rho2 = {1.0};
    const CrossSectionDataset d = simulate_cross(spec, 50, 404);

    // exact choice probabilities per row via the oracle with common draws
    TableModel model;
    const int n_mc = 100000;
    for (int i = 0; i < d.n; ++i) {
        CovariateRow z;
        z.x1.assign(d.x1.row(i).begin(), d.x1.row(i).end());
        z.x2.assign(d.x2.row(i).begin(), d.x2.row(i).end());
        z.w.assign(d.w.row(i).begin(), d.w.row(i).end());
        z.s.assign(d.s.row(i).begin(), d.s.row(i).end());
        model.set(feature_row(d, i), true_choice_probability(spec, z, n_mc, 31415));
    }

    const double grid[] = {0.0, 0.5, 1.0, 1.5, 2.0};
    ParamVector theta = spec.true_params;
    const double at_truth = lad_objective_cross(d, theta, model);
    int strictly_larger = 0, total = 0;
    for (double b : grid)
        for (double g : grid)
            for (double r1 : grid)
                for (double r2 : grid) {
                    if (b == 1.0 && g == 1.0 && r1 == 1.0 && r2 == 1.0) continue;
                    ParamVector v;
                    v.beta = {1.0, b};
                    v.gamma = {1.0, g};
                    v.rho1 = {r1};
                    v.rho2 = {r2};
                    strictly_larger += lad_objective_cross(d, v, model) > at_truth;
                    ++total;
                }
    CHECK(total == 624);
    CHECK(strictly_larger == total);
}

TEST_CASE("lad bootstrap smoke: reproducible draws and ordered intervals") {
    const DesignSpec spec = make_design(1);
    const CrossSectionDataset d = simulate_cross(spec, 60, 7);
    LADConfig cfg;
    cfg.de.max_generations = 40;
    cfg.bootstrap_de_generations = 25;
    const EstimationResult a = bootstrap_lad_cross(d, cfg, 3, 11);
    const EstimationResult b = bootstrap_lad_cross(d, cfg, 3, 11);
    CHECK(a.bootstrap_draws.data() == b.bootstrap_draws.data());
    for (const auto& ci : a.ci) CHECK(ci[0] <= ci[1]);
}
