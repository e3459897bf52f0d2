#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "bundlechoice/designs.hpp"

using namespace bundlechoice;

namespace {

double column_mean(const Matrix& m, int j) {
    double s = 0.0;
    for (int i = 0; i < m.rows(); ++i) s += m(i, j);
    return s / m.rows();
}

double column_var(const Matrix& m, int j) {
    const double mu = column_mean(m, j);
    double s = 0.0;
    for (int i = 0; i < m.rows(); ++i) s += (m(i, j) - mu) * (m(i, j) - mu);
    return s / (m.rows() - 1);
}

double pearson(std::span<const double> a, std::span<const double> b) {
    const double ma = mean(a), mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("choose picks the utility argmax") {
    CHECK(choose(1.0, 0.5, 2.0) == ChoiceOutcome{1, 1});
    CHECK(choose(-1.0, -2.0, -3.0) == ChoiceOutcome{0, 0});
    CHECK(choose(3.0, 1.0, 2.0) == ChoiceOutcome{1, 0});
    CHECK(choose(1.0, 4.0, 2.0) == ChoiceOutcome{0, 1});
    CHECK_THROWS_AS(choose(0.0, -1.0, -1.0), TieError);
    CHECK_THROWS_AS(choose(2.0, 2.0, 1.0), TieError);
}

TEST_CASE("outcome indexing round-trips") {
    for (int k = 0; k < 4; ++k) CHECK(ChoiceOutcome::from_index(k).index() == k);
}

TEST_CASE("same seed reproduces the dataset bit for bit") {
    const DesignSpec spec = make_design(1);
    const CrossSectionDataset a = simulate_cross(spec, 400, 2024);
    const CrossSectionDataset b = simulate_cross(spec, 400, 2024);
    CHECK(a.x1.data() == b.x1.data());
    CHECK(a.x2.data() == b.x2.data());
    CHECK(a.w.data() == b.w.data());
    CHECK(a.s.data() == b.s.data());
    REQUIRE(a.choice.size() == b.choice.size());
    for (std::size_t i = 0; i < a.choice.size(); ++i) CHECK(a.choice[i] == b.choice[i]);

    const DesignSpec p3 = make_design(3);
    const PanelDataset pa = simulate_panel(p3, 200, 99);
    const PanelDataset pb = simulate_panel(p3, 200, 99);
    CHECK(pa.x1.data() == pb.x1.data());
    for (std::size_t i = 0; i < pa.choice.size(); ++i) CHECK(pa.choice[i] == pb.choice[i]);
}

TEST_CASE("design 1 marginals at n = 1e5") {
    const int n = 100000;
    const CrossSectionDataset d = simulate_cross(make_design(1), n, 11);
    CHECK(std::abs(column_mean(d.x1, 0)) < 0.03);
    CHECK(std::abs(column_mean(d.x2, 0)) < 0.03);
    const double logistic_var = M_PI * M_PI / 3.0;
    CHECK(std::abs(column_var(d.x1, 0) - logistic_var) < 0.1);
    CHECK(std::abs(column_mean(d.x1, 1) - 1.0 / 3.0) < 0.01);
    CHECK(std::abs(column_mean(d.x2, 1) - 1.0 / 3.0) < 0.01);
    CHECK(std::abs(column_mean(d.w, 1)) < 0.02);
    CHECK(std::abs(column_var(d.s, 0) - 1.0) < 0.03);
}

TEST_CASE("beta(2,2) sampling matches its moments") {
    Rng rng(5);
    const int n = 100000;
    std::vector<double> eta(n);
    for (double& e : eta) e = beta22_quantile(rng.uniform());
    CHECK(std::abs(mean(eta) - 0.5) < 0.01);
    double var = 0.0;
    const double mu = mean(eta);
    for (double e : eta) var += (e - mu) * (e - mu);
    var /= n - 1;
    CHECK(std::abs(var - 0.05) < 0.005);
    for (double e : eta) {
        REQUIRE(e >= 0.0);
        REQUIRE(e <= 1.0);
    }
}

TEST_CASE("equicorrelated normal pairs hit the target correlation") {
    Rng rng(17);
    const int n = 100000;
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
        double z[2];
        equicorrelated_normals(rng, 0.5, z);
        a[i] = z[0];
        b[i] = z[1];
    }
    CHECK(std::abs(pearson(a, b) - 0.5) < 0.02);
}

TEST_CASE("design 2 correlated bernoulli pair has the exact joint pmf") {
    const int n = 100000;
    const CrossSectionDataset d = simulate_cross(make_design(2), n, 123);
    // with p = q = 1/3 and rho = 0.5: P(1,1) = 2/9, P(1,0) = P(0,1) = 1/9, P(0,0) = 5/9
    double c11 = 0, c10 = 0, c01 = 0, c00 = 0;
    std::vector<double> xa(n), xb(n);
    for (int i = 0; i < n; ++i) {
        const bool u = d.x1(i, 1) > 0.5, v = d.x2(i, 1) > 0.5;
        c11 += u && v;
        c10 += u && !v;
        c01 += !u && v;
        c00 += !u && !v;
        xa[i] = d.x1(i, 1);
        xb[i] = d.x2(i, 1);
    }
    CHECK(std::abs(c11 / n - 2.0 / 9.0) < 0.01);
    CHECK(std::abs(c10 / n - 1.0 / 9.0) < 0.01);
    CHECK(std::abs(c01 / n - 1.0 / 9.0) < 0.01);
    CHECK(std::abs(c00 / n - 5.0 / 9.0) < 0.01);
    CHECK(std::abs(pearson(xa, xb) - 0.5) < 0.02);
    // the continuous copula pair
    std::vector<double> la(n), lb(n);
    for (int i = 0; i < n; ++i) {
        la[i] = d.x1(i, 0);
        lb[i] = d.x2(i, 0);
    }
    CHECK(pearson(la, lb) > 0.4);
}

TEST_CASE("design 4 serial and cross-alternative correlation") {
    const int n = 50000;
    const PanelDataset d = simulate_panel(make_design(4), n, 7);
    std::vector<double> x1t1(n), x1t2(n), x2t1(n), s1(n), s2(n);
    for (int i = 0; i < n; ++i) {
        x1t1[i] = d.x1(d.row(i, 0), 0);
        x1t2[i] = d.x1(d.row(i, 1), 0);
        x2t1[i] = d.x2(d.row(i, 0), 0);
        s1[i] = d.s(d.row(i, 0), 0);
        s2[i] = d.s(d.row(i, 1), 0);
    }
    // Logistic marginals through the copula: realized correlation near 0.25
    CHECK(std::abs(pearson(x1t1, x1t2) - 0.25) < 0.03);
    CHECK(std::abs(pearson(x1t1, x2t1) - 0.25) < 0.03);
    CHECK(std::abs(pearson(s1, s2) - 0.25) < 0.02);  // normal marginals: exact target
}

TEST_CASE("design 3 fixed effects are correlated with regressors") {
    const int n = 20000;
    const PanelDataset d = simulate_panel(make_design(3), n, 31);
    // alpha_1 = (X_{11,1} + X_{12,1})/4 by construction
    std::vector<double> alpha(n), x(n);
    for (int i = 0; i < n; ++i) {
        alpha[i] = (d.x1(d.row(i, 0), 0) + d.x1(d.row(i, 1), 0)) / 4.0;
        x[i] = d.x1(d.row(i, 0), 0);
    }
    CHECK(pearson(alpha, x) > 0.5);
}

TEST_CASE("simulate input validation") {
    CHECK_THROWS_AS(simulate_cross(make_design(1), 1, 1), InputError);
    CHECK_THROWS_AS(simulate_cross(make_design(3), 100, 1), InputError);
    CHECK_THROWS_AS(simulate_panel(make_design(1), 100, 1), InputError);
    CHECK_THROWS_AS(make_design(5), ConfigError);
}

TEST_CASE("oracle probabilities form a distribution") {
    const DesignSpec spec = make_design(1);
    CovariateRow z;
    z.x1 = {0.3, 1.0};
    z.x2 = {-0.5, 0.0};
    z.w = {0.2, -0.4};
    z.s = {0.1};
    const auto p = true_choice_probability(spec, z, 20000, 4);
    double total = 0.0;
    for (double pk : p) {
        CHECK(pk >= 0.0);
        CHECK(pk <= 1.0);
        total += pk;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("oracle: dominated utilities pick the outside option") {
    const DesignSpec spec = make_design(1);
    const auto p = choice_probability_from_indexes(spec, -100.0, -100.0, -100.0, 20000, 8);
    CHECK(p[ChoiceOutcome{0, 0}.index()] >= 0.999);
}

TEST_CASE("oracle: exchangeability symmetry between (1,0) and (0,1)") {
    const DesignSpec spec = make_design(1);
    const int n_mc = 200000;
    const auto p = choice_probability_from_indexes(spec, 0.7, 0.7, 0.0, n_mc, 15);
    const double p10 = p[ChoiceOutcome{1, 0}.index()];
    const double p01 = p[ChoiceOutcome{0, 1}.index()];
    const double se = std::sqrt((p10 + p01) / n_mc);
    CHECK(std::abs(p10 - p01) < 2.0 * se + 1e-9);
}

TEST_CASE("oracle: probability of d1 = 1 increases with the first index") {
    const DesignSpec spec = make_design(1);
    const int n_mc = 200000;
    // common random numbers across the two queries sharpen the comparison
    const auto lo = choice_probability_from_indexes(spec, 0.0, 0.3, 0.2, n_mc, 33);
    const auto hi = choice_probability_from_indexes(spec, 5.0, 0.3, 0.2, n_mc, 33);
    const double lo1 = lo[1] + lo[3], hi1 = hi[1] + hi[3];
    CHECK(hi1 > lo1);
    CHECK(hi1 > 0.9);
    CHECK_THROWS_AS(choice_probability_from_indexes(spec, 0, 0, 0, 999, 1), InputError);
}

TEST_CASE("custom design draws from the declared support") {
    DesignSpec spec;
    spec.design_id = 0;
    spec.custom.x_support = {{-1.0, 0.0, 1.0}, {0.0, 1.0}};
    spec.custom.w_support = {{-1.0, 1.0}, {-0.5, 0.5}};
    spec.custom.s_support = {{0.0, 1.0}};
    spec.custom.x_discrete = {0, 1};
    spec.custom.w_discrete = {0, 0};
    spec.custom.s_discrete = {1};
    spec.true_params.beta = {1.0, 1.0};
    spec.true_params.gamma = {1.0, 1.0};
    spec.true_params.rho1 = {1.0};
    spec.true_params.rho2 = {1.0};
    const CrossSectionDataset d = simulate_cross(spec, 300, 5);
    for (int i = 0; i < d.n; ++i) {
        CHECK((d.x1(i, 0) == -1.0 || d.x1(i, 0) == 0.0 || d.x1(i, 0) == 1.0));
        CHECK((d.x2(i, 1) == 0.0 || d.x2(i, 1) == 1.0));
        CHECK((d.w(i, 0) == -1.0 || d.w(i, 0) == 1.0));
    }
    CHECK(d.s_categories[0] == 2);

    spec.custom.panel = true;
    const PanelDataset p = simulate_panel(spec, 150, 5);
    CHECK(p.n == 150);
    CHECK(p.t_periods == 2);
    CHECK(p.x1.rows() == 300);
}

TEST_CASE("eta_zero design never chooses by the interaction term") {
    DesignSpec spec = make_design(1);
    spec.eta_zero = true;
    // with eta = 0 the oracle bundle probability is unaffected by the bundle index
    const auto a = choice_probability_from_indexes(spec, 0.5, 0.5, -50.0, 50000, 21);
    const auto b = choice_probability_from_indexes(spec, 0.5, 0.5, 50.0, 50000, 21);
    for (int k = 0; k < 4; ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12));
}
