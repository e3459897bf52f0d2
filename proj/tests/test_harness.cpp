#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bundlechoice/harness.hpp"

using namespace bundlechoice;

TEST_CASE("summarize: hand-computed statistics") {
    Matrix est(3, 1);
    est(0, 0) = 0.9;
    est(1, 0) = 1.0;
    est(2, 0) = 1.2;
    const std::vector<double> truth = {1.0};
    const std::vector<std::string> names = {"beta_2"};
    const SummaryTable t = summarize(est, truth, names);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0].mbias == doctest::Approx(0.0333333).epsilon(1e-5));
    CHECK(t.rows[0].rmse == doctest::Approx(0.1290994).epsilon(1e-6));
    CHECK(t.rows[0].med == doctest::Approx(0.0));
    CHECK(t.rows[0].mad == doctest::Approx(0.1));
}

TEST_CASE("summarize: degenerate cases") {
    Matrix est(2, 1);
    est(0, 0) = est(1, 0) = 1.0;
    const std::vector<double> truth = {1.0};
    const std::vector<std::string> names = {"p"};
    const SummaryTable t = summarize(est, truth, names);
    CHECK(t.rows[0].mbias == 0.0);
    CHECK(t.rows[0].rmse == 0.0);
    CHECK(t.rows[0].med == 0.0);
    CHECK(t.rows[0].mad == 0.0);

    Matrix single(1, 1);
    single(0, 0) = 1.4;
    const SummaryTable s = summarize(single, truth, names);
    CHECK(s.rows[0].mbias == doctest::Approx(0.4));
    CHECK(s.rows[0].med == doctest::Approx(0.4));
    CHECK(s.rows[0].rmse == doctest::Approx(0.4));
    CHECK(s.rows[0].mad == doctest::Approx(0.4));
}

TEST_CASE("rmse-squared decomposes into squared bias plus variance") {
    Rng rng(8);
    const int reps = 40;
    Matrix est(reps, 1);
    for (int r = 0; r < reps; ++r) est(r, 0) = 1.0 + 0.3 * rng.normal();
    const std::vector<double> truth = {1.0};
    const std::vector<std::string> names = {"p"};
    const SummaryTable t = summarize(est, truth, names);
    double m = 0.0;
    for (int r = 0; r < reps; ++r) m += est(r, 0);
    m /= reps;
    double var = 0.0;  // denominator-R variance
    for (int r = 0; r < reps; ++r) var += (est(r, 0) - m) * (est(r, 0) - m);
    var /= reps;
    CHECK(t.rows[0].rmse * t.rows[0].rmse ==
          doctest::Approx(t.rows[0].mbias * t.rows[0].mbias + var).epsilon(1e-12));
}

TEST_CASE("coverage and mean length") {
    const std::vector<std::array<double, 2>> cis = {{0.5, 1.5}, {1.1, 1.4}, {0.8, 1.2}};
    const auto [cov, len] = coverage(cis, 1.0);
    CHECK(cov == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
    CHECK(len == doctest::Approx(0.5666667).epsilon(1e-6));

    const std::vector<std::array<double, 2>> exact = {{1.0, 1.0}, {1.0, 1.0}};
    const auto [c2, l2] = coverage(exact, 1.0);
    CHECK(c2 == 1.0);
    CHECK(l2 == 0.0);

    CHECK_THROWS_AS(coverage({}, 1.0), InputError);
    const std::vector<std::array<double, 2>> flipped = {{1.5, 0.5}};
    CHECK_THROWS_AS(coverage(flipped, 1.0), InputError);
}

TEST_CASE("emit_table renders both formats at three decimals") {
    SummaryTable t;
    SummaryRow row;
    row.name = "beta_2";
    row.mbias = 0.0241;
    row.rmse = 0.2373;
    row.med = 0.0159;
    row.mad = 0.1544;
    t.rows.push_back(row);
    const std::string csv = emit_table(t, TableFormat::csv);
    CHECK(csv == "param,MBIAS,RMSE,MED,MAD\nbeta_2,0.024,0.237,0.016,0.154\n");
    const std::string text = emit_table(t, TableFormat::text);
    CHECK(text.find("beta_2") != std::string::npos);
    CHECK(text.find("0.237") != std::string::npos);

    t.has_coverage = true;
    t.rows[0].coverage = 0.918;
    t.rows[0].length = 1.4918;
    const std::string csv2 = emit_table(t, TableFormat::csv);
    CHECK(csv2.find("COVERAGE,LENGTH") != std::string::npos);
    CHECK(csv2.find("0.918,1.492") != std::string::npos);
}

TEST_CASE("run_batch isolates failures and enforces the failure cap") {
    const auto runner = [](int rep) {
        if (rep == 1) throw EstimationError("deliberately degenerate replication");
        ReplicationOutcome out;
        out.ok = true;
        out.estimate = {static_cast<double>(rep)};
        return out;
    };
    const BatchResult batch = run_batch(10, runner);
    CHECK(batch.failures == 1);
    CHECK_FALSE(batch.replications[1].ok);
    CHECK(batch.replications[0].estimate[0] == 0.0);
    CHECK(batch.replications[2].estimate[0] == 2.0);

    const auto always_bad = [](int) -> ReplicationOutcome {
        throw EstimationError("nope");
    };
    CHECK_THROWS_AS(run_batch(5, always_bad), BatchError);
}

TEST_CASE("run_replications: deterministic small mrc batch") {
    ReplicationPlan plan;
    plan.design_id = 1;
    plan.method = Method::mrc;
    plan.n = 100;
    plan.reps = 3;
    plan.master_seed = 42;
    plan.config.mrc.de.max_generations = 60;
    const BatchResult a = run_replications(plan);
    const BatchResult b = run_replications(plan);
    REQUIRE(a.replications.size() == 3);
    CHECK(a.failures == 0);
    CHECK(a.truth == std::vector<double>{1.0, 1.0});
    REQUIRE(a.param_names.size() == 2);
    CHECK(a.param_names[0] == "beta_2");
    CHECK(a.param_names[1] == "gamma_2");
    for (int r = 0; r < 3; ++r) CHECK(a.replications[r].estimate == b.replications[r].estimate);

    const SummaryTable t = summarize_batch(a);
    CHECK(t.rows.size() == 2);
    CHECK(t.replications_used == 3);
    CHECK_FALSE(t.has_coverage);
}

TEST_CASE("run_replications rejects mismatched design and method") {
    ReplicationPlan plan;
    plan.design_id = 3;
    plan.method = Method::mrc;
    plan.n = 50;
    plan.reps = 1;
    CHECK_THROWS_AS(run_replications(plan), InputError);
}

TEST_CASE("method names round-trip") {
    for (Method m : {Method::mrc, Method::lad, Method::panel_ms, Method::panel_lad})
        CHECK(method_from_name(method_name(m)) == m);
    CHECK_THROWS_AS(method_from_name("nope"), InputError);
}
