#include "bundlechoice/harness.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace bundlechoice {

std::string method_name(Method m) {
    switch (m) {
        case Method::mrc: return "mrc";
        case Method::lad: return "lad";
        case Method::panel_ms: return "panel-ms";
        default: return "panel-lad";
    }
}

Method method_from_name(const std::string& name) {
    if (name == "mrc") return Method::mrc;
    if (name == "lad") return Method::lad;
    if (name == "panel-ms" || name == "panel_ms") return Method::panel_ms;
    if (name == "panel-lad" || name == "panel_lad") return Method::panel_lad;
    throw InputError("unknown method: " + name);
}

namespace {

bool panel_method(Method m) { return m == Method::panel_ms || m == Method::panel_lad; }

std::vector<double> truth_free(const DesignSpec& design, Method m, const RunConfig& cfg) {
    const ParamVector& tp = design.true_params;
    std::vector<double> truth(tp.beta.begin() + 1, tp.beta.end());
    truth.insert(truth.end(), tp.gamma.begin() + 1, tp.gamma.end());
    if (m == Method::lad || m == Method::panel_lad) {
        truth.insert(truth.end(), tp.rho1.begin(), tp.rho1.end());
        truth.insert(truth.end(), tp.rho2.begin(), tp.rho2.end());
        if (cfg.lad.include_rho_b) truth.insert(truth.end(), tp.rho_b.begin(), tp.rho_b.end());
    }
    return truth;
}

std::vector<std::string> names_free(const DesignSpec& design, Method m, const RunConfig& cfg) {
    const int k1 = static_cast<int>(design.true_params.beta.size());
    const int k2 = static_cast<int>(design.true_params.gamma.size());
    const int k3 = static_cast<int>(design.true_params.rho1.size());
    std::vector<std::string> names;
    for (int j = 2; j <= k1; ++j) names.push_back("beta_" + std::to_string(j));
    for (int j = 2; j <= k2; ++j) names.push_back("gamma_" + std::to_string(j));
    if (m == Method::lad || m == Method::panel_lad) {
        for (int j = 1; j <= k3; ++j) names.push_back("rho1_" + std::to_string(j));
        for (int j = 1; j <= k3; ++j) names.push_back("rho2_" + std::to_string(j));
        if (cfg.lad.include_rho_b)
            for (int j = 1; j <= k3; ++j) names.push_back("rhob_" + std::to_string(j));
    }
    return names;
}

ReplicationOutcome run_one(const ReplicationPlan& plan, const DesignSpec& design, int rep) {
    const std::uint64_t data_seed = derive_seed(plan.master_seed, rep, SeedPurpose::data);
    const std::uint64_t est_seed = derive_seed(plan.master_seed, rep, SeedPurpose::replication);
    ReplicationOutcome out;
    EstimationResult res;
    if (panel_method(plan.method)) {
        const PanelDataset data = simulate_panel(design, plan.n, data_seed);
        if (plan.method == Method::panel_ms) {
            res = plan.bootstrap_b > 0
                      ? numerical_bootstrap(data, plan.config.panel, plan.config.nb,
                                            estimate_panel_ms(data, plan.config.panel, est_seed),
                                            plan.bootstrap_b, est_seed)
                      : estimate_panel_ms(data, plan.config.panel, est_seed);
        } else {
            res = plan.bootstrap_b > 0
                      ? bootstrap_lad_panel(data, plan.config.lad, plan.bootstrap_b, est_seed)
                      : estimate_lad_panel(data, plan.config.lad, est_seed);
        }
    } else {
        const CrossSectionDataset data = simulate_cross(design, plan.n, data_seed);
        if (plan.method == Method::mrc) {
            res = plan.bootstrap_b > 0 ? bootstrap_mrc(data, plan.config.mrc, plan.bootstrap_b, est_seed)
                                       : estimate_mrc(data, plan.config.mrc, est_seed);
        } else {
            res = plan.bootstrap_b > 0
                      ? bootstrap_lad_cross(data, plan.config.lad, plan.bootstrap_b, est_seed)
                      : estimate_lad_cross(data, plan.config.lad, est_seed);
        }
    }
    out.ok = true;
    out.estimate = res.free_values;
    out.ci = res.ci;
    return out;
}

}  // namespace

BatchResult run_batch(int reps, const std::function<ReplicationOutcome(int)>& runner) {
    if (reps < 1) throw InputError("run_batch: need at least one replication");
    BatchResult out;
    out.replications.reserve(reps);
    std::ostringstream log;
    for (int r = 0; r < reps; ++r) {
        try {
            out.replications.push_back(runner(r));
        } catch (const std::exception& e) {
            ReplicationOutcome failed;
            failed.ok = false;
            failed.error = e.what();
            out.replications.push_back(std::move(failed));
            ++out.failures;
            log << "replication " << r << ": " << e.what() << "\n";
        }
    }
    if (out.failures * 5 > reps)
        throw BatchError("more than 20% of replications failed:\n" + log.str());
    return out;
}

BatchResult run_replications(const ReplicationPlan& plan) {
    const DesignSpec design = plan.design ? *plan.design : make_design(plan.design_id);
    if (design.is_panel() != panel_method(plan.method))
        throw InputError("run_replications: design and method disagree on panel structure");
    BatchResult out = run_batch(
        plan.reps, [&plan, &design](int rep) { return run_one(plan, design, rep); });
    out.truth = truth_free(design, plan.method, plan.config);
    out.param_names = names_free(design, plan.method, plan.config);
    return out;
}

SummaryTable summarize(const Matrix& estimates, std::span<const double> truth,
                       std::span<const std::string> names) {
    if (estimates.rows() < 1) throw InputError("summarize: need at least one replication");
    if (estimates.cols() != static_cast<int>(truth.size()))
        throw InputError("summarize: truth length mismatch");
    SummaryTable table;
    table.replications_used = estimates.rows();
    for (int j = 0; j < estimates.cols(); ++j) {
        SummaryRow row;
        row.name = j < static_cast<int>(names.size()) ? names[j] : "param_" + std::to_string(j);
        std::vector<double> err(estimates.rows());
        for (int r = 0; r < estimates.rows(); ++r) err[r] = estimates(r, j) - truth[j];
        row.mbias = mean(err);
        double ss = 0.0;
        for (double e : err) ss += e * e;
        row.rmse = std::sqrt(ss / err.size());
        row.med = median(err);
        std::vector<double> abs_err(err.size());
        for (std::size_t r = 0; r < err.size(); ++r) abs_err[r] = std::abs(err[r]);
        row.mad = median(abs_err);
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::pair<double, double> coverage(const std::vector<std::array<double, 2>>& cis, double truth) {
    if (cis.empty()) throw InputError("coverage: empty interval list");
    double covered = 0.0, length = 0.0;
    for (const auto& ci : cis) {
        if (ci[0] > ci[1]) throw InputError("coverage: interval with lower > upper");
        covered += ci[0] <= truth && truth <= ci[1];
        length += ci[1] - ci[0];
    }
    const double n = static_cast<double>(cis.size());
    return {covered / n, length / n};
}

SummaryTable summarize_batch(const BatchResult& batch) {
    std::vector<const ReplicationOutcome*> good;
    for (const auto& rep : batch.replications)
        if (rep.ok) good.push_back(&rep);
    if (good.empty()) throw EstimationError("summarize_batch: no successful replications");
    const int p = static_cast<int>(good.front()->estimate.size());
    Matrix estimates(static_cast<int>(good.size()), p);
    for (int r = 0; r < estimates.rows(); ++r)
        for (int j = 0; j < p; ++j) estimates(r, j) = good[r]->estimate[j];
    SummaryTable table = summarize(estimates, batch.truth, batch.param_names);

    if (!good.front()->ci.empty()) {
        table.has_coverage = true;
        for (int j = 0; j < p; ++j) {
            std::vector<std::array<double, 2>> cis;
            cis.reserve(good.size());
            for (const auto* rep : good)
                if (static_cast<int>(rep->ci.size()) == p) cis.push_back(rep->ci[j]);
            if (!cis.empty()) {
                const auto [cov, len] = coverage(cis, batch.truth[j]);
                table.rows[j].coverage = cov;
                table.rows[j].length = len;
            }
        }
    }
    return table;
}

std::string emit_table(const SummaryTable& table, TableFormat format) {
    std::ostringstream out;
    char buf[64];
    if (format == TableFormat::csv) {
        out << "param,MBIAS,RMSE,MED,MAD";
        if (table.has_coverage) out << ",COVERAGE,LENGTH";
        out << "\n";
        for (const auto& row : table.rows) {
            std::snprintf(buf, sizeof buf, "%.3f,%.3f,%.3f,%.3f", row.mbias, row.rmse, row.med,
                          row.mad);
            out << row.name << "," << buf;
            if (table.has_coverage) {
                std::snprintf(buf, sizeof buf, ",%.3f,%.3f", row.coverage, row.length);
                out << buf;
            }
            out << "\n";
        }
        return out.str();
    }
    out << "param       MBIAS    RMSE     MED      MAD";
    if (table.has_coverage) out << "      COVERAGE LENGTH";
    out << "\n";
    for (const auto& row : table.rows) {
        std::snprintf(buf, sizeof buf, "%-10s %8.3f %8.3f %8.3f %8.3f", row.name.c_str(),
                      row.mbias, row.rmse, row.med, row.mad);
        out << buf;
        if (table.has_coverage) {
            std::snprintf(buf, sizeof buf, " %8.3f %8.3f", row.coverage, row.length);
            out << buf;
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace bundlechoice
