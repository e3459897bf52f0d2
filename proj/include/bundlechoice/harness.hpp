#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "bundlechoice/lad.hpp"
#include "bundlechoice/mrc.hpp"
#include "bundlechoice/panel_ms.hpp"

namespace bundlechoice {

// Monte Carlo replication engine and summary statistics.

enum class Method { mrc, lad, panel_ms, panel_lad };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct RunConfig {
    MRCConfig mrc;
    PanelMSConfig panel;
    NumericalBootstrapSpec nb;
    LADConfig lad;
};

struct ReplicationPlan {
    int design_id = 1;
    Method method = Method::mrc;
    int n = 250;
    int reps = 1;
    int bootstrap_b = 0;  // 0 = point estimation only
    std::uint64_t master_seed = 0;
    RunConfig config;
    std::optional<DesignSpec> design;  // overrides make_design(design_id)
};

struct ReplicationOutcome {
    bool ok = false;
    std::string error;
    std::vector<double> estimate;  // free coordinates
    std::vector<std::array<double, 2>> ci;
};

struct BatchResult {
    std::vector<ReplicationOutcome> replications;
    std::vector<std::string> param_names;
    std::vector<double> truth;  // free-coordinate truth from the design
    int failures = 0;
};

// R independent datasets simulated and estimated; failures are recorded per
// replication, and more than 20% of them aborts with a batch error.
BatchResult run_replications(const ReplicationPlan& plan);

// core loop shared with tests: failures in one replication leave the others untouched
BatchResult run_batch(int reps, const std::function<ReplicationOutcome(int)>& runner);

struct SummaryRow {
    std::string name;
    double mbias = 0.0, rmse = 0.0, med = 0.0, mad = 0.0;
    double coverage = std::numeric_limits<double>::quiet_NaN();
    double length = std::numeric_limits<double>::quiet_NaN();
};

struct SummaryTable {
    std::vector<SummaryRow> rows;
    bool has_coverage = false;
    int replications_used = 0;
};

// MBIAS / RMSE / MED / MAD per parameter column
SummaryTable summarize(const Matrix& estimates, std::span<const double> truth,
                       std::span<const std::string> names);

// fraction of closed intervals containing the truth, and their mean length
std::pair<double, double> coverage(const std::vector<std::array<double, 2>>& cis, double truth);

// summary over the successful replications of a batch (plus coverage when CIs exist)
SummaryTable summarize_batch(const BatchResult& batch);

enum class TableFormat { csv, text };

std::string emit_table(const SummaryTable& table, TableFormat format);

}  // namespace bundlechoice
