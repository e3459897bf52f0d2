#include <CLI11.hpp>
#include <cstdio>
#include <string>

#include "bundlechoice/io.hpp"

using namespace bundlechoice;

namespace {

struct CommonArgs {
    std::string data_path, config_path, out_path;
    std::string method = "mrc";
    std::uint64_t seed = 0;
    int b_draws = 0;
};

nlohmann::json load_config_json(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    return j;
}

EstimationResult dispatch_estimate(AnyDataset& ds, Method m, const RunConfig& cfg, int b_draws,
                                   std::uint64_t seed) {
    if (m == Method::mrc || m == Method::lad) {
        auto* data = std::get_if<CrossSectionDataset>(&ds);
        if (!data) throw InputError("method " + method_name(m) + " needs cross-sectional data");
        if (m == Method::mrc)
            return b_draws > 0 ? bootstrap_mrc(*data, cfg.mrc, b_draws, seed)
                               : estimate_mrc(*data, cfg.mrc, seed);
        return b_draws > 0 ? bootstrap_lad_cross(*data, cfg.lad, b_draws, seed)
                           : estimate_lad_cross(*data, cfg.lad, seed);
    }
    auto* data = std::get_if<PanelDataset>(&ds);
    if (!data) throw InputError("method " + method_name(m) + " needs panel data");
    if (m == Method::panel_ms) {
        const EstimationResult point = estimate_panel_ms(*data, cfg.panel, seed);
        return b_draws > 0 ? numerical_bootstrap(*data, cfg.panel, cfg.nb, point, b_draws, seed)
                           : point;
    }
    return b_draws > 0 ? bootstrap_lad_panel(*data, cfg.lad, b_draws, seed)
                       : estimate_lad_panel(*data, cfg.lad, seed);
}

int run(int argc, char** argv) {
    CLI::App app{"Semiparametric estimators for bundle discrete-choice models"};
    app.require_subcommand(1);

    int design = 1, n = 250, reps = 1;
    bool eta_zero = false;
    std::string format = "csv";
    CommonArgs args;

    auto* sim = app.add_subcommand("simulate", "Draw a dataset from a simulation design");
    sim->add_option("--design", design, "design id")->required()->check(CLI::Range(1, 4));
    sim->add_option("--n", n, "sample size")->required();
    sim->add_option("--seed", args.seed, "rng seed");
    sim->add_option("--out", args.out_path, "output csv")->required();
    sim->add_flag("--eta-zero", eta_zero, "degenerate interaction weight (test null)");

    auto* est = app.add_subcommand("estimate", "Estimate a model from a csv dataset");
    est->add_option("--method", args.method, "mrc|lad|panel-ms|panel-lad")->required();
    est->add_option("--data", args.data_path, "input csv")->required();
    est->add_option("--config", args.config_path, "config json");
    est->add_option("--seed", args.seed, "rng seed");
    est->add_option("--out", args.out_path, "output json")->required();

    auto* boot = app.add_subcommand("bootstrap", "Estimate with bootstrap confidence intervals");
    boot->add_option("--method", args.method)->required();
    boot->add_option("--data", args.data_path)->required();
    boot->add_option("--config", args.config_path);
    boot->add_option("--b", args.b_draws, "bootstrap draws")->required();
    boot->add_option("--seed", args.seed);
    boot->add_option("--out", args.out_path)->required();

    auto* mc = app.add_subcommand("montecarlo", "Replicated simulation study");
    mc->add_option("--design", design)->required()->check(CLI::Range(1, 4));
    mc->add_option("--method", args.method)->required();
    mc->add_option("--n", n)->required();
    mc->add_option("--reps", reps)->required();
    mc->add_option("--b", args.b_draws, "bootstrap draws per replication (0 = none)");
    mc->add_option("--seed", args.seed, "master seed");
    mc->add_option("--config", args.config_path);
    mc->add_option("--out", args.out_path)->required();
    mc->add_option("--format", format)->check(CLI::IsMember({"csv", "text"}));

    auto* eta = app.add_subcommand("test-eta", "Criterion-based interaction-effect test");
    eta->add_option("--method", args.method, "mrc|panel-ms")->required();
    eta->add_option("--data", args.data_path)->required();
    eta->add_option("--config", args.config_path);
    eta->add_option("--b", args.b_draws)->required();
    eta->add_option("--seed", args.seed);
    eta->add_option("--out", args.out_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (sim->parsed()) {
        DesignSpec spec = make_design(design);
        spec.eta_zero = eta_zero;
        if (spec.is_panel())
            write_csv(simulate_panel(spec, n, args.seed), args.out_path);
        else
            write_csv(simulate_cross(spec, n, args.seed), args.out_path);
        return 0;
    }

    const nlohmann::json config_json = load_config_json(args.config_path);
    const RunConfig cfg = parse_run_config(config_json);

    if (est->parsed() || boot->parsed()) {
        const Method m = method_from_name(args.method);
        AnyDataset ds = read_csv(args.data_path);
        std::visit([&config_json](auto& d) { apply_column_overrides(config_json, d); }, ds);
        const EstimationResult res =
            dispatch_estimate(ds, m, cfg, boot->parsed() ? args.b_draws : 0, args.seed);
        write_text_file(args.out_path, result_to_json(res, args.method).dump(2) + "\n");
        return 0;
    }

    if (mc->parsed()) {
        ReplicationPlan plan;
        plan.design_id = design;
        plan.method = method_from_name(args.method);
        plan.n = n;
        plan.reps = reps;
        plan.bootstrap_b = args.b_draws;
        plan.master_seed = args.seed;
        plan.config = cfg;
        const BatchResult batch = run_replications(plan);
        const SummaryTable table = summarize_batch(batch);
        write_text_file(args.out_path,
                        emit_table(table, format == "csv" ? TableFormat::csv : TableFormat::text));
        return 0;
    }

    if (eta->parsed()) {
        const Method m = method_from_name(args.method);
        AnyDataset ds = read_csv(args.data_path);
        std::visit([&config_json](auto& d) { apply_column_overrides(config_json, d); }, ds);
        EtaTestResult result;
        if (m == Method::mrc) {
            auto* data = std::get_if<CrossSectionDataset>(&ds);
            if (!data) throw InputError("test-eta mrc needs cross-sectional data");
            const EstimationResult point = estimate_mrc(*data, cfg.mrc, args.seed);
            result = eta_test_cross(*data, point.estimate, cfg.mrc, args.b_draws, args.seed);
        } else if (m == Method::panel_ms) {
            auto* data = std::get_if<PanelDataset>(&ds);
            if (!data) throw InputError("test-eta panel-ms needs panel data");
            const EstimationResult point = estimate_panel_ms(*data, cfg.panel, args.seed);
            result = eta_test_panel(*data, point.estimate, cfg.panel, args.b_draws, args.seed);
        } else {
            throw InputError("test-eta supports mrc and panel-ms");
        }
        write_text_file(args.out_path, eta_result_to_json(result, args.method).dump(2) + "\n");
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const BatchError& e) {
        std::fprintf(stderr, "batch error: %s\n", e.what());
        return 4;
    } catch (const EstimationError& e) {
        std::fprintf(stderr, "estimation error: %s\n", e.what());
        return 3;
    } catch (const InputError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 2;
    } catch (const TieError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
