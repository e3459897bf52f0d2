#include "bundlechoice/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace bundlechoice {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_header(std::ostream& out, bool panel, int k1, int k2, int k3) {
    out << "id";
    if (panel) out << ",t";
    out << ",d1,d2";
    for (int j = 1; j <= k1; ++j) out << ",x1_" << j;
    for (int j = 1; j <= k1; ++j) out << ",x2_" << j;
    for (int j = 1; j <= k2; ++j) out << ",w_" << j;
    for (int j = 1; j <= k3; ++j) out << ",s_" << j;
    out << "\n";
}

template <class Dataset>
void write_row(std::ostream& out, const Dataset& d, int row) {
    out << "," << static_cast<int>(d.choice[row].d1) << "," << static_cast<int>(d.choice[row].d2);
    for (int j = 0; j < d.k1(); ++j) out << "," << fmt17(d.x1(row, j));
    for (int j = 0; j < d.k1(); ++j) out << "," << fmt17(d.x2(row, j));
    for (int j = 0; j < d.k2(); ++j) out << "," << fmt17(d.w(row, j));
    for (int j = 0; j < d.k3(); ++j) out << "," << fmt17(d.s(row, j));
    out << "\n";
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream stream(line);
    while (std::getline(stream, field, sep)) out.push_back(field);
    return out;
}

struct HeaderLayout {
    bool panel = false;
    int k1 = 0, k2 = 0, k3 = 0;
    int first_data_col = 0;  // column index of x1_1
};

HeaderLayout parse_header(const std::vector<std::string>& cols) {
    HeaderLayout h;
    std::size_t at = 0;
    if (at >= cols.size() || cols[at] != "id") throw InputError("csv: header must start with id");
    ++at;
    if (at < cols.size() && cols[at] == "t") {
        h.panel = true;
        ++at;
    }
    if (at + 1 >= cols.size() || cols[at] != "d1" || cols[at + 1] != "d2")
        throw InputError("csv: expected d1,d2 columns");
    at += 2;
    h.first_data_col = static_cast<int>(at);
    auto count_block = [&cols, &at](const std::string& prefix) {
        int k = 0;
        while (at < cols.size() && cols[at].rfind(prefix, 0) == 0) {
            ++k;
            ++at;
        }
        return k;
    };
    h.k1 = count_block("x1_");
    const int k1b = count_block("x2_");
    if (k1b != h.k1) throw InputError("csv: x1 and x2 blocks differ in width");
    h.k2 = count_block("w_");
    h.k3 = count_block("s_");
    if (at != cols.size()) throw InputError("csv: unrecognized trailing columns");
    if (h.k1 < 1 || h.k2 < 1) throw InputError("csv: need x and w blocks");
    return h;
}

// a column is treated as discrete when every value is a small nonnegative integer
void infer_discrete(const Matrix& m, std::vector<std::uint8_t>& mask, std::vector<int>& cats) {
    mask.assign(m.cols(), 0);
    cats.assign(m.cols(), 0);
    for (int j = 0; j < m.cols(); ++j) {
        bool integral = m.rows() > 0;
        double max_v = 0.0;
        for (int i = 0; i < m.rows(); ++i) {
            const double v = m(i, j);
            if (v < 0.0 || v != std::floor(v) || v > 31.0) {
                integral = false;
                break;
            }
            max_v = std::max(max_v, v);
        }
        if (integral) {
            mask[j] = 1;
            cats[j] = std::max(2, static_cast<int>(max_v) + 1);
        }
    }
}

}  // namespace

void write_csv(const CrossSectionDataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("write_csv: cannot open " + path);
    write_header(out, false, data.k1(), data.k2(), data.k3());
    for (int i = 0; i < data.n; ++i) {
        out << i;
        write_row(out, data, i);
    }
}

void write_csv(const PanelDataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("write_csv: cannot open " + path);
    write_header(out, true, data.k1(), data.k2(), data.k3());
    for (int i = 0; i < data.n; ++i)
        for (int t = 0; t < data.t_periods; ++t) {
            out << i << "," << t;
            write_row(out, data, data.row(i, t));
        }
}

AnyDataset read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("read_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw InputError("read_csv: empty file");
    const HeaderLayout h = parse_header(split(line, ','));

    std::vector<std::vector<double>> rows;
    std::vector<int> ids, ts;
    std::vector<ChoiceOutcome> choices;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> f = split(line, ',');
        const std::size_t expected = h.first_data_col + 2 * h.k1 + h.k2 + h.k3;
        if (f.size() != expected) throw InputError("read_csv: wrong field count in row");
        std::size_t at = 0;
        ids.push_back(std::stoi(f[at++]));
        if (h.panel) ts.push_back(std::stoi(f[at++]));
        const int d1 = std::stoi(f[at++]);
        const int d2 = std::stoi(f[at++]);
        if ((d1 != 0 && d1 != 1) || (d2 != 0 && d2 != 1))
            throw InputError("read_csv: d1/d2 must be binary");
        choices.push_back({static_cast<std::uint8_t>(d1), static_cast<std::uint8_t>(d2)});
        std::vector<double> vals;
        for (; at < f.size(); ++at) vals.push_back(std::stod(f[at]));
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw InputError("read_csv: no data rows");

    const int total_rows = static_cast<int>(rows.size());
    auto fill = [&](Matrix& m, int offset, int cols) {
        m = Matrix(total_rows, cols);
        for (int i = 0; i < total_rows; ++i)
            for (int j = 0; j < cols; ++j) m(i, j) = rows[i][offset + j];
    };

    if (!h.panel) {
        CrossSectionDataset d;
        d.n = total_rows;
        fill(d.x1, 0, h.k1);
        fill(d.x2, h.k1, h.k1);
        fill(d.w, 2 * h.k1, h.k2);
        fill(d.s, 2 * h.k1 + h.k2, h.k3);
        d.choice = std::move(choices);
        infer_discrete(d.x1, d.x_discrete, d.x_categories);
        infer_discrete(d.w, d.w_discrete, d.w_categories);
        infer_discrete(d.s, d.s_discrete, d.s_categories);
        return d;
    }

    PanelDataset d;
    // rows arrive agent-major with consecutive periods
    int t_periods = 0;
    for (std::size_t r = 0; r < ts.size() && ids[r] == ids[0]; ++r) ++t_periods;
    if (t_periods < 2) throw InputError("read_csv: panel needs at least two periods");
    if (total_rows % t_periods != 0) throw InputError("read_csv: unbalanced panel");
    d.n = total_rows / t_periods;
    d.t_periods = t_periods;
    fill(d.x1, 0, h.k1);
    fill(d.x2, h.k1, h.k1);
    fill(d.w, 2 * h.k1, h.k2);
    fill(d.s, 2 * h.k1 + h.k2, h.k3);
    d.choice = std::move(choices);
    infer_discrete(d.x1, d.x_discrete, d.x_categories);
    infer_discrete(d.w, d.w_discrete, d.w_categories);
    infer_discrete(d.s, d.s_discrete, d.s_categories);
    return d;
}

nlohmann::json result_to_json(const EstimationResult& r, const std::string& method) {
    nlohmann::json j;
    j["method"] = method;
    j["estimate"] = {{"beta", r.estimate.beta},
                     {"gamma", r.estimate.gamma},
                     {"rho1", r.estimate.rho1},
                     {"rho2", r.estimate.rho2},
                     {"rho_b", r.estimate.rho_b}};
    j["free"] = {{"names", r.free_names}, {"values", r.free_values}};
    j["criteria"] = {{"stage1", r.stage1_criterion},
                     {"stage2", r.stage2_criterion},
                     {"combined", r.criterion}};
    j["bandwidths"] = {{"stage1", r.bandwidths_stage1}, {"stage2", r.bandwidths_stage2}};
    j["seed"] = r.seed;
    j["seconds"] = r.seconds;
    if (r.bootstrap_draws.rows() > 0) {
        nlohmann::json draws = nlohmann::json::array();
        for (int b = 0; b < r.bootstrap_draws.rows(); ++b) {
            nlohmann::json row = nlohmann::json::array();
            for (int c = 0; c < r.bootstrap_draws.cols(); ++c) row.push_back(r.bootstrap_draws(b, c));
            draws.push_back(std::move(row));
        }
        nlohmann::json cis = nlohmann::json::array();
        for (const auto& ci : r.ci) cis.push_back({ci[0], ci[1]});
        j["bootstrap"] = {{"draws", std::move(draws)},
                          {"ci", std::move(cis)},
                          {"excluded_draws", r.excluded_draws}};
    }
    if (r.epsilon1 > 0.0) j["epsilon"] = {r.epsilon1, r.epsilon2};
    j["switchers"] = {r.switchers_stage1, r.switchers_stage2};
    if (r.first_stage_clamp_rate >= 0.0 || r.first_stage_loss >= 0.0)
        j["first_stage"] = {{"clamp_rate", r.first_stage_clamp_rate},
                            {"training_loss", r.first_stage_loss}};
    return j;
}

nlohmann::json eta_result_to_json(const EtaTestResult& r, const std::string& method) {
    return nlohmann::json{{"method", method},
                          {"statistic", r.statistic},
                          {"ci_lower_5pct", r.ci_lower_5pct},
                          {"supports_positive_eta", r.supports_positive_eta},
                          {"draws", r.draws}};
}

nlohmann::json mlp_to_json(const MLP& net) {
    nlohmann::json layers = nlohmann::json::array();
    for (int l = 0; l < 3; ++l) {
        const Matrix& w = net.layer_weights(l);
        nlohmann::json rows = nlohmann::json::array();
        for (int i = 0; i < w.rows(); ++i)
            rows.push_back(std::vector<double>(w.row(i).begin(), w.row(i).end()));
        layers.push_back({{"weights", std::move(rows)}, {"bias", net.layer_bias(l)}});
    }
    return nlohmann::json{{"inputs", net.n_inputs()},
                          {"hidden_units", net.hidden_units()},
                          {"layers", std::move(layers)},
                          {"standardization",
                           {{"mean", net.feature_means()}, {"sd", net.feature_sds()}}}};
}

RunConfig parse_run_config(const nlohmann::json& j) {
    RunConfig cfg;
    if (j.contains("kernel_orders")) {
        const auto& k = j.at("kernel_orders");
        cfg.mrc.stage1_kernel_order = k.value("mrc_stage1", cfg.mrc.stage1_kernel_order);
        cfg.mrc.stage2_kernel_order = k.value("mrc_stage2", cfg.mrc.stage2_kernel_order);
        cfg.panel.kernel_order = k.value("panel", cfg.panel.kernel_order);
        cfg.lad.nw.kernel_order = k.value("nw", cfg.lad.nw.kernel_order);
    }
    if (j.contains("bandwidth_constants")) {
        const auto& c = j.at("bandwidth_constants");
        cfg.mrc.c1 = c.value("c1", cfg.mrc.c1);
        cfg.mrc.c2 = c.value("c2", cfg.mrc.c2);
        cfg.panel.c3 = c.value("c3", cfg.panel.c3);
        cfg.nb.c4 = c.value("c4", cfg.nb.c4);
    }
    if (j.contains("de")) {
        const auto& d = j.at("de");
        DEConfig de;
        de.population_size = d.value("population", 0);
        de.weight = d.value("weight", de.weight);
        de.crossover = d.value("crossover", de.crossover);
        de.max_generations = d.value("generations", de.max_generations);
        cfg.mrc.de = de;
        cfg.panel.de = de;
        cfg.lad.de = de;
        const int bgen = d.value("bootstrap_generations", 0);
        cfg.mrc.bootstrap_de_generations = bgen;
        cfg.panel.bootstrap_de_generations = bgen;
        cfg.lad.bootstrap_de_generations = bgen;
    }
    if (j.contains("search_bound")) {
        const double bound = j.at("search_bound").get<double>();
        cfg.mrc.search_bound = bound;
        cfg.panel.search_bound = bound;
        cfg.lad.search_bound = bound;
    }
    if (j.contains("first_stage")) {
        const auto& f = j.at("first_stage");
        cfg.lad.nw.silverman_constant = f.value("silverman_constant", cfg.lad.nw.silverman_constant);
        cfg.lad.nw.discrete_lambda = f.value("discrete_lambda", cfg.lad.nw.discrete_lambda);
        cfg.lad.mlp.epochs = f.value("mlp_epochs", cfg.lad.mlp.epochs);
        cfg.lad.mlp.learning_rate = f.value("mlp_learning_rate", cfg.lad.mlp.learning_rate);
        cfg.lad.mlp.neurons_per_layer = f.value("mlp_neurons", cfg.lad.mlp.neurons_per_layer);
    }
    if (j.contains("epsilon")) {
        const auto& e = j.at("epsilon");
        const std::string rule = e.value("rule", std::string("section4"));
        if (rule == "section4")
            cfg.nb.rule = EpsilonRule::section4;
        else if (rule == "rate")
            cfg.nb.rule = EpsilonRule::rate;
        else
            throw ConfigError("config: unknown epsilon rule " + rule);
        cfg.nb.c4 = e.value("c4", cfg.nb.c4);
        cfg.nb.epsilon1 = e.value("epsilon1", 0.0);
        cfg.nb.epsilon2 = e.value("epsilon2", 0.0);
    }
    if (j.contains("lad")) {
        const auto& l = j.at("lad");
        cfg.lad.include_rho_b = l.value("include_rho_b", cfg.lad.include_rho_b);
        cfg.lad.combine_all_alternatives = l.value("combine_all", cfg.lad.combine_all_alternatives);
        cfg.lad.single_alternative = l.value("single_alternative", cfg.lad.single_alternative);
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    if (path.empty()) return RunConfig{};
    std::ifstream in(path);
    if (!in) throw InputError("config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    return parse_run_config(j);
}

namespace {

void apply_mask(const nlohmann::json& spec, Matrix& m, std::vector<std::uint8_t>& mask,
                std::vector<int>& cats) {
    std::vector<int> discrete_cols = spec.get<std::vector<int>>();
    mask.assign(m.cols(), 0);
    cats.assign(m.cols(), 0);
    for (int j : discrete_cols) {
        if (j < 1 || j > m.cols()) throw ConfigError("config: discrete column index out of range");
        mask[j - 1] = 1;
        double max_v = 1.0;
        for (int i = 0; i < m.rows(); ++i) max_v = std::max(max_v, m(i, j - 1));
        cats[j - 1] = std::max(2, static_cast<int>(max_v) + 1);
    }
}

template <class Dataset>
void apply_overrides_impl(const nlohmann::json& j, Dataset& data) {
    if (!j.contains("discrete_columns")) return;
    const auto& d = j.at("discrete_columns");
    if (d.contains("x")) apply_mask(d.at("x"), data.x1, data.x_discrete, data.x_categories);
    if (d.contains("w")) apply_mask(d.at("w"), data.w, data.w_discrete, data.w_categories);
    if (d.contains("s")) apply_mask(d.at("s"), data.s, data.s_discrete, data.s_categories);
}

}  // namespace

void apply_column_overrides(const nlohmann::json& j, CrossSectionDataset& data) {
    apply_overrides_impl(j, data);
}

void apply_column_overrides(const nlohmann::json& j, PanelDataset& data) {
    apply_overrides_impl(j, data);
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open for writing: " + path);
    out << content;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace bundlechoice
