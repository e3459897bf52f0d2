#pragma once

#include <string>
#include <variant>

#include <json.hpp>

#include "bundlechoice/harness.hpp"

namespace bundlechoice {

// CSV dataset exchange and JSON result/config serialization.
//
// CSV layout: id[,t],d1,d2,x1_1..x1_k1,x2_1..x2_k1,w_1..w_k2,s_1..s_k3 with a
// mandatory header row; floats carry 17 significant digits.

void write_csv(const CrossSectionDataset& data, const std::string& path);
void write_csv(const PanelDataset& data, const std::string& path);

using AnyDataset = std::variant<CrossSectionDataset, PanelDataset>;

// panel datasets are recognized by the presence of the `t` column; discrete
// columns are inferred from integrality unless the config overrides them
AnyDataset read_csv(const std::string& path);

nlohmann::json result_to_json(const EstimationResult& result, const std::string& method);
nlohmann::json eta_result_to_json(const EtaTestResult& result, const std::string& method);

// layer weight matrices plus the standardization vectors
nlohmann::json mlp_to_json(const MLP& net);

// configuration JSON (kernel orders, bandwidth constants, DE settings, search
// bounds, first-stage settings, epsilon rule)
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);  // empty path -> defaults

// apply a config's discrete-column overrides, when present
void apply_column_overrides(const nlohmann::json& j, CrossSectionDataset& data);
void apply_column_overrides(const nlohmann::json& j, PanelDataset& data);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace bundlechoice
