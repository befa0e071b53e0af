#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jmrp/model.hpp"

namespace jmrp {

/// Strict: unknown keys and wrongly typed values raise SchemaError naming the key.
ModelSpec model_spec_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ModelSpec& spec);

nlohmann::json read_json(const std::string& path);
void write_json(const std::string& path, const nlohmann::json& doc);

/// Columns: outcome, modality, district, province, month, weight, phone_prob,
/// then one column per schema covariate holding level labels. Rows with empty
/// covariate fields are rejected with a per-covariate count report.
std::vector<SurveyRecord> read_records(const std::string& path, const ModelSpec& spec);
std::string records_to_csv(const std::vector<SurveyRecord>& records, const ModelSpec& spec);
void write_records(const std::string& path, const std::vector<SurveyRecord>& records, const ModelSpec& spec);

Dataset load_dataset(const std::string& data_path, const std::string& graph_path, const ModelSpec& spec);

}  // namespace jmrp
