#include "jmrp/data_io.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "jmrp/csv.hpp"
#include "jmrp/errors.hpp"

namespace jmrp {

namespace {

using nlohmann::json;

template <typename T>
T get_as(const json& doc, const std::string& key) {
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw SchemaError("config key '" + key + "': " + e.what());
  }
}

std::size_t get_count(const json& doc, const std::string& key) {
  const auto& v = doc.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw SchemaError("config key '" + key + "' must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace

ModelSpec model_spec_from_json(const json& doc) {
  if (!doc.is_object()) throw SchemaError("model config must be a JSON object");
  static const std::set<std::string> known = {
      "S", "R", "T", "district_to_province", "covariate_schema", "include_modality",
      "include_modality_interactions", "interaction_level", "prior_family", "pc_threshold", "pc_tail_prob",
      "half_cauchy_scale", "beta_sd"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) throw SchemaError("unknown model config key '" + key + "'");
  }
  for (const char* key : {"S", "R", "T", "district_to_province", "covariate_schema"}) {
    if (!doc.contains(key)) throw SchemaError("missing model config key '" + std::string(key) + "'");
  }
  ModelSpec spec;
  spec.S = get_count(doc, "S");
  spec.R = get_count(doc, "R");
  spec.T = get_count(doc, "T");
  spec.district_to_province = get_as<std::vector<std::size_t>>(doc, "district_to_province");
  const auto& schema = doc.at("covariate_schema");
  if (!schema.is_array()) throw SchemaError("config key 'covariate_schema' must be an array");
  for (const auto& entry : schema) {
    for (const auto& [key, value] : entry.items()) {
      if (key != "name" && key != "levels" && key != "reference") {
        throw SchemaError("unknown covariate_schema key '" + key + "'");
      }
    }
    Covariate cov;
    cov.name = get_as<std::string>(entry, "name");
    cov.levels = get_as<std::vector<std::string>>(entry, "levels");
    if (entry.contains("reference")) {
      cov.reference = cov.level_index(get_as<std::string>(entry, "reference"));
    }
    spec.covariate_schema.push_back(std::move(cov));
  }
  if (doc.contains("include_modality")) spec.include_modality = get_as<bool>(doc, "include_modality");
  if (doc.contains("include_modality_interactions")) {
    spec.include_modality_interactions = get_as<bool>(doc, "include_modality_interactions");
  }
  if (doc.contains("interaction_level")) {
    auto level = get_as<std::string>(doc, "interaction_level");
    if (level == "province") spec.interaction_level = InteractionLevel::Province;
    else if (level == "district") spec.interaction_level = InteractionLevel::District;
    else throw SchemaError("config key 'interaction_level': expected province or district, got '" + level + "'");
  }
  if (doc.contains("prior_family")) {
    auto family = get_as<std::string>(doc, "prior_family");
    if (family == "PC") spec.prior_family = PriorFamily::PC;
    else if (family == "HalfCauchy") spec.prior_family = PriorFamily::HalfCauchy;
    else throw SchemaError("config key 'prior_family': expected PC or HalfCauchy, got '" + family + "'");
  }
  if (doc.contains("pc_threshold")) spec.pc_threshold = get_as<double>(doc, "pc_threshold");
  if (doc.contains("pc_tail_prob")) spec.pc_tail_prob = get_as<double>(doc, "pc_tail_prob");
  if (doc.contains("half_cauchy_scale")) spec.half_cauchy_scale = get_as<double>(doc, "half_cauchy_scale");
  if (doc.contains("beta_sd")) spec.beta_sd = get_as<double>(doc, "beta_sd");
  spec.validate();
  return spec;
}

json to_json(const ModelSpec& spec) {
  json doc;
  doc["S"] = spec.S;
  doc["R"] = spec.R;
  doc["T"] = spec.T;
  doc["district_to_province"] = spec.district_to_province;
  json schema = json::array();
  for (const auto& cov : spec.covariate_schema) {
    schema.push_back({{"name", cov.name}, {"levels", cov.levels}, {"reference", cov.levels[cov.reference]}});
  }
  doc["covariate_schema"] = schema;
  doc["include_modality"] = spec.include_modality;
  doc["include_modality_interactions"] = spec.include_modality_interactions;
  doc["interaction_level"] = to_string(spec.interaction_level);
  doc["prior_family"] = to_string(spec.prior_family);
  doc["pc_threshold"] = spec.pc_threshold;
  doc["pc_tail_prob"] = spec.pc_tail_prob;
  doc["half_cauchy_scale"] = spec.half_cauchy_scale;
  doc["beta_sd"] = spec.beta_sd;
  return doc;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const json& doc) { csv::write_file(path, doc.dump(2) + "\n"); }

std::vector<SurveyRecord> read_records(const std::string& path, const ModelSpec& spec) {
  auto table = csv::read(path);
  const auto c_outcome = table.require("outcome");
  const auto c_modality = table.require("modality");
  const auto c_district = table.require("district");
  const auto c_province = table.require("province");
  const auto c_month = table.require("month");
  const auto c_weight = table.require("weight");
  const auto c_phone = table.require("phone_prob");
  std::vector<std::size_t> c_cov;
  for (const auto& cov : spec.covariate_schema) c_cov.push_back(table.require(cov.name));

  std::map<std::string, std::size_t> missing;
  std::vector<SurveyRecord> records;
  records.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string ctx = path + " row " + std::to_string(i + 2);
    bool complete = true;
    for (std::size_t c = 0; c < c_cov.size(); ++c) {
      if (row[c_cov[c]].empty() || row[c_cov[c]] == "NA") {
        ++missing[spec.covariate_schema[c].name];
        complete = false;
      }
    }
    if (row[c_phone].empty() || row[c_phone] == "NA") {
      ++missing["phone_prob"];
      complete = false;
    }
    if (!complete) continue;
    SurveyRecord rec;
    rec.outcome = static_cast<int>(csv::parse_int(row[c_outcome], ctx));
    rec.modality = parse_modality(row[c_modality]);
    auto index = [&](std::size_t col) {
      auto v = csv::parse_int(row[col], ctx);
      if (v < 0) throw SchemaError(ctx + ": negative index '" + row[col] + "'");
      return static_cast<std::size_t>(v);
    };
    rec.district = index(c_district);
    rec.province = index(c_province);
    rec.month = index(c_month);
    rec.weight = csv::parse_double(row[c_weight], ctx);
    rec.phone_prob = csv::parse_double(row[c_phone], ctx);
    for (std::size_t c = 0; c < c_cov.size(); ++c) {
      rec.covariates.push_back(spec.covariate_schema[c].level_index(row[c_cov[c]]));
    }
    try {
      validate_record(rec, spec);
    } catch (const SchemaError& e) {
      throw SchemaError(ctx + ": " + e.what());
    }
    records.push_back(std::move(rec));
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << path << ": rows with missing covariates rejected:";
    for (const auto& [name, count] : missing) msg << ' ' << name << '=' << count;
    throw SchemaError(msg.str());
  }
  return records;
}

std::string records_to_csv(const std::vector<SurveyRecord>& records, const ModelSpec& spec) {
  std::ostringstream out;
  out << "outcome,modality,district,province,month,weight,phone_prob";
  for (const auto& cov : spec.covariate_schema) out << ',' << cov.name;
  out << '\n';
  for (const auto& r : records) {
    out << r.outcome << ',' << to_string(r.modality) << ',' << r.district << ',' << r.province << ',' << r.month
        << ',' << csv::format(r.weight) << ',' << csv::format(r.phone_prob);
    for (std::size_t c = 0; c < r.covariates.size(); ++c) {
      out << ',' << spec.covariate_schema[c].levels.at(r.covariates[c]);
    }
    out << '\n';
  }
  return out.str();
}

void write_records(const std::string& path, const std::vector<SurveyRecord>& records, const ModelSpec& spec) {
  csv::write_file(path, records_to_csv(records, spec));
}

Dataset load_dataset(const std::string& data_path, const std::string& graph_path, const ModelSpec& spec) {
  Dataset data;
  data.spec = spec;
  data.graph = read_edge_list(graph_path, spec.S);
  data.records = read_records(data_path, spec);
  data.validate();
  return data;
}

}  // namespace jmrp
