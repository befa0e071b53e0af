#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jmrp/model.hpp"
#include "jmrp/weights.hpp"

namespace jmrp {

struct SimConfig {
  std::size_t S = 12, R = 3, T = 10;
  std::size_t grid_rows = 3, grid_cols = 4;
  InteractionLevel interaction_level = InteractionLevel::Province;

  double gamma = -1.375;
  /// One coefficient per covariate dummy; empty uses built-in defaults.
  std::vector<double> beta;
  double phone_effect = 0.0;
  double modality_effect = 1.438;
  /// F2F x dummy effects; empty means zero.
  std::vector<double> interaction_effects;
  double sigma_phi = 0.5, sigma_zeta = 0.2, sigma_nu = 0.2, sigma_xi = 0.05, sigma_psi = 0.15;

  /// Log-odds of ownership = phone_base + strength * (centered SES score of the cell).
  double phone_selection_strength = 1.0;
  double phone_base = 0.5;

  std::size_t mp_per_district_month = 30;
  std::size_t f2f_per_district = 60;  // per F2F month
  std::vector<std::size_t> f2f_months = {2, 8};
  /// An F2F month whose records are emitted separately and kept out of the dataset.
  std::optional<std::size_t> holdout_month;
  double population_per_district = 10000.0;
  std::uint64_t seed = 1;

  /// Throws SchemaError on inconsistent settings.
  void validate() const;
};

SimConfig sim_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const SimConfig& conf);

/// Five categorical covariates: water source, head education, female head,
/// household size and toilet type.
ModelSpec simulation_spec(const SimConfig& conf);

struct GroundTruth {
  ModelSpec spec;
  ParamState params;
  /// Population cells over the schema covariates and phone ownership.
  PostStratTable table;
  std::vector<double> ownership_prob;  // per table cell
  std::vector<double> prevalence;      // p_st on the F2F scale, s * T + t
  std::size_t T = 0;

  double p(std::size_t s, std::size_t t) const { return prevalence[s * T + t]; }
};

struct Simulation {
  Dataset data;
  std::vector<SurveyRecord> holdout;
  GroundTruth truth;
};

/// Pure function of the config.
Simulation generate(const SimConfig& conf);

/// Weighted mean of true F2F probabilities over the district's cells, computed
/// from spec, params and table. Throws DomainError when the district has no weight.
double true_prevalence(const GroundTruth& gt, std::size_t s, std::size_t t);
/// True response probability of a table cell (schema covariates then phone ownership).
double true_cell_probability(const GroundTruth& gt, const PostStratCell& cell, std::size_t t, Modality modality);

std::string truth_to_csv(const GroundTruth& gt, std::size_t S);

}  // namespace jmrp
