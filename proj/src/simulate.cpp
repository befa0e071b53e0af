#include "jmrp/simulate.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "jmrp/csv.hpp"
#include "jmrp/errors.hpp"
#include "jmrp/rng.hpp"

namespace jmrp {

namespace {

using nlohmann::json;

const std::vector<double> kDefaultBeta = {-0.495, -0.101, -0.509, -1.653, 0.289, 0.192, 0.474, 0.681, -0.194};

// Base marginal shares per covariate, perturbed per district.
const std::vector<std::vector<double>> kBaseShares = {
    {0.4, 0.6}, {0.15, 0.45, 0.35, 0.05}, {0.65, 0.35}, {0.2, 0.35, 0.3, 0.15}, {0.5, 0.5}};

enum Stream : std::uint64_t { kTruth = 1, kPopulation, kMobile, kFaceToFace };

double ses_score(std::span<const std::size_t> codes) {
  // improved water, education level, improved toilet
  return static_cast<double>(codes[0]) + static_cast<double>(codes[1]) / 1.5 + static_cast<double>(codes[4]) - 2.0;
}

std::vector<double> icar_draw(const AdjacencyGraph& graph, double sigma, std::mt19937_64& gen) {
  std::normal_distribution<double> normal;
  std::vector<double> phi(graph.node_count(), 0.0);
  for (const auto& comp : graph.components()) {
    if (comp.size() < 2) continue;
    const auto n = static_cast<Eigen::Index>(comp.size());
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
    std::vector<Eigen::Index> local(graph.node_count(), -1);
    for (Eigen::Index i = 0; i < n; ++i) local[comp[i]] = i;
    for (const auto& [a, b] : graph.edges()) {
      if (local[a] < 0) continue;
      lap(local[a], local[a]) += 1.0;
      lap(local[b], local[b]) += 1.0;
      lap(local[a], local[b]) -= 1.0;
      lap(local[b], local[a]) -= 1.0;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lap);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double lambda = eig.eigenvalues()(k);
      if (lambda < 1e-9) continue;
      v += eig.eigenvectors().col(k) * (normal(gen) / std::sqrt(lambda));
    }
    for (Eigen::Index i = 0; i < n; ++i) phi[comp[i]] = sigma * v(i);
  }
  return phi;
}

template <typename T>
T take(const json& doc, const std::string& key, T fallback) {
  if (!doc.contains(key)) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw SchemaError("simulation config key '" + key + "': " + e.what());
  }
}

}  // namespace

void SimConfig::validate() const {
  if (S == 0 || R == 0 || T == 0) throw SchemaError("simulation: S, R and T must be positive");
  if (grid_rows * grid_cols != S) throw SchemaError("simulation: grid_rows * grid_cols must equal S");
  if (R > grid_rows) throw SchemaError("simulation: provinces are row blocks, so R must not exceed grid_rows");
  for (auto t : f2f_months) {
    if (t >= T) throw SchemaError("simulation: f2f month " + std::to_string(t) + " outside [0,T)");
  }
  if (holdout_month && *holdout_month >= T) throw SchemaError("simulation: holdout_month outside [0,T)");
  if (!beta.empty() && beta.size() != kDefaultBeta.size()) {
    throw SchemaError("simulation: beta needs " + std::to_string(kDefaultBeta.size()) + " entries");
  }
  if (!interaction_effects.empty() && interaction_effects.size() != kDefaultBeta.size()) {
    throw SchemaError("simulation: interaction_effects needs " + std::to_string(kDefaultBeta.size()) + " entries");
  }
  for (double s : {sigma_phi, sigma_zeta, sigma_nu, sigma_xi, sigma_psi}) {
    if (!(s > 0.0)) throw SchemaError("simulation: generation scales must be positive");
  }
  if (!(population_per_district > 0.0)) throw SchemaError("simulation: population_per_district must be positive");
}

SimConfig sim_config_from_json(const json& doc) {
  if (!doc.is_object()) throw SchemaError("simulation config must be a JSON object");
  static const std::set<std::string> known = {
      "S", "R", "T", "grid_rows", "grid_cols", "interaction_level", "gamma", "beta", "phone_effect",
      "modality_effect", "interaction_effects", "sigma_phi", "sigma_zeta", "sigma_nu", "sigma_xi", "sigma_psi",
      "phone_selection_strength", "phone_base", "mp_per_district_month", "f2f_per_district", "f2f_months",
      "holdout_month", "population_per_district", "seed"};
  for (const auto& [key, _] : doc.items()) {
    if (!known.count(key)) throw SchemaError("unknown simulation config key '" + key + "'");
  }
  SimConfig c;
  c.S = take(doc, "S", c.S);
  c.R = take(doc, "R", c.R);
  c.T = take(doc, "T", c.T);
  c.grid_rows = take(doc, "grid_rows", c.grid_rows);
  c.grid_cols = take(doc, "grid_cols", c.grid_cols);
  const auto level = take<std::string>(doc, "interaction_level", "province");
  if (level == "province") c.interaction_level = InteractionLevel::Province;
  else if (level == "district") c.interaction_level = InteractionLevel::District;
  else throw SchemaError("simulation config key 'interaction_level' must be province or district");
  c.gamma = take(doc, "gamma", c.gamma);
  c.beta = take(doc, "beta", c.beta);
  c.phone_effect = take(doc, "phone_effect", c.phone_effect);
  c.modality_effect = take(doc, "modality_effect", c.modality_effect);
  c.interaction_effects = take(doc, "interaction_effects", c.interaction_effects);
  c.sigma_phi = take(doc, "sigma_phi", c.sigma_phi);
  c.sigma_zeta = take(doc, "sigma_zeta", c.sigma_zeta);
  c.sigma_nu = take(doc, "sigma_nu", c.sigma_nu);
  c.sigma_xi = take(doc, "sigma_xi", c.sigma_xi);
  c.sigma_psi = take(doc, "sigma_psi", c.sigma_psi);
  c.phone_selection_strength = take(doc, "phone_selection_strength", c.phone_selection_strength);
  c.phone_base = take(doc, "phone_base", c.phone_base);
  c.mp_per_district_month = take(doc, "mp_per_district_month", c.mp_per_district_month);
  c.f2f_per_district = take(doc, "f2f_per_district", c.f2f_per_district);
  c.f2f_months = take(doc, "f2f_months", c.f2f_months);
  if (doc.contains("holdout_month") && !doc.at("holdout_month").is_null()) {
    c.holdout_month = take<std::size_t>(doc, "holdout_month", 0);
  }
  c.population_per_district = take(doc, "population_per_district", c.population_per_district);
  c.seed = take(doc, "seed", c.seed);
  c.validate();
  return c;
}

json to_json(const SimConfig& c) {
  json doc = {{"S", c.S},
              {"R", c.R},
              {"T", c.T},
              {"grid_rows", c.grid_rows},
              {"grid_cols", c.grid_cols},
              {"interaction_level", to_string(c.interaction_level)},
              {"gamma", c.gamma},
              {"beta", c.beta},
              {"phone_effect", c.phone_effect},
              {"modality_effect", c.modality_effect},
              {"interaction_effects", c.interaction_effects},
              {"sigma_phi", c.sigma_phi},
              {"sigma_zeta", c.sigma_zeta},
              {"sigma_nu", c.sigma_nu},
              {"sigma_xi", c.sigma_xi},
              {"sigma_psi", c.sigma_psi},
              {"phone_selection_strength", c.phone_selection_strength},
              {"phone_base", c.phone_base},
              {"mp_per_district_month", c.mp_per_district_month},
              {"f2f_per_district", c.f2f_per_district},
              {"f2f_months", c.f2f_months},
              {"population_per_district", c.population_per_district},
              {"seed", c.seed}};
  doc["holdout_month"] = c.holdout_month ? json(*c.holdout_month) : json(nullptr);
  return doc;
}

ModelSpec simulation_spec(const SimConfig& conf) {
  ModelSpec spec;
  spec.S = conf.S;
  spec.R = conf.R;
  spec.T = conf.T;
  for (std::size_t s = 0; s < conf.S; ++s) spec.district_to_province.push_back((s / conf.grid_cols) * conf.R / conf.grid_rows);
  spec.covariate_schema = {{"water_source", {"other", "improved"}, 0},
                           {"head_education", {"none", "primary", "secondary", "higher"}, 0},
                           {"female_head", {"no", "yes"}, 0},
                           {"household_size", {"1-2", "3-4", "5-6", "7+"}, 0},
                           {"toilet_type", {"unimproved", "improved"}, 0}};
  spec.interaction_level = conf.interaction_level;
  spec.validate();
  return spec;
}

double true_cell_probability(const GroundTruth& gt, const PostStratCell& cell, std::size_t t, Modality modality) {
  const auto& spec = gt.spec;
  const std::span<const std::size_t> levels(cell.codes.data(), spec.covariate_schema.size());
  const double own = static_cast<double>(cell.codes.back());
  const auto row = build_design_row(levels, own, modality, spec);
  return logistic(linear_predictor(row, cell.district, t, gt.params, spec));
}

double true_prevalence(const GroundTruth& gt, std::size_t s, std::size_t t) {
  double num = 0.0, den = 0.0;
  for (const auto& cell : gt.table.cells) {
    if (cell.district != s || cell.weight == 0.0) continue;
    num += cell.weight * true_cell_probability(gt, cell, t, Modality::F2F);
    den += cell.weight;
  }
  if (!(den > 0.0)) throw DomainError("true_prevalence: district " + std::to_string(s) + " has no population weight");
  return num / den;
}

Simulation generate(const SimConfig& conf) {
  conf.validate();
  const ModelSpec spec = simulation_spec(conf);
  Simulation sim;
  sim.data.spec = spec;
  sim.data.graph = AdjacencyGraph::grid(conf.grid_rows, conf.grid_cols);

  // Truth.
  std::mt19937_64 truth_gen(rng::derive(conf.seed, {kTruth}));
  std::normal_distribution<double> normal;
  sim.truth.spec = spec;
  auto& p = sim.truth.params;
  p = ParamState::zeros(spec);
  p.gamma = conf.gamma;
  const auto& beta = conf.beta.empty() ? kDefaultBeta : conf.beta;
  const std::size_t dummies = spec.dummy_width();
  for (std::size_t k = 0; k < dummies; ++k) p.beta[k] = beta[k];
  p.beta[spec.phone_column()] = conf.phone_effect;
  p.beta[spec.modality_column()] = conf.modality_effect;
  for (std::size_t k = 0; k < dummies && !conf.interaction_effects.empty(); ++k) {
    p.beta[spec.modality_column() + 1 + k] = conf.interaction_effects[k];
  }
  p.phi = icar_draw(sim.data.graph, conf.sigma_phi, truth_gen);
  for (auto& z : p.zeta) z = conf.sigma_zeta * normal(truth_gen);
  double level = 0.0;
  for (auto& v : p.nu) {
    level += conf.sigma_nu * normal(truth_gen);
    v = level;
  }
  double nu_mean = 0.0;
  for (double v : p.nu) nu_mean += v / p.nu.size();
  for (auto& v : p.nu) v -= nu_mean;
  for (auto& v : p.xi) v = conf.sigma_xi * normal(truth_gen);
  for (auto& v : p.psi) v = conf.sigma_psi * normal(truth_gen);
  p.log_sigma = {std::log(conf.sigma_phi), std::log(conf.sigma_zeta), std::log(conf.sigma_nu),
                 std::log(conf.sigma_xi), std::log(conf.sigma_psi)};

  // Population cells per district: covariate combinations crossed with ownership.
  std::mt19937_64 pop_gen(rng::derive(conf.seed, {kPopulation}));
  auto& table = sim.truth.table;
  table.S = spec.S;
  table.variables = model_variables(spec);
  for (std::size_t s = 0; s < spec.S; ++s) {
    std::vector<std::vector<double>> shares = kBaseShares;
    for (auto& v : shares) {
      double sum = 0.0;
      for (auto& x : v) {
        x *= std::exp(0.3 * normal(pop_gen));
        sum += x;
      }
      for (auto& x : v) x /= sum;
    }
    std::vector<std::size_t> codes(6, 0);
    for (codes[0] = 0; codes[0] < 2; ++codes[0])
      for (codes[1] = 0; codes[1] < 4; ++codes[1])
        for (codes[2] = 0; codes[2] < 2; ++codes[2])
          for (codes[3] = 0; codes[3] < 4; ++codes[3])
            for (codes[4] = 0; codes[4] < 2; ++codes[4]) {
              double w = conf.population_per_district;
              for (std::size_t c = 0; c < 5; ++c) w *= shares[c][codes[c]];
              const double own = logistic(conf.phone_base + conf.phone_selection_strength * ses_score(codes));
              for (codes[5] = 0; codes[5] < 2; ++codes[5]) {
                table.cells.push_back({s, codes, w * (codes[5] ? own : 1.0 - own)});
                sim.truth.ownership_prob.push_back(own);
              }
            }
  }
  table.validate();

  sim.truth.T = spec.T;
  sim.truth.prevalence.assign(spec.S * spec.T, 0.0);
  for (std::size_t s = 0; s < spec.S; ++s) {
    for (std::size_t t = 0; t < spec.T; ++t) sim.truth.prevalence[s * spec.T + t] = true_prevalence(sim.truth, s, t);
  }

  // Surveys. Cells of district s occupy a contiguous block of the table.
  const std::size_t per_district = table.cells.size() / spec.S;
  auto draw_records = [&](Modality modality, std::size_t s, std::size_t t, std::size_t n,
                          std::vector<SurveyRecord>& out) {
    std::mt19937_64 gen(rng::derive(conf.seed, {modality == Modality::MP ? kMobile : kFaceToFace, s, t}));
    std::vector<double> w(per_district);
    for (std::size_t j = 0; j < per_district; ++j) {
      const auto& cell = table.cells[s * per_district + j];
      // phone survey reaches owners only
      w[j] = modality == Modality::MP && cell.codes[5] == 0 ? 0.0 : cell.weight;
    }
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    std::uniform_real_distribution<double> unif;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = s * per_district + pick(gen);
      const auto& cell = table.cells[j];
      SurveyRecord r;
      r.covariates.assign(cell.codes.begin(), cell.codes.begin() + 5);
      r.modality = modality;
      r.district = s;
      r.province = spec.district_to_province[s];
      r.month = t;
      const double prob = true_cell_probability(sim.truth, cell, t, modality);
      r.outcome = unif(gen) < prob ? 1 : 0;
      const double own_prob = sim.truth.ownership_prob[j];
      if (modality == Modality::MP) {
        r.phone_prob = own_prob;
        r.weight = 1.0 / own_prob;
      } else {
        r.phone_prob = static_cast<double>(cell.codes[5]);
        r.weight = 1.0;
      }
      out.push_back(std::move(r));
    }
  };

  const std::set<std::size_t> f2f(conf.f2f_months.begin(), conf.f2f_months.end());
  for (std::size_t t = 0; t < spec.T; ++t) {
    for (std::size_t s = 0; s < spec.S; ++s) {
      draw_records(Modality::MP, s, t, conf.mp_per_district_month, sim.data.records);
      if (conf.holdout_month && *conf.holdout_month == t) {
        draw_records(Modality::F2F, s, t, conf.f2f_per_district, sim.holdout);
      } else if (f2f.count(t)) {
        draw_records(Modality::F2F, s, t, conf.f2f_per_district, sim.data.records);
      }
    }
  }
  sim.data.validate();
  return sim;
}

std::string truth_to_csv(const GroundTruth& gt, std::size_t S) {
  std::ostringstream out;
  out << "district,month,p_true\n";
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t t = 0; t < gt.T; ++t) out << s << ',' << t << ',' << csv::format(gt.p(s, t)) << '\n';
  }
  return out.str();
}

}  // namespace jmrp
