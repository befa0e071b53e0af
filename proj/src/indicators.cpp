#include "jmrp/indicators.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "jmrp/csv.hpp"
#include "jmrp/errors.hpp"

namespace jmrp {

namespace {

// Dummy columns of the schema covariates (no phone or modality columns).
std::vector<std::size_t> dummy_columns(std::span<const std::size_t> levels, const ModelSpec& spec) {
  std::vector<std::size_t> cols;
  std::size_t col = 0;
  for (std::size_t c = 0; c < spec.covariate_schema.size(); ++c) {
    const auto& cov = spec.covariate_schema[c];
    if (levels[c] >= cov.levels.size()) {
      throw SchemaError("covariate '" + cov.name + "': unknown category code " + std::to_string(levels[c]));
    }
    for (std::size_t l = 0; l < cov.levels.size(); ++l) {
      if (l == cov.reference) continue;
      if (l == levels[c]) cols.push_back(col);
      ++col;
    }
  }
  return cols;
}

}  // namespace

double fcs(const FoodFrequencies& freq) {
  double score = 0.0;
  for (std::size_t g = 0; g < freq.days.size(); ++g) {
    if (freq.days[g] < 0 || freq.days[g] > 7) {
      throw DomainError(std::string("food group '") + kFoodGroups[g] + "' frequency " +
                        std::to_string(freq.days[g]) + " outside 0-7");
    }
    score += kFoodWeights[g] * freq.days[g];
  }
  return score;
}

std::string to_string(FcsClass c) {
  switch (c) {
    case FcsClass::Poor: return "poor";
    case FcsClass::Borderline: return "borderline";
    default: return "acceptable";
  }
}

FcsThresholds FcsThresholds::preset(const std::string& name) {
  if (name == "standard") return standard();
  if (name == "zimbabwe") return zimbabwe();
  throw SchemaError("unknown FCS threshold preset '" + name + "' (use standard or zimbabwe)");
}

void FcsThresholds::validate() const {
  if (!(poor_max > 0.0 && poor_max < borderline_max && borderline_max < 112.0)) {
    throw SchemaError("FCS thresholds must satisfy 0 < poor_max < borderline_max < 112");
  }
}

FcsClass classify(double score, const FcsThresholds& th) {
  if (score <= th.poor_max) return FcsClass::Poor;
  if (score <= th.borderline_max) return FcsClass::Borderline;
  return FcsClass::Acceptable;
}

OwnershipPosterior::OwnershipPosterior(ModelSpec spec, const std::vector<OwnershipRow>& rows)
    : spec_(std::move(spec)), width_(spec_.dummy_width()) {
  std::map<std::pair<std::size_t, std::vector<std::size_t>>, std::pair<double, double>> counts;
  for (const auto& r : rows) {
    if (r.district >= spec_.S) throw SchemaError("ownership row district out of range");
    if (r.covariates.size() != spec_.covariate_schema.size()) throw SchemaError("ownership row has wrong arity");
    if (r.owns != 0 && r.owns != 1) throw SchemaError("ownership flag must be 0 or 1");
    auto& c = counts[{r.district, dummy_columns(r.covariates, spec_)}];
    c.first += r.owns;
    c.second += 1.0;
  }
  for (const auto& [key, c] : counts) patterns_.push_back({key.second, key.first, c.first, c.second});
}

std::vector<std::string> OwnershipPosterior::coordinate_names() const {
  std::vector<std::string> names = {"alpha"};
  auto cols = spec_.design_column_names();
  for (std::size_t k = 0; k < width_; ++k) names.push_back("beta." + cols[k]);
  for (std::size_t s = 0; s < spec_.S; ++s) names.push_back("u." + std::to_string(s));
  names.push_back("log_sigma_u");
  return names;
}

double OwnershipPosterior::log_density_gradient(std::span<const double> x, std::span<double> g) const {
  std::fill(g.begin(), g.end(), 0.0);
  const std::size_t u0 = 1 + width_, ls = u0 + spec_.S;
  double lp = 0.0;
  for (const auto& p : patterns_) {
    double eta = x[0] + x[u0 + p.district];
    for (auto c : p.columns) eta += x[1 + c];
    lp += p.successes * eta - p.trials * softplus(eta);
    const double r = p.successes - p.trials * logistic(eta);
    g[0] += r;
    g[u0 + p.district] += r;
    for (auto c : p.columns) g[1 + c] += r;
  }
  lp += normal_logpdf(x[0], 0.0, spec_.beta_sd);
  g[0] -= x[0] / (spec_.beta_sd * spec_.beta_sd);
  for (std::size_t k = 0; k < width_; ++k) {
    lp += normal_logpdf(x[1 + k], 0.0, spec_.beta_sd);
    g[1 + k] -= x[1 + k] / (spec_.beta_sd * spec_.beta_sd);
  }
  const double sigma = std::exp(x[ls]);
  if (!(sigma > 0.0) || !std::isfinite(sigma)) return -std::numeric_limits<double>::infinity();
  double ss = 0.0;
  for (std::size_t s = 0; s < spec_.S; ++s) {
    const double u = x[u0 + s];
    lp += normal_logpdf(u, 0.0, sigma);
    g[u0 + s] -= u / (sigma * sigma);
    ss += u * u;
  }
  lp += hyperprior_logpdf(sigma, spec_) + x[ls];
  // d/dlog sigma of the normal terms, the hyperprior and the Jacobian
  double dprior;
  if (spec_.prior_family == PriorFamily::PC) {
    dprior = -pc_rate(spec_) * sigma;
  } else {
    const double z = sigma / spec_.half_cauchy_scale;
    dprior = -2.0 * z * z / (1.0 + z * z);
  }
  g[ls] += -static_cast<double>(spec_.S) + ss / (sigma * sigma) + dprior + 1.0;
  if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
  return lp;
}

PhoneOwnershipModel::PhoneOwnershipModel(ModelSpec spec, PosteriorDraws draws)
    : spec_(std::move(spec)), draws_(std::move(draws)), width_(spec_.dummy_width()) {}

double PhoneOwnershipModel::predict(std::span<const std::size_t> covariates, std::size_t district) const {
  const auto cols = dummy_columns(covariates, spec_);
  const std::size_t u0 = 1 + width_;
  double acc = 0.0;
  for (std::size_t b = 0; b < draws_.size(); ++b) {
    const auto x = draws_.draw(b);
    double eta = x[0];
    for (auto c : cols) eta += x[1 + c];
    if (district < spec_.S) eta += x[u0 + district];
    acc += logistic(eta);
  }
  return acc / draws_.size();
}

PhoneOwnershipModel fit_phone_ownership(const ModelSpec& spec, const std::vector<OwnershipRow>& rows,
                                        const SamplerConfig& config) {
  std::size_t owners = 0;
  for (const auto& r : rows) owners += r.owns == 1;
  if (rows.empty() || owners == 0 || owners == rows.size()) {
    throw DomainError("phone ownership fit is degenerate: outcomes need both owners and non-owners");
  }
  OwnershipPosterior posterior(spec, rows);
  return PhoneOwnershipModel(spec, sample(posterior, config));
}

std::vector<SurveyRecord> impute_phone_prob(std::vector<SurveyRecord> records, const PhoneOwnershipModel& model) {
  const auto& schema = model.spec().covariate_schema;
  std::vector<std::size_t> missing(schema.size(), 0);
  for (const auto& r : records) {
    for (std::size_t c = 0; c < schema.size(); ++c) {
      if (c >= r.covariates.size() || r.covariates[c] >= schema[c].levels.size()) ++missing[c];
    }
  }
  std::string report;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (missing[c]) report += " " + schema[c].name + "=" + std::to_string(missing[c]);
  }
  if (!report.empty()) throw SchemaError("records lack covariates needed for imputation:" + report);

  std::map<std::pair<std::size_t, std::vector<std::size_t>>, double> cache;
  for (auto& r : records) {
    if (r.modality != Modality::MP) continue;
    auto key = std::make_pair(r.district, r.covariates);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, model.predict(r.covariates, r.district)).first;
    r.phone_prob = it->second;
  }
  return records;
}

std::vector<OwnershipRow> read_ownership_rows(const std::string& path, const ModelSpec& spec) {
  const auto table = csv::read(path);
  const auto d_col = table.require("district");
  const auto o_col = table.require("owns");
  std::vector<std::size_t> cov_cols;
  for (const auto& c : spec.covariate_schema) cov_cols.push_back(table.require(c.name));
  std::vector<std::size_t> missing(cov_cols.size(), 0);
  std::vector<OwnershipRow> rows;
  for (const auto& row : table.rows) {
    OwnershipRow r;
    r.district = static_cast<std::size_t>(csv::parse_int(row[d_col], path));
    r.owns = static_cast<int>(csv::parse_int(row[o_col], path));
    bool ok = true;
    for (std::size_t c = 0; c < cov_cols.size(); ++c) {
      const auto& field = row[cov_cols[c]];
      if (field.empty() || field == "NA") {
        ++missing[c];
        ok = false;
        continue;
      }
      r.covariates.push_back(spec.covariate_schema[c].level_index(field));
    }
    if (ok) rows.push_back(std::move(r));
  }
  std::string report;
  for (std::size_t c = 0; c < cov_cols.size(); ++c) {
    if (missing[c]) report += " " + spec.covariate_schema[c].name + "=" + std::to_string(missing[c]);
  }
  if (!report.empty()) throw SchemaError(path + ": missing covariate values:" + report);
  return rows;
}

std::string ownership_rows_to_csv(const std::vector<OwnershipRow>& rows, const ModelSpec& spec) {
  std::ostringstream out;
  out << "district,owns";
  for (const auto& c : spec.covariate_schema) out << ',' << c.name;
  out << '\n';
  for (const auto& r : rows) {
    out << r.district << ',' << r.owns;
    for (std::size_t c = 0; c < r.covariates.size(); ++c) out << ',' << spec.covariate_schema[c].levels[r.covariates[c]];
    out << '\n';
  }
  return out.str();
}

}  // namespace jmrp
