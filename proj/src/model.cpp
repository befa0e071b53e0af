#include "jmrp/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numbers>
#include <tuple>

#include "jmrp/errors.hpp"

namespace jmrp {

namespace {

constexpr double kSoftConstraintScale = 0.001;
const double kHalfLogTwoPi = 0.5 * std::log(2.0 * std::numbers::pi);

constexpr std::array<const char*, kSigmaCount> kSigmaNames = {"phi", "zeta", "nu", "xi", "psi"};

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

// Value and d/d(log sigma) of a log hyperprior plus the log-scale Jacobian.
double hyperprior_with_jacobian(double log_sigma, const ModelSpec& spec, double& dlog_sigma) {
  const double sigma = std::exp(log_sigma);
  if (spec.prior_family == PriorFamily::PC) {
    const double rate = pc_rate(spec);
    dlog_sigma += 1.0 - rate * sigma;
    return std::log(rate) - rate * sigma + log_sigma;
  }
  const double a = spec.half_cauchy_scale;
  const double ratio2 = (sigma / a) * (sigma / a);
  dlog_sigma += 1.0 - 2.0 * ratio2 / (1.0 + ratio2);
  return std::log(2.0 / (std::numbers::pi * a)) - std::log1p(ratio2) + log_sigma;
}

// iid N(0, sigma) block; accumulates gradients into values and log sigma.
double iid_normal_term(std::span<const double> values, double log_sigma, std::span<double> grad,
                       double& dlog_sigma) {
  const double inv_var = std::exp(-2.0 * log_sigma);
  double sq = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sq += values[i] * values[i];
    if (!grad.empty()) grad[i] -= values[i] * inv_var;
  }
  const double n = static_cast<double>(values.size());
  dlog_sigma += -n + sq * inv_var;
  return -n * (kHalfLogTwoPi + log_sigma) - 0.5 * sq * inv_var;
}

// Soft sum-to-zero constraint over the listed indices.
double soft_sum_term(std::span<const double> values, const std::vector<std::size_t>& members,
                     std::span<double> grad) {
  const double sd = kSoftConstraintScale * static_cast<double>(members.size());
  double sum = 0.0;
  for (auto i : members) sum += values[i];
  if (!grad.empty()) {
    const double d = -sum / (sd * sd);
    for (auto i : members) grad[i] += d;
  }
  return normal_logpdf(sum, 0.0, sd);
}

double icar_term(std::span<const double> phi, double log_sigma, const AdjacencyGraph& graph,
                 std::span<double> grad, double& dlog_sigma) {
  const double inv_var = std::exp(-2.0 * log_sigma);
  double q = 0.0;
  for (const auto& [a, b] : graph.edges()) {
    const double diff = phi[a] - phi[b];
    q += diff * diff;
    if (!grad.empty()) {
      grad[a] -= diff * inv_var;
      grad[b] += diff * inv_var;
    }
  }
  const double rank = static_cast<double>(graph.node_count() - graph.component_count());
  dlog_sigma += -rank + q * inv_var;
  double value = -rank * log_sigma - 0.5 * q * inv_var;
  for (const auto& comp : graph.components()) {
    if (comp.size() >= 2) value += soft_sum_term(phi, comp, grad);
  }
  return value;
}

double rw1_term(std::span<const double> nu, double log_sigma, std::span<double> grad, double& dlog_sigma) {
  const double inv_var = std::exp(-2.0 * log_sigma);
  double sq = 0.0;
  for (std::size_t t = 1; t < nu.size(); ++t) {
    const double diff = nu[t] - nu[t - 1];
    sq += diff * diff;
    if (!grad.empty()) {
      grad[t] -= diff * inv_var;
      grad[t - 1] += diff * inv_var;
    }
  }
  const double steps = static_cast<double>(nu.size() - 1);
  dlog_sigma += -steps + sq * inv_var;
  double value = -steps * (kHalfLogTwoPi + log_sigma) - 0.5 * sq * inv_var;
  std::vector<std::size_t> all(nu.size());
  for (std::size_t t = 0; t < nu.size(); ++t) all[t] = t;
  value += soft_sum_term(nu, all, grad);
  return value;
}

}  // namespace

std::string to_string(Modality m) { return m == Modality::MP ? "MP" : "F2F"; }
std::string to_string(InteractionLevel level) {
  return level == InteractionLevel::Province ? "province" : "district";
}
std::string to_string(PriorFamily family) { return family == PriorFamily::PC ? "PC" : "HalfCauchy"; }

Modality parse_modality(const std::string& text) {
  auto u = upper(text);
  if (u == "MP") return Modality::MP;
  if (u == "F2F") return Modality::F2F;
  throw SchemaError("unknown modality '" + text + "' (expected MP or F2F)");
}

std::size_t Covariate::level_index(const std::string& label) const {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == label) return i;
  }
  throw SchemaError("covariate '" + name + "': unknown level '" + label + "'");
}

void ModelSpec::validate() const {
  if (S < 1 || R < 1 || T < 1) throw SchemaError("S, R and T must be positive");
  if (district_to_province.size() != S) {
    throw SchemaError("district_to_province has " + std::to_string(district_to_province.size()) +
                      " entries, expected S=" + std::to_string(S));
  }
  for (std::size_t s = 0; s < S; ++s) {
    if (district_to_province[s] >= R) {
      throw SchemaError("district " + std::to_string(s) + " maps to invalid province " +
                        std::to_string(district_to_province[s]));
    }
  }
  for (const auto& cov : covariate_schema) {
    if (cov.name.empty()) throw SchemaError("covariate with empty name");
    if (cov.levels.size() < 2) throw SchemaError("covariate '" + cov.name + "' needs at least two levels");
    if (cov.reference >= cov.levels.size()) {
      throw SchemaError("covariate '" + cov.name + "': reference level out of range");
    }
  }
  if (!(pc_tail_prob > 0.0 && pc_tail_prob < 1.0)) throw SchemaError("pc_tail_prob must lie in (0,1)");
  if (!(pc_threshold > 0.0)) throw SchemaError("pc_threshold must be positive");
  if (!(half_cauchy_scale > 0.0)) throw SchemaError("half_cauchy_scale must be positive");
  if (!(beta_sd > 0.0)) throw SchemaError("beta_sd must be positive");
}

std::size_t ModelSpec::dummy_width() const {
  std::size_t width = 0;
  for (const auto& cov : covariate_schema) width += cov.levels.size() - 1;
  return width;
}

std::size_t ModelSpec::design_width() const {
  std::size_t width = dummy_width() + 1;
  if (include_modality) {
    width += 1;
    if (include_modality_interactions) width += dummy_width();
  }
  return width;
}

std::vector<std::string> ModelSpec::design_column_names() const {
  std::vector<std::string> dummies;
  for (const auto& cov : covariate_schema) {
    for (std::size_t l = 0; l < cov.levels.size(); ++l) {
      if (l != cov.reference) dummies.push_back(cov.name + "[" + cov.levels[l] + "]");
    }
  }
  std::vector<std::string> names = dummies;
  names.emplace_back("phone_ownership");
  if (include_modality) {
    names.emplace_back("modality[F2F]");
    if (include_modality_interactions) {
      for (const auto& d : dummies) names.push_back("modality[F2F]:" + d);
    }
  }
  return names;
}

std::size_t ModelSpec::interaction_size() const {
  return (interaction_level == InteractionLevel::Province ? R : S) * T;
}

std::size_t ModelSpec::interaction_index(std::size_t district, std::size_t month) const {
  const std::size_t unit = interaction_level == InteractionLevel::Province ? district_to_province[district] : district;
  return unit * T + month;
}

void validate_record(const SurveyRecord& record, const ModelSpec& spec) {
  if (record.outcome != 0 && record.outcome != 1) throw SchemaError("outcome must be 0 or 1");
  if (!(record.phone_prob >= 0.0 && record.phone_prob <= 1.0)) throw SchemaError("phone_prob must lie in [0,1]");
  if (record.district >= spec.S) throw SchemaError("district " + std::to_string(record.district) + " out of range");
  if (record.month >= spec.T) throw SchemaError("month " + std::to_string(record.month) + " out of range");
  if (spec.district_to_province[record.district] != record.province) {
    throw SchemaError("district " + std::to_string(record.district) + " is not in province " +
                      std::to_string(record.province));
  }
  if (!(record.weight >= 0.0) || !std::isfinite(record.weight)) throw SchemaError("weight must be nonnegative");
  if (record.covariates.size() != spec.covariate_schema.size()) {
    throw SchemaError("record has " + std::to_string(record.covariates.size()) + " covariates, schema has " +
                      std::to_string(spec.covariate_schema.size()));
  }
  for (std::size_t c = 0; c < record.covariates.size(); ++c) {
    if (record.covariates[c] >= spec.covariate_schema[c].levels.size()) {
      throw SchemaError("covariate '" + spec.covariate_schema[c].name + "': unknown category code " +
                        std::to_string(record.covariates[c]));
    }
  }
}

void Dataset::validate() const {
  spec.validate();
  if (graph.node_count() != spec.S) {
    throw SchemaError("graph has " + std::to_string(graph.node_count()) + " nodes, spec has S=" +
                      std::to_string(spec.S));
  }
  for (const auto& r : records) validate_record(r, spec);
}

ParamState ParamState::zeros(const ModelSpec& spec) {
  ParamState p;
  p.beta.assign(spec.design_width(), 0.0);
  p.phi.assign(spec.S, 0.0);
  p.zeta.assign(spec.S, 0.0);
  p.nu.assign(spec.T, 0.0);
  p.xi.assign(spec.T, 0.0);
  p.psi.assign(spec.interaction_size(), 0.0);
  return p;
}

bool ParamState::all_finite() const {
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return std::isfinite(gamma) && finite(beta) && finite(phi) && finite(zeta) && finite(nu) && finite(xi) &&
         finite(psi) && std::all_of(log_sigma.begin(), log_sigma.end(), [](double x) { return std::isfinite(x); });
}

void ParamState::check_dimensions(const ModelSpec& spec) const {
  auto check = [](const char* name, std::size_t got, std::size_t want) {
    if (got != want) {
      throw DomainError(std::string(name) + " has length " + std::to_string(got) + ", expected " +
                        std::to_string(want));
    }
  };
  check("beta", beta.size(), spec.design_width());
  check("phi", phi.size(), spec.S);
  check("zeta", zeta.size(), spec.S);
  check("nu", nu.size(), spec.T);
  check("xi", xi.size(), spec.T);
  check("psi", psi.size(), spec.interaction_size());
}

std::vector<double> build_design_row(std::span<const std::size_t> levels, double phone_prob, Modality modality,
                                     const ModelSpec& spec) {
  if (levels.size() != spec.covariate_schema.size()) {
    throw SchemaError("expected " + std::to_string(spec.covariate_schema.size()) + " covariate codes, got " +
                      std::to_string(levels.size()));
  }
  std::vector<double> row(spec.design_width(), 0.0);
  std::size_t col = 0;
  for (std::size_t c = 0; c < levels.size(); ++c) {
    const auto& cov = spec.covariate_schema[c];
    if (levels[c] >= cov.levels.size()) {
      throw SchemaError("covariate '" + cov.name + "': unknown category code " + std::to_string(levels[c]));
    }
    for (std::size_t l = 0; l < cov.levels.size(); ++l) {
      if (l == cov.reference) continue;
      if (l == levels[c]) row[col] = 1.0;
      ++col;
    }
  }
  const std::size_t dummies = col;
  row[spec.phone_column()] = phone_prob;
  if (spec.include_modality) {
    const double f2f = modality == Modality::F2F ? 1.0 : 0.0;
    row[spec.modality_column()] = f2f;
    if (spec.include_modality_interactions) {
      for (std::size_t k = 0; k < dummies; ++k) row[spec.modality_column() + 1 + k] = f2f * row[k];
    }
  }
  return row;
}

std::vector<double> build_design_row(const SurveyRecord& record, const ModelSpec& spec) {
  return build_design_row(record.covariates, record.phone_prob, record.modality, spec);
}

double logistic(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double softplus(double eta) {
  if (eta > 0.0) return eta + std::log1p(std::exp(-eta));
  return std::log1p(std::exp(eta));
}

double linear_predictor(std::span<const double> row, std::size_t district, std::size_t month,
                        const ParamState& params, const ModelSpec& spec) {
  if (row.size() != params.beta.size()) {
    throw DomainError("design row has width " + std::to_string(row.size()) + ", beta has " +
                      std::to_string(params.beta.size()));
  }
  double eta = params.gamma;
  for (std::size_t k = 0; k < row.size(); ++k) eta += row[k] * params.beta[k];
  eta += params.phi.at(district) + params.zeta.at(district) + params.nu.at(month) + params.xi.at(month);
  eta += params.psi.at(spec.interaction_index(district, month));
  return eta;
}

double linear_predictor(std::span<const double> row, const SurveyRecord& record, const ParamState& params,
                        const ModelSpec& spec) {
  return linear_predictor(row, record.district, record.month, params, spec);
}

double normal_logpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -kHalfLogTwoPi - std::log(sd) - 0.5 * z * z;
}

double icar_logpdf(std::span<const double> phi, double sigma, const AdjacencyGraph& graph) {
  if (!(sigma > 0.0)) throw DomainError("icar_logpdf: sigma must be positive");
  if (phi.size() != graph.node_count()) throw DomainError("icar_logpdf: phi length does not match graph");
  double unused = 0.0;
  return icar_term(phi, std::log(sigma), graph, {}, unused);
}

double pc_rate(const ModelSpec& spec) { return -std::log(spec.pc_tail_prob) / spec.pc_threshold; }

double hyperprior_logpdf(double sigma, const ModelSpec& spec) {
  if (!(sigma > 0.0)) throw DomainError("hyperprior_logpdf: sigma must be positive");
  if (spec.prior_family == PriorFamily::PC) {
    const double rate = pc_rate(spec);
    return std::log(rate) - rate * sigma;
  }
  const double a = spec.half_cauchy_scale;
  return std::log(2.0 / (std::numbers::pi * a)) - std::log1p((sigma / a) * (sigma / a));
}

// ---------------------------------------------------------------------------
// ParameterLayout

ParameterLayout::ParameterLayout(ModelSpec spec, const AdjacencyGraph& graph) : spec_(std::move(spec)) {
  for (std::size_t s = 0; s < graph.node_count(); ++s) {
    if (!graph.is_isolated(s)) free_phi_.push_back(s);
  }
  compute_offsets();
}

ParameterLayout::ParameterLayout(ModelSpec spec, std::vector<std::size_t> free_phi)
    : spec_(std::move(spec)), free_phi_(std::move(free_phi)) {
  for (auto s : free_phi_) {
    if (s >= spec_.S) throw SchemaError("free phi index out of range");
  }
  compute_offsets();
}

void ParameterLayout::compute_offsets() {
  phi_offset_ = 1 + spec_.design_width();
  zeta_offset_ = phi_offset_ + free_phi_.size();
  nu_offset_ = zeta_offset_ + spec_.S;
  xi_offset_ = nu_offset_ + spec_.T;
  psi_offset_ = xi_offset_ + spec_.T;
  log_sigma_offset_ = psi_offset_ + spec_.interaction_size();
  dimension_ = log_sigma_offset_ + kSigmaCount;
}

std::vector<std::string> ParameterLayout::names() const {
  std::vector<std::string> names;
  names.reserve(dimension_);
  names.emplace_back("gamma");
  for (const auto& col : spec_.design_column_names()) names.push_back("beta." + col);
  for (auto s : free_phi_) names.push_back("phi." + std::to_string(s));
  for (std::size_t s = 0; s < spec_.S; ++s) names.push_back("zeta." + std::to_string(s));
  for (std::size_t t = 0; t < spec_.T; ++t) names.push_back("nu." + std::to_string(t));
  for (std::size_t t = 0; t < spec_.T; ++t) names.push_back("xi." + std::to_string(t));
  for (std::size_t k = 0; k < spec_.interaction_size(); ++k) names.push_back("psi." + std::to_string(k));
  for (auto n : kSigmaNames) names.push_back(std::string("log_sigma.") + n);
  return names;
}

std::vector<double> ParameterLayout::pack(const ParamState& p) const {
  p.check_dimensions(spec_);
  std::vector<double> x(dimension_);
  x[0] = p.gamma;
  std::copy(p.beta.begin(), p.beta.end(), x.begin() + 1);
  for (std::size_t i = 0; i < free_phi_.size(); ++i) x[phi_offset_ + i] = p.phi[free_phi_[i]];
  std::copy(p.zeta.begin(), p.zeta.end(), x.begin() + zeta_offset_);
  std::copy(p.nu.begin(), p.nu.end(), x.begin() + nu_offset_);
  std::copy(p.xi.begin(), p.xi.end(), x.begin() + xi_offset_);
  std::copy(p.psi.begin(), p.psi.end(), x.begin() + psi_offset_);
  std::copy(p.log_sigma.begin(), p.log_sigma.end(), x.begin() + log_sigma_offset_);
  return x;
}

ParamState ParameterLayout::unpack(std::span<const double> x) const {
  if (x.size() != dimension_) throw DomainError("parameter vector has wrong dimension");
  ParamState p = ParamState::zeros(spec_);
  p.gamma = x[0];
  std::copy_n(x.begin() + 1, p.beta.size(), p.beta.begin());
  for (std::size_t i = 0; i < free_phi_.size(); ++i) p.phi[free_phi_[i]] = x[phi_offset_ + i];
  std::copy_n(x.begin() + zeta_offset_, spec_.S, p.zeta.begin());
  std::copy_n(x.begin() + nu_offset_, spec_.T, p.nu.begin());
  std::copy_n(x.begin() + xi_offset_, spec_.T, p.xi.begin());
  std::copy_n(x.begin() + psi_offset_, p.psi.size(), p.psi.begin());
  std::copy_n(x.begin() + log_sigma_offset_, kSigmaCount, p.log_sigma.begin());
  return p;
}

// ---------------------------------------------------------------------------
// JointPosterior

JointPosterior::JointPosterior(const Dataset& data) : layout_(data.spec, data.graph), graph_(data.graph) {
  data.validate();
  const auto& spec = data.spec;
  using Key = std::tuple<std::size_t, std::size_t, std::vector<std::pair<std::size_t, double>>>;
  std::map<Key, std::pair<double, double>> counts;
  for (const auto& rec : data.records) {
    auto row = build_design_row(rec, spec);
    std::vector<std::pair<std::size_t, double>> nz;
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (row[k] != 0.0) nz.emplace_back(k, row[k]);
    }
    auto& c = counts[Key{rec.district, rec.month, std::move(nz)}];
    c.first += rec.outcome;
    c.second += 1.0;
  }
  // map order groups patterns by (district, month)
  row_start_.push_back(0);
  for (const auto& [key, yn] : counts) {
    const auto district = std::get<0>(key), month = std::get<1>(key);
    if (cells_.empty() || cells_.back().district != district || cells_.back().month != month) {
      const auto at = successes_.size();
      cells_.push_back({district, month, spec.interaction_index(district, month), at, at});
    }
    for (const auto& [col, val] : std::get<2>(key)) {
      columns_.push_back(static_cast<std::uint32_t>(col));
      values_.push_back(val);
    }
    row_start_.push_back(columns_.size());
    successes_.push_back(yn.first);
    trials_.push_back(yn.second);
    cells_.back().end = successes_.size();
  }
}

double JointPosterior::log_density(std::span<const double> x) const { return evaluate(x, {}); }

double JointPosterior::log_density_gradient(std::span<const double> x, std::span<double> grad) const {
  if (grad.size() != dimension()) throw DomainError("gradient buffer has wrong dimension");
  return evaluate(x, grad);
}

double JointPosterior::evaluate(std::span<const double> x, std::span<double> grad) const {
  if (x.size() != dimension()) throw DomainError("parameter vector has wrong dimension");
  const auto& spec = layout_.spec();
  const bool want_grad = !grad.empty();
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);

  const std::size_t S = spec.S, T = spec.T;
  std::vector<double> phi(S, 0.0), grad_phi(want_grad ? S : 0, 0.0);
  const auto& free_phi = layout_.free_phi();
  for (std::size_t i = 0; i < free_phi.size(); ++i) phi[free_phi[i]] = x[layout_.phi_offset() + i];

  const double gamma = x[0];
  const auto beta = x.subspan(1, spec.design_width());
  const auto zeta = x.subspan(layout_.zeta_offset(), S);
  const auto nu = x.subspan(layout_.nu_offset(), T);
  const auto xi = x.subspan(layout_.xi_offset(), T);
  const auto psi = x.subspan(layout_.psi_offset(), spec.interaction_size());
  const auto log_sigma = x.subspan(layout_.log_sigma_offset(), kSigmaCount);

  auto grad_block = [&](std::size_t offset, std::size_t n) {
    return want_grad ? grad.subspan(offset, n) : std::span<double>{};
  };

  double lp = 0.0;
  for (const auto& c : cells_) {
    const double base = gamma + phi[c.district] + zeta[c.district] + nu[c.month] + xi[c.month] + psi[c.psi_index];
    double r_cell = 0.0;
    for (std::size_t i = c.begin; i < c.end; ++i) {
      double eta = base;
      for (std::size_t k = row_start_[i]; k < row_start_[i + 1]; ++k) eta += values_[k] * beta[columns_[k]];
      // one exponential for both softplus and logistic
      const double e = std::exp(-std::abs(eta));
      lp += successes_[i] * eta - trials_[i] * (std::max(eta, 0.0) + std::log1p(e));
      if (want_grad) {
        const double prob = eta >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
        const double r = successes_[i] - trials_[i] * prob;
        r_cell += r;
        for (std::size_t k = row_start_[i]; k < row_start_[i + 1]; ++k) grad[1 + columns_[k]] += r * values_[k];
      }
    }
    if (want_grad) {
      grad[0] += r_cell;
      grad_phi[c.district] += r_cell;
      grad[layout_.zeta_offset() + c.district] += r_cell;
      grad[layout_.nu_offset() + c.month] += r_cell;
      grad[layout_.xi_offset() + c.month] += r_cell;
      grad[layout_.psi_offset() + c.psi_index] += r_cell;
    }
  }

  std::array<double, kSigmaCount> dls{};
  lp += icar_term(phi, log_sigma[kSigmaPhi], graph_, grad_phi, dls[kSigmaPhi]);
  lp += iid_normal_term(zeta, log_sigma[kSigmaZeta], grad_block(layout_.zeta_offset(), S), dls[kSigmaZeta]);
  lp += rw1_term(nu, log_sigma[kSigmaNu], grad_block(layout_.nu_offset(), T), dls[kSigmaNu]);
  lp += iid_normal_term(xi, log_sigma[kSigmaXi], grad_block(layout_.xi_offset(), T), dls[kSigmaXi]);
  lp += iid_normal_term(psi, log_sigma[kSigmaPsi], grad_block(layout_.psi_offset(), psi.size()), dls[kSigmaPsi]);
  for (std::size_t k = 0; k < kSigmaCount; ++k) lp += hyperprior_with_jacobian(log_sigma[k], spec, dls[k]);

  const double inv_beta_var = 1.0 / (spec.beta_sd * spec.beta_sd);
  lp += normal_logpdf(gamma, 0.0, spec.beta_sd);
  for (std::size_t k = 0; k < beta.size(); ++k) lp += normal_logpdf(beta[k], 0.0, spec.beta_sd);

  if (want_grad) {
    grad[0] -= gamma * inv_beta_var;
    for (std::size_t k = 0; k < beta.size(); ++k) grad[1 + k] -= beta[k] * inv_beta_var;
    for (std::size_t i = 0; i < free_phi.size(); ++i) grad[layout_.phi_offset() + i] = grad_phi[free_phi[i]];
    for (std::size_t k = 0; k < kSigmaCount; ++k) grad[layout_.log_sigma_offset() + k] = dls[k];
  }
  return lp;
}

double log_posterior(const ParamState& params, const Dataset& data) {
  params.check_dimensions(data.spec);
  if (!params.all_finite()) throw DomainError("log_posterior: non-finite parameter");
  JointPosterior posterior(data);
  return posterior.log_density(posterior.layout().pack(params));
}

ParamState grad_log_posterior(const ParamState& params, const Dataset& data) {
  params.check_dimensions(data.spec);
  if (!params.all_finite()) throw DomainError("grad_log_posterior: non-finite parameter");
  JointPosterior posterior(data);
  auto x = posterior.layout().pack(params);
  std::vector<double> g(x.size());
  posterior.log_density_gradient(x, g);
  return posterior.layout().unpack(g);
}

std::vector<std::string> LogDensity::coordinate_names() const {
  std::vector<std::string> names(dimension());
  for (std::size_t i = 0; i < names.size(); ++i) names[i] = "x." + std::to_string(i);
  return names;
}

}  // namespace jmrp

namespace jmrp {

namespace {

// Orthonormal Helmert basis: column 0 is the normalized ones vector, column k
// has k entries c_k followed by -k c_k with c_k = 1/sqrt(k(k+1)).
void helmert_apply(std::vector<double>& v, const std::vector<std::size_t>& pos) {
  const std::size_t n = pos.size();
  std::vector<double> u(n), z(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = v[pos[i]];
  double suffix = 0.0;  // sum over k > i of u_k c_k
  for (std::size_t i = n; i-- > 0;) {
    const double c = i > 0 ? 1.0 / std::sqrt(static_cast<double>(i * (i + 1))) : 0.0;
    z[i] = u[0] / std::sqrt(static_cast<double>(n)) + suffix - static_cast<double>(i) * u[i] * c;
    if (i > 0) suffix += u[i] * c;
  }
  for (std::size_t i = 0; i < n; ++i) v[pos[i]] = z[i];
}

void helmert_transpose(std::vector<double>& v, const std::vector<std::size_t>& pos) {
  const std::size_t n = pos.size();
  std::vector<double> z(n), u(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = v[pos[i]];
  double prefix = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) u[k] = (prefix - static_cast<double>(k) * z[k]) / std::sqrt(static_cast<double>(k * (k + 1)));
    prefix += z[k];
  }
  u[0] = prefix / std::sqrt(static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) v[pos[i]] = u[i];
}

}  // namespace

NonCenteredPosterior::NonCenteredPosterior(const JointPosterior& centered) : centered_(centered) {
  const auto& l = centered.layout();
  const auto& spec = l.spec();
  blocks_ = {{l.phi_offset(), l.free_phi().size(), kSigmaPhi},
             {l.zeta_offset(), spec.S, kSigmaZeta},
             {l.nu_offset(), spec.T, kSigmaNu},
             {l.xi_offset(), spec.T, kSigmaXi},
             {l.psi_offset(), spec.interaction_size(), kSigmaPsi}};
  const auto& free = l.free_phi();
  for (const auto& comp : centered.graph().components()) {
    if (comp.size() < 2) continue;
    std::vector<std::size_t> pos;
    for (auto node : comp) {
      const auto it = std::lower_bound(free.begin(), free.end(), node);
      pos.push_back(l.phi_offset() + static_cast<std::size_t>(it - free.begin()));
    }
    rotated_.push_back(std::move(pos));
  }
  if (spec.T >= 2) {
    std::vector<std::size_t> pos(spec.T);
    for (std::size_t t = 0; t < spec.T; ++t) pos[t] = l.nu_offset() + t;
    rotated_.push_back(std::move(pos));
  }
  unscaled_.assign(centered.dimension(), false);
  for (const auto& g : rotated_) unscaled_[g.front()] = true;
}

std::vector<double> NonCenteredPosterior::to_centered(std::span<const double> z) const {
  std::vector<double> x(z.begin(), z.end());
  const auto ls = centered_.layout().log_sigma_offset();
  // (log tau, logit rho) -> (log sigma_phi, log sigma_zeta), rho = sigma_phi^2 / tau^2
  const double log_tau = z[ls + kSigmaPhi], mix = z[ls + kSigmaZeta];
  x[ls + kSigmaPhi] = log_tau - 0.5 * softplus(-mix);
  x[ls + kSigmaZeta] = log_tau - 0.5 * softplus(mix);
  for (const auto& b : blocks_) {
    const double sigma = std::exp(x[ls + b.sigma]);
    for (std::size_t i = b.offset; i < b.offset + b.size; ++i) {
      if (!unscaled_[i]) x[i] *= sigma;
    }
  }
  for (const auto& g : rotated_) helmert_apply(x, g);
  return x;
}

std::vector<double> NonCenteredPosterior::to_noncentered(std::span<const double> x) const {
  std::vector<double> z(x.begin(), x.end());
  const auto ls = centered_.layout().log_sigma_offset();
  for (const auto& g : rotated_) helmert_transpose(z, g);
  for (const auto& b : blocks_) {
    const double inv = std::exp(-x[ls + b.sigma]);
    for (std::size_t i = b.offset; i < b.offset + b.size; ++i) {
      if (!unscaled_[i]) z[i] *= inv;
    }
  }
  const double a = x[ls + kSigmaPhi], b = x[ls + kSigmaZeta];
  const double hi = std::max(a, b);
  z[ls + kSigmaPhi] = hi + 0.5 * std::log(std::exp(2.0 * (a - hi)) + std::exp(2.0 * (b - hi)));
  z[ls + kSigmaZeta] = 2.0 * (a - b);
  return z;
}

double NonCenteredPosterior::log_density_gradient(std::span<const double> z, std::span<double> grad) const {
  const auto x = to_centered(z);
  const double lp = centered_.log_density_gradient(x, grad);
  if (!std::isfinite(lp)) return lp;
  // back through the rotation; w holds the scaled, unrotated values
  std::vector<double> w = x;
  if (!rotated_.empty()) {
    std::vector<double> g(grad.begin(), grad.end());
    for (const auto& r : rotated_) {
      helmert_transpose(g, r);
      helmert_transpose(w, r);
    }
    std::copy(g.begin(), g.end(), grad.begin());
  }
  const auto ls = centered_.layout().log_sigma_offset();
  double jacobian = -std::numbers::ln2;  // |d(log sigma_phi, log sigma_zeta) / d(log tau, logit rho)| = 1/2
  for (const auto& b : blocks_) {
    const double log_sigma = x[ls + b.sigma];
    const double sigma = std::exp(log_sigma);
    double chain = 0.0, scaled = 0.0;
    for (std::size_t i = b.offset; i < b.offset + b.size; ++i) {
      if (unscaled_[i]) continue;
      chain += grad[i] * w[i];
      grad[i] *= sigma;
      scaled += 1.0;
    }
    grad[ls + b.sigma] += chain + scaled;
    jacobian += scaled * log_sigma;
  }
  const double rho = logistic(z[ls + kSigmaZeta]);
  const double g_phi = grad[ls + kSigmaPhi], g_zeta = grad[ls + kSigmaZeta];
  grad[ls + kSigmaPhi] = g_phi + g_zeta;
  grad[ls + kSigmaZeta] = 0.5 * (g_phi * (1.0 - rho) - g_zeta * rho);
  return lp + jacobian;
}

}  // namespace jmrp
