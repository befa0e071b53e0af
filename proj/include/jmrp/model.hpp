#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "jmrp/graph.hpp"
#include "jmrp/log_density.hpp"

namespace jmrp {

enum class Modality { MP, F2F };
enum class InteractionLevel { Province, District };
enum class PriorFamily { PC, HalfCauchy };

std::string to_string(Modality m);
std::string to_string(InteractionLevel level);
std::string to_string(PriorFamily family);
/// Accepts "MP"/"F2F" (case-insensitive); throws SchemaError otherwise.
Modality parse_modality(const std::string& text);

struct Covariate {
  std::string name;
  std::vector<std::string> levels;
  std::size_t reference = 0;  // index into levels

  /// Index of a level label; throws SchemaError naming the covariate.
  std::size_t level_index(const std::string& label) const;
};

struct ModelSpec {
  std::size_t S = 1;
  std::size_t R = 1;
  std::size_t T = 1;
  std::vector<std::size_t> district_to_province;
  std::vector<Covariate> covariate_schema;
  bool include_modality = true;
  bool include_modality_interactions = true;
  InteractionLevel interaction_level = InteractionLevel::Province;
  PriorFamily prior_family = PriorFamily::PC;
  double pc_threshold = 1.0;
  double pc_tail_prob = 0.01;
  double half_cauchy_scale = 1.0;
  double beta_sd = 5.0;

  /// Throws SchemaError describing the first violated invariant.
  void validate() const;

  std::size_t design_width() const;
  std::vector<std::string> design_column_names() const;
  /// Number of categorical dummy columns (covariates 2-6 after reference coding).
  std::size_t dummy_width() const;
  std::size_t phone_column() const { return dummy_width(); }
  /// Column of the F2F indicator; only meaningful when include_modality.
  std::size_t modality_column() const { return dummy_width() + 1; }
  bool has_interactions() const { return include_modality && include_modality_interactions; }

  std::size_t interaction_size() const;
  std::size_t interaction_index(std::size_t district, std::size_t month) const;
};

/// One household interview.
struct SurveyRecord {
  int outcome = 0;
  std::vector<std::size_t> covariates;  // level codes, one per schema covariate
  double phone_prob = 0.0;
  Modality modality = Modality::MP;
  std::size_t district = 0;
  std::size_t province = 0;
  std::size_t month = 0;
  double weight = 1.0;
};

/// Throws SchemaError when the record violates the ModelSpec.
void validate_record(const SurveyRecord& record, const ModelSpec& spec);

struct Dataset {
  std::vector<SurveyRecord> records;
  ModelSpec spec;
  AdjacencyGraph graph;

  void validate() const;
};

enum SigmaBlock : std::size_t { kSigmaPhi = 0, kSigmaZeta, kSigmaNu, kSigmaXi, kSigmaPsi, kSigmaCount };

struct ParamState {
  double gamma = 0.0;
  std::vector<double> beta;
  std::vector<double> phi;
  std::vector<double> zeta;
  std::vector<double> nu;
  std::vector<double> xi;
  std::vector<double> psi;
  std::array<double, kSigmaCount> log_sigma{};

  static ParamState zeros(const ModelSpec& spec);
  bool all_finite() const;
  /// Throws DomainError when block sizes do not match the ModelSpec.
  void check_dimensions(const ModelSpec& spec) const;
};

/// Dummy-coded design row (reference levels give zero, modality reference is MP).
std::vector<double> build_design_row(const SurveyRecord& record, const ModelSpec& spec);
std::vector<double> build_design_row(std::span<const std::size_t> levels, double phone_prob, Modality modality,
                                     const ModelSpec& spec);

double logistic(double eta);
/// log(1 + exp(eta)) without overflow.
double softplus(double eta);

double linear_predictor(std::span<const double> row, std::size_t district, std::size_t month,
                        const ParamState& params, const ModelSpec& spec);
double linear_predictor(std::span<const double> row, const SurveyRecord& record, const ParamState& params,
                        const ModelSpec& spec);

double normal_logpdf(double x, double mean, double sd);

/// Unnormalized ICAR log density: pairwise kernel, -(S - C) log sigma, and a
/// soft sum-to-zero term N(sum | 0, 0.001 |c|) per component with >= 2 nodes.
double icar_logpdf(std::span<const double> phi, double sigma, const AdjacencyGraph& graph);

/// Log density of a scale parameter under the configured hyperprior family.
double hyperprior_logpdf(double sigma, const ModelSpec& spec);
/// Rate of the exponential PC prior: -ln(tail_prob) / threshold.
double pc_rate(const ModelSpec& spec);

/// Maps ParamState blocks to a flat unconstrained vector. Isolated graph nodes
/// have phi fixed at zero and are not part of the vector.
class ParameterLayout {
 public:
  ParameterLayout() = default;
  ParameterLayout(ModelSpec spec, const AdjacencyGraph& graph);
  ParameterLayout(ModelSpec spec, std::vector<std::size_t> free_phi);

  const ModelSpec& spec() const { return spec_; }
  std::size_t dimension() const { return dimension_; }
  const std::vector<std::size_t>& free_phi() const { return free_phi_; }

  std::size_t beta_offset() const { return 1; }
  std::size_t phi_offset() const { return phi_offset_; }
  std::size_t zeta_offset() const { return zeta_offset_; }
  std::size_t nu_offset() const { return nu_offset_; }
  std::size_t xi_offset() const { return xi_offset_; }
  std::size_t psi_offset() const { return psi_offset_; }
  std::size_t log_sigma_offset() const { return log_sigma_offset_; }

  std::vector<std::string> names() const;
  std::vector<double> pack(const ParamState& params) const;
  ParamState unpack(std::span<const double> x) const;

 private:
  void compute_offsets();

  ModelSpec spec_;
  std::vector<std::size_t> free_phi_;
  std::size_t phi_offset_ = 0, zeta_offset_ = 0, nu_offset_ = 0, xi_offset_ = 0, psi_offset_ = 0,
              log_sigma_offset_ = 0, dimension_ = 0;
};

/// Log posterior of the joint model over the flat layout. Records sharing a
/// design row, district and month are collapsed into binomial counts.
class JointPosterior final : public LogDensity {
 public:
  explicit JointPosterior(const Dataset& data);

  std::size_t dimension() const override { return layout_.dimension(); }
  double log_density_gradient(std::span<const double> x, std::span<double> grad) const override;
  double log_density(std::span<const double> x) const;
  std::vector<std::string> coordinate_names() const override { return layout_.names(); }

  const ParameterLayout& layout() const { return layout_; }
  const AdjacencyGraph& graph() const { return graph_; }
  std::size_t pattern_count() const { return successes_.size(); }

 private:
  // Patterns sharing a (district, month) cell are stored contiguously.
  struct Cell {
    std::size_t district, month, psi_index, begin, end;
  };

  double evaluate(std::span<const double> x, std::span<double> grad) const;

  ParameterLayout layout_;
  AdjacencyGraph graph_;
  std::vector<Cell> cells_;
  std::vector<std::size_t> row_start_;  // CSR over patterns
  std::vector<std::uint32_t> columns_;
  std::vector<double> values_;
  std::vector<double> successes_, trials_;
};

/// The joint posterior in sampler coordinates: every random-effect block is
/// sigma_k * z_k, and z is further rotated by a Helmert basis within each ICAR
/// component and within nu so the soft sum constraints act on one coordinate.
/// That sum coordinate is left unscaled, since only the soft constraint sees it.
/// The two district scales are sampled as log tau = log(sigma_phi^2 + sigma_zeta^2) / 2
/// and logit rho, rho = sigma_phi^2 / tau^2. Densities include all log Jacobians.
class NonCenteredPosterior final : public LogDensity {
 public:
  explicit NonCenteredPosterior(const JointPosterior& centered);

  std::size_t dimension() const override { return centered_.dimension(); }
  double log_density_gradient(std::span<const double> z, std::span<double> grad) const override;
  std::vector<std::string> coordinate_names() const override { return centered_.coordinate_names(); }

  std::vector<double> to_centered(std::span<const double> z) const;
  std::vector<double> to_noncentered(std::span<const double> x) const;

 private:
  struct Block {
    std::size_t offset, size, sigma;
  };
  const JointPosterior& centered_;
  std::vector<Block> blocks_;
  std::vector<std::vector<std::size_t>> rotated_;  // flat positions per rotated group
  std::vector<bool> unscaled_;                     // sum coordinate of each rotated group
};

double log_posterior(const ParamState& params, const Dataset& data);
/// Gradient with respect to gamma, beta, phi, zeta, nu, xi, psi and log_sigma.
/// Isolated phi entries are fixed and receive zero gradient.
ParamState grad_log_posterior(const ParamState& params, const Dataset& data);

}  // namespace jmrp
