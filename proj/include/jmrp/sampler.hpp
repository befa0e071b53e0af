#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jmrp/log_density.hpp"
#include "jmrp/model.hpp"

namespace jmrp {

struct SamplerConfig {
  std::size_t chains = 4;
  std::size_t iterations = 1500;  // per chain, including warmup
  std::size_t warmup = 500;
  double target_accept = 0.8;
  std::size_t max_treedepth = 10;
  std::uint64_t seed = 0;
  double init_scale = 0.1;
  /// Worker threads; 0 runs one thread per chain, 1 runs chains sequentially.
  std::size_t threads = 0;

  /// Throws SchemaError on invalid settings.
  void validate() const;
};

struct ChainAdaptation {
  double step_size = 0.0;
  std::vector<double> inv_metric;
};

/// Post-warmup draws of all chains, row-major (draw x coordinate).
struct PosteriorDraws {
  std::vector<std::string> names;
  std::size_t chains = 0;
  std::size_t draws_per_chain = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> divergent;
  std::vector<std::uint32_t> treedepth;
  std::vector<std::uint32_t> n_leapfrog;
  std::vector<double> accept_stat;
  std::vector<ChainAdaptation> adaptation;
  /// Present when the draws come from the joint model.
  std::optional<ParameterLayout> layout;

  std::size_t size() const { return chains * draws_per_chain; }
  std::size_t dimension() const { return names.size(); }
  std::size_t chain_of(std::size_t draw) const { return draw / draws_per_chain; }
  std::span<const double> draw(std::size_t b) const {
    return std::span<const double>(values).subspan(b * dimension(), dimension());
  }
  std::vector<double> column(std::size_t coord) const;
  std::size_t divergence_count() const;
  /// Requires layout.
  ParamState param_state(std::size_t b) const;
  std::optional<std::size_t> find(const std::string& name) const;
};

/// Multinomial NUTS with windowed diagonal-metric and dual-averaging step-size
/// adaptation. Deterministic in (target, config) regardless of threading.
/// Throws std::runtime_error when no finite starting point is found in 100 tries.
PosteriorDraws sample(const LogDensity& target, const SamplerConfig& config);

/// Fits the joint model; the returned draws carry the parameter layout.
PosteriorDraws sample(const Dataset& data, const SamplerConfig& config);

/// Evaluates cell log-odds directly on flat draws without unpacking them.
class CellPredictor {
 public:
  /// Throws SchemaError when the draws carry no model layout.
  explicit CellPredictor(const PosteriorDraws& draws);

  const ModelSpec& spec() const { return layout_.spec(); }
  std::size_t draw_count() const { return draws_->size(); }
  double eta(std::size_t b, std::span<const double> row, std::size_t district, std::size_t month) const;

 private:
  const PosteriorDraws* draws_;
  ParameterLayout layout_;
  std::vector<std::ptrdiff_t> phi_pos_;  // -1 for fixed (isolated) nodes
};

/// pi^(b) for one poststratification cell with the modality fixed, b = 1..B.
/// Throws SchemaError for unknown levels or out-of-range district/month.
std::vector<double> extract_cell_probability(const PosteriorDraws& draws, std::span<const std::size_t> levels,
                                             double phone_prob, std::size_t district, std::size_t month,
                                             Modality modality);

namespace hmc {

/// H(q, p) = -log p(q) + p' M^{-1} p / 2 with diagonal inverse metric.
double hamiltonian(const LogDensity& target, std::span<const double> q, std::span<const double> p,
                   std::span<const double> inv_metric);

/// Advances (q, p) by `steps` leapfrog steps of size eps.
void leapfrog(const LogDensity& target, std::vector<double>& q, std::vector<double>& p,
              std::span<const double> inv_metric, double eps, std::size_t steps);

}  // namespace hmc

}  // namespace jmrp
