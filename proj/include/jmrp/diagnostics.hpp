#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jmrp/sampler.hpp"

namespace jmrp {

using ChainSet = std::vector<std::vector<double>>;

/// Split potential scale reduction. nullopt for fewer than two chains, fewer
/// than four draws per chain, or zero within-chain variance.
std::optional<double> split_rhat(const ChainSet& chains);
/// Effective sample size via Geyer's initial monotone sequence over split
/// chains; nullopt when the draws are constant.
std::optional<double> effective_sample_size(const ChainSet& chains);
/// ESS of rank-normalized split chains.
std::optional<double> bulk_ess(const ChainSet& chains);

struct CoordinateDiagnostics {
  std::string name;
  std::optional<double> rhat;
  std::optional<double> ess_bulk;
  bool degenerate = false;  // constant draws
};

struct DiagnosticsReport {
  std::vector<CoordinateDiagnostics> coordinates;
  bool rhat_available = false;
  double max_rhat = 0.0;
  double min_ess = 0.0;
  std::size_t divergences = 0;
  double divergence_rate = 0.0;
  std::vector<std::string> warnings;
  /// max split R-hat below 1.05.
  bool ok = false;

  nlohmann::json to_json() const;
};

/// Requires at least two chains for R-hat; a single chain reports R-hat as unavailable.
DiagnosticsReport diagnostics(const PosteriorDraws& draws);

ChainSet chains_of(const PosteriorDraws& draws, std::size_t coord);

}  // namespace jmrp
