#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "jmrp/sampler.hpp"

namespace jmrp {

/// Columnar draws: chain, draw, divergent, treedepth, n_leapfrog, accept_stat,
/// then one column per coordinate. The JSON sidecar holds the chain layout,
/// adaptation results and (for model fits) the model spec and free phi nodes.
std::string draws_to_csv(const PosteriorDraws& draws);
nlohmann::json draws_sidecar(const PosteriorDraws& draws);
void write_draws(const std::string& csv_path, const std::string& sidecar_path, const PosteriorDraws& draws);

/// Throws IoError / SchemaError; restores the layout when the sidecar carries a model.
PosteriorDraws read_draws(const std::string& csv_path, const std::string& sidecar_path);

}  // namespace jmrp
