#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "jmrp/model.hpp"

namespace jmrp::testing {

/// Two-covariate schema: water {other, improved}, education {none, primary, secondary, higher}.
ModelSpec small_spec(std::size_t S, std::size_t R, std::size_t T,
                     InteractionLevel level = InteractionLevel::Province);

/// Districts assigned to provinces in contiguous blocks.
std::vector<std::size_t> block_provinces(std::size_t S, std::size_t R);

/// Records with random covariates, locations and outcomes (both modalities).
std::vector<SurveyRecord> random_records(const ModelSpec& spec, std::size_t n, std::uint64_t seed);

ParamState random_params(const ModelSpec& spec, std::mt19937_64& rng, double scale);

/// Central differences of f at x with step h.
std::vector<double> finite_difference(const std::function<double(const std::vector<double>&)>& f,
                                      const std::vector<double>& x, double h);

/// Standard normal CDF.
double normal_cdf(double x);

}  // namespace jmrp::testing

namespace jmrp::testing {

/// Every connected simple graph on n labelled nodes.
std::vector<AdjacencyGraph> connected_graphs(std::size_t n);

/// Gaussian log density with precision L / sigma^2 (L the graph Laplacian)
/// restricted to the complement of its null space, computed densely from an
/// eigendecomposition. Includes the -rank log sigma normalizer.
double dense_laplacian_logpdf(const std::vector<double>& phi, double sigma, const AdjacencyGraph& graph);

/// Subtracts each component's mean so phi lies on the sum-zero subspace.
void project_sum_zero(std::vector<double>& phi, const AdjacencyGraph& graph);

}  // namespace jmrp::testing
