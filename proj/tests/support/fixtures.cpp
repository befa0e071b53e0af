#include "support/fixtures.hpp"

#include <cmath>
#include <numbers>

namespace jmrp::testing {

std::vector<std::size_t> block_provinces(std::size_t S, std::size_t R) {
  std::vector<std::size_t> map(S);
  for (std::size_t s = 0; s < S; ++s) map[s] = s * R / S;
  return map;
}

ModelSpec small_spec(std::size_t S, std::size_t R, std::size_t T, InteractionLevel level) {
  ModelSpec spec;
  spec.S = S;
  spec.R = R;
  spec.T = T;
  spec.district_to_province = block_provinces(S, R);
  spec.covariate_schema = {
      Covariate{"water", {"other", "improved"}, 0},
      Covariate{"education", {"none", "primary", "secondary", "higher"}, 0},
  };
  spec.interaction_level = level;
  return spec;
}

std::vector<SurveyRecord> random_records(const ModelSpec& spec, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<SurveyRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    SurveyRecord r;
    r.district = static_cast<std::size_t>(unit(rng) * spec.S);
    r.province = spec.district_to_province[r.district];
    r.month = static_cast<std::size_t>(unit(rng) * spec.T);
    for (const auto& cov : spec.covariate_schema) {
      r.covariates.push_back(static_cast<std::size_t>(unit(rng) * cov.levels.size()));
    }
    r.modality = unit(rng) < 0.3 ? Modality::F2F : Modality::MP;
    r.phone_prob = r.modality == Modality::F2F ? (unit(rng) < 0.6 ? 1.0 : 0.0) : 0.3 + 0.6 * unit(rng);
    r.outcome = unit(rng) < 0.35 ? 1 : 0;
    r.weight = 0.5 + unit(rng);
    records.push_back(std::move(r));
  }
  return records;
}

ParamState random_params(const ModelSpec& spec, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  ParamState p = ParamState::zeros(spec);
  p.gamma = normal(rng);
  for (auto* block : {&p.beta, &p.phi, &p.zeta, &p.nu, &p.xi, &p.psi}) {
    for (auto& v : *block) v = normal(rng);
  }
  for (auto& v : p.log_sigma) v = normal(rng);
  return p;
}

std::vector<double> finite_difference(const std::function<double(const std::vector<double>&)>& f,
                                      const std::vector<double>& x, double h) {
  std::vector<double> g(x.size());
  auto xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double up = f(xp);
    xp[i] = x[i] - h;
    const double down = f(xp);
    xp[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace jmrp::testing

#include <Eigen/Dense>

namespace jmrp::testing {

std::vector<AdjacencyGraph> connected_graphs(std::size_t n) {
  std::vector<AdjacencyGraph::Edge> all;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) all.emplace_back(i, j);
  }
  std::vector<AdjacencyGraph> graphs;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << all.size()); ++mask) {
    std::vector<AdjacencyGraph::Edge> edges;
    for (std::size_t k = 0; k < all.size(); ++k) {
      if (mask & (std::uint64_t{1} << k)) edges.push_back(all[k]);
    }
    AdjacencyGraph g(n, edges);
    if (g.component_count() == 1) graphs.push_back(std::move(g));
  }
  return graphs;
}

double dense_laplacian_logpdf(const std::vector<double>& phi, double sigma, const AdjacencyGraph& graph) {
  const auto n = static_cast<Eigen::Index>(graph.node_count());
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [a, b] : graph.edges()) {
    const auto i = static_cast<Eigen::Index>(a), j = static_cast<Eigen::Index>(b);
    lap(i, i) += 1.0;
    lap(j, j) += 1.0;
    lap(i, j) -= 1.0;
    lap(j, i) -= 1.0;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(lap);
  Eigen::Map<const Eigen::VectorXd> x(phi.data(), n);
  double quad = 0.0, log_det = 0.0;
  int rank = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double lambda = eig.eigenvalues()(k);
    if (lambda < 1e-9) continue;
    ++rank;
    const double proj = eig.eigenvectors().col(k).dot(x);
    quad += lambda * proj * proj;
    log_det += std::log(lambda);
  }
  return -0.5 * quad / (sigma * sigma) - rank * std::log(sigma) + 0.5 * log_det -
         0.5 * rank * std::log(2.0 * std::numbers::pi);
}

void project_sum_zero(std::vector<double>& phi, const AdjacencyGraph& graph) {
  for (const auto& comp : graph.components()) {
    double mean = 0.0;
    for (auto i : comp) mean += phi[i];
    mean /= comp.size();
    for (auto i : comp) phi[i] -= mean;
  }
}

}  // namespace jmrp::testing
