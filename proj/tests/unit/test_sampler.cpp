#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "jmrp/diagnostics.hpp"
#include "jmrp/draws_io.hpp"
#include "jmrp/errors.hpp"
#include "jmrp/sampler.hpp"
#include "support/fixtures.hpp"

using namespace jmrp;

namespace {

// Independent normals with per-coordinate scales.
class Gaussian final : public LogDensity {
 public:
  explicit Gaussian(std::vector<double> sd) : sd_(std::move(sd)) {}
  std::size_t dimension() const override { return sd_.size(); }
  double log_density_gradient(std::span<const double> x, std::span<double> g) const override {
    double lp = 0.0;
    for (std::size_t i = 0; i < sd_.size(); ++i) {
      const double z = x[i] / sd_[i];
      lp -= 0.5 * z * z;
      g[i] = -z / sd_[i];
    }
    return lp;
  }

 private:
  std::vector<double> sd_;
};

class IcarPrior final : public LogDensity {
 public:
  explicit IcarPrior(AdjacencyGraph g) : graph_(std::move(g)) {}
  std::size_t dimension() const override { return graph_.node_count(); }
  double log_density_gradient(std::span<const double> x, std::span<double> g) const override {
    std::fill(g.begin(), g.end(), 0.0);
    double sum = 0.0;
    for (double v : x) sum += v;
    for (const auto& [a, b] : graph_.edges()) {
      g[a] -= x[a] - x[b];
      g[b] += x[a] - x[b];
    }
    const double sd = 0.001 * graph_.node_count();
    for (auto& v : g) v -= sum / (sd * sd);
    return icar_logpdf(x, 1.0, graph_);
  }

 private:
  AdjacencyGraph graph_;
};

class Nowhere final : public LogDensity {
 public:
  std::size_t dimension() const override { return 2; }
  double log_density_gradient(std::span<const double>, std::span<double> g) const override {
    std::fill(g.begin(), g.end(), 0.0);
    return -std::numeric_limits<double>::infinity();
  }
};

double ks_distance(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = jmrp::testing::normal_cdf(x[i]);
    d = std::max({d, std::abs(f - i / n), std::abs((i + 1) / n - f)});
  }
  return d;
}

}  // namespace

TEST_CASE("config validation") {
  SamplerConfig c;
  CHECK_NOTHROW(c.validate());
  c.warmup = c.iterations;
  CHECK_THROWS_AS(c.validate(), SchemaError);
  c = SamplerConfig{};
  c.chains = 0;
  CHECK_THROWS_AS(c.validate(), SchemaError);
  c = SamplerConfig{};
  c.target_accept = 1.0;
  CHECK_THROWS_AS(c.validate(), SchemaError);
}

TEST_CASE("standard normal in five dimensions") {
  Gaussian target(std::vector<double>(5, 1.0));
  SamplerConfig cfg;
  cfg.iterations = 1500;
  cfg.warmup = 500;
  cfg.seed = 2024;
  auto draws = sample(target, cfg);
  REQUIRE(draws.size() == 4000);
  REQUIRE(draws.dimension() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    auto col = draws.column(i);
    double m = 0.0, v = 0.0;
    for (double x : col) m += x;
    m /= col.size();
    for (double x : col) v += (x - m) * (x - m);
    v /= col.size() - 1.0;
    CHECK(std::abs(m) < 0.1);
    CHECK(std::abs(v - 1.0) < 0.15);
  }
  auto report = diagnostics(draws);
  CHECK(report.ok);
  CHECK(report.divergences == 0);
  for (const auto& a : draws.adaptation) {
    CHECK(a.step_size > 0.0);
    for (double m : a.inv_metric) CHECK(m == doctest::Approx(1.0).epsilon(0.35));
  }
}

TEST_CASE("metric adapts to badly scaled coordinates") {
  Gaussian target({0.01, 1.0, 30.0});
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.iterations = 1500;
  cfg.warmup = 700;
  cfg.seed = 3;
  auto draws = sample(target, cfg);
  const std::vector<double> var = {1e-4, 1.0, 900.0};
  for (const auto& a : draws.adaptation) {
    for (std::size_t i = 0; i < 3; ++i) CHECK(a.inv_metric[i] / var[i] == doctest::Approx(1.0).epsilon(0.5));
  }
}

TEST_CASE("one-dimensional KS smoke test") {
  Gaussian target({1.0});
  SamplerConfig cfg;
  cfg.chains = 4;
  cfg.iterations = 2500;
  cfg.warmup = 500;
  cfg.seed = 77;
  auto draws = sample(target, cfg);
  REQUIRE(draws.size() == 8000);
  CHECK(ks_distance(draws.column(0)) < 0.03);
}

TEST_CASE("leapfrog energy error is second order") {
  Gaussian target({1.0, 0.5, 2.0});
  const std::vector<double> inv_metric = {1.0, 1.0, 1.0};
  std::vector<double> errors;
  for (double eps : {0.1, 0.05, 0.025}) {
    std::vector<double> q = {0.3, -0.8, 1.5}, p = {1.1, 0.4, -0.7};
    const double h0 = hmc::hamiltonian(target, q, p, inv_metric);
    hmc::leapfrog(target, q, p, inv_metric, eps, static_cast<std::size_t>(std::lround(1.0 / eps)));
    errors.push_back(std::abs(hmc::hamiltonian(target, q, p, inv_metric) - h0));
  }
  for (std::size_t i = 0; i + 1 < errors.size(); ++i) CHECK(std::log2(errors[i] / errors[i + 1]) >= 1.9);
}

TEST_CASE("trajectories respect max_treedepth") {
  Gaussian target({0.001, 1.0, 100.0});
  SamplerConfig cfg;
  cfg.chains = 1;
  cfg.iterations = 300;
  cfg.warmup = 100;
  cfg.max_treedepth = 4;
  cfg.seed = 5;
  auto draws = sample(target, cfg);
  for (std::size_t b = 0; b < draws.size(); ++b) {
    CHECK(draws.treedepth[b] <= 4);
    CHECK(draws.n_leapfrog[b] <= 16);
  }
}

TEST_CASE("determinism and thread independence") {
  Gaussian target({1.0, 2.0});
  SamplerConfig cfg;
  cfg.iterations = 400;
  cfg.warmup = 200;
  cfg.seed = 99;
  auto a = sample(target, cfg);
  auto b = sample(target, cfg);
  CHECK(a.values == b.values);
  cfg.threads = 1;
  auto c = sample(target, cfg);
  CHECK(a.values == c.values);
  CHECK(a.divergent == c.divergent);
  cfg.threads = 3;
  CHECK(sample(target, cfg).values == a.values);
  cfg.seed = 100;
  CHECK(sample(target, cfg).values != a.values);
}

TEST_CASE("ICAR prior on a 4-node path samples without divergences") {
  IcarPrior target(AdjacencyGraph::grid(1, 4));
  SamplerConfig cfg;
  cfg.seed = 8;
  cfg.iterations = 1500;
  cfg.warmup = 500;
  auto draws = sample(target, cfg);
  CHECK(draws.divergence_count() == 0);
  for (std::size_t b = 0; b < draws.size(); ++b) CHECK(draws.treedepth[b] <= 10);
}

TEST_CASE("initialization failure") {
  SamplerConfig cfg;
  cfg.chains = 1;
  cfg.iterations = 10;
  cfg.warmup = 5;
  CHECK_THROWS_AS(sample(Nowhere{}, cfg), std::runtime_error);
}

TEST_CASE("joint model fit carries its layout and round-trips through files") {
  auto spec = jmrp::testing::small_spec(4, 2, 3);
  Dataset data;
  data.spec = spec;
  data.graph = AdjacencyGraph::grid(2, 2);
  data.records = jmrp::testing::random_records(spec, 200, 4);
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.iterations = 120;
  cfg.warmup = 60;
  cfg.seed = 1;
  auto draws = sample(data, cfg);
  REQUIRE(draws.layout);
  CHECK(draws.names == draws.layout->names());
  auto p = draws.param_state(5);
  CHECK(p.beta.size() == spec.design_width());

  const auto dir = std::filesystem::temp_directory_path();
  const std::string csv_path = (dir / "test_sampler_draws.csv").string();
  const std::string json_path = (dir / "test_sampler_draws.json").string();
  write_draws(csv_path, json_path, draws);
  auto back = read_draws(csv_path, json_path);
  CHECK(back.values == draws.values);
  CHECK(back.divergent == draws.divergent);
  CHECK(back.accept_stat == draws.accept_stat);
  REQUIRE(back.layout);
  CHECK(back.layout->free_phi() == draws.layout->free_phi());
  CHECK(back.adaptation[1].inv_metric == draws.adaptation[1].inv_metric);
  std::filesystem::remove(csv_path);
  std::filesystem::remove(json_path);
}

TEST_CASE("cell probabilities from draws") {
  auto spec = jmrp::testing::small_spec(3, 1, 2);
  ParameterLayout layout(spec, AdjacencyGraph::grid(1, 3));
  PosteriorDraws draws;
  draws.names = layout.names();
  draws.layout = layout;
  draws.chains = 1;
  draws.draws_per_chain = 3;
  draws.values.assign(3 * layout.dimension(), 0.0);
  const std::vector<std::size_t> ref = {0, 0};

  for (double v : extract_cell_probability(draws, ref, 0.0, 1, 1, Modality::MP)) CHECK(v == 0.5);

  PosteriorDraws one = draws;
  one.draws_per_chain = 1;
  one.values.assign(layout.dimension(), 0.0);
  one.values[0] = -1.375;
  auto single = extract_cell_probability(one, ref, 0.0, 0, 0, Modality::MP);
  REQUIRE(single.size() == 1);
  CHECK(single[0] == doctest::Approx(1.0 / (1.0 + std::exp(1.375))).epsilon(1e-15));

  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  for (auto& v : draws.values) v = normal(rng);
  auto base = extract_cell_probability(draws, std::vector<std::size_t>{1, 3}, 0.4, 2, 1, Modality::F2F);
  auto shifted = draws;
  for (std::size_t b = 0; b < 3; ++b) shifted.values[b * layout.dimension()] += 1.0;
  auto up = extract_cell_probability(shifted, std::vector<std::size_t>{1, 3}, 0.4, 2, 1, Modality::F2F);
  for (std::size_t b = 0; b < 3; ++b) CHECK(up[b] > base[b]);

  // agrees with the ParamState route
  for (std::size_t b = 0; b < 3; ++b) {
    SurveyRecord r;
    r.covariates = {1, 3};
    r.phone_prob = 0.4;
    r.modality = Modality::F2F;
    r.district = 2;
    r.month = 1;
    const double eta = linear_predictor(build_design_row(r, spec), r, draws.param_state(b), spec);
    CHECK(base[b] == doctest::Approx(logistic(eta)).epsilon(1e-14));
  }

  CHECK_THROWS_AS(extract_cell_probability(draws, std::vector<std::size_t>{2, 0}, 0.0, 0, 0, Modality::MP),
                  SchemaError);
  CHECK_THROWS_AS(extract_cell_probability(draws, ref, 0.0, 3, 0, Modality::MP), SchemaError);
}
