#include <doctest.h>

#include <random>

#include "jmrp/diagnostics.hpp"

using namespace jmrp;

namespace {

ChainSet iid_chains(std::size_t m, std::size_t n, std::uint64_t seed, std::vector<double> means = {}) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  ChainSet chains(m);
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t i = 0; i < n; ++i) chains[c].push_back(normal(rng) + (means.empty() ? 0.0 : means[c]));
  }
  return chains;
}

PosteriorDraws as_draws(const ChainSet& chains) {
  PosteriorDraws d;
  d.names = {"x"};
  d.chains = chains.size();
  d.draws_per_chain = chains.front().size();
  for (const auto& c : chains) d.values.insert(d.values.end(), c.begin(), c.end());
  d.divergent.assign(d.size(), 0);
  return d;
}

}  // namespace

TEST_CASE("split R-hat on iid chains") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto r = split_rhat(iid_chains(4, 1000, seed));
    REQUIRE(r);
    CHECK(*r >= 0.99);
    CHECK(*r <= 1.02);
  }
}

TEST_CASE("separated chains are flagged") {
  auto chains = iid_chains(2, 500, 3, {0.0, 10.0});
  auto r = split_rhat(chains);
  REQUIRE(r);
  CHECK(*r > 3.0);
  auto report = diagnostics(as_draws(chains));
  CHECK_FALSE(report.ok);
  CHECK(report.max_rhat > 1.05);
}

TEST_CASE("a drifting chain inflates split R-hat") {
  ChainSet chains = iid_chains(4, 400, 5);
  for (std::size_t i = 0; i < 400; ++i) chains[0][i] += 4.0 * i / 400.0;
  CHECK(*split_rhat(chains) > 1.05);
}

TEST_CASE("constant chains are degenerate") {
  ChainSet chains(4, std::vector<double>(100, 2.5));
  CHECK_FALSE(effective_sample_size(chains));
  CHECK_FALSE(bulk_ess(chains));
  CHECK_FALSE(split_rhat(chains));
  auto report = diagnostics(as_draws(chains));
  CHECK(report.coordinates[0].degenerate);
  CHECK_FALSE(report.coordinates[0].ess_bulk);
  CHECK_FALSE(report.warnings.empty());
}

TEST_CASE("single chain reports R-hat unavailable") {
  auto report = diagnostics(as_draws(iid_chains(1, 200, 2)));
  CHECK_FALSE(report.rhat_available);
  CHECK_FALSE(report.ok);
  CHECK_FALSE(report.coordinates[0].rhat);
  CHECK(report.coordinates[0].ess_bulk);
}

TEST_CASE("ESS of iid draws is close to the draw count") {
  auto ess = effective_sample_size(iid_chains(4, 1000, 11));
  REQUIRE(ess);
  CHECK(*ess > 3400.0);
  CHECK(*ess < 4600.0);
  auto bulk = bulk_ess(iid_chains(4, 1000, 12));
  REQUIRE(bulk);
  CHECK(*bulk > 3400.0);
  CHECK(*bulk < 4600.0);
}

TEST_CASE("ESS of an AR(1) chain matches (1 - rho) / (1 + rho)") {
  const double rho = 0.9;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  ChainSet chains(4);
  for (auto& c : chains) {
    double x = normal(rng) / std::sqrt(1.0 - rho * rho);
    for (std::size_t i = 0; i < 5000; ++i) {
      x = rho * x + normal(rng);
      c.push_back(x);
    }
  }
  const double expected = 20000.0 * (1.0 - rho) / (1.0 + rho);
  CHECK(*effective_sample_size(chains) == doctest::Approx(expected).epsilon(0.25));
}

TEST_CASE("divergence rate warning") {
  auto d = as_draws(iid_chains(2, 100, 7));
  for (std::size_t b = 0; b < 50; ++b) d.divergent[b] = 1;
  auto report = diagnostics(d);
  CHECK(report.divergences == 50);
  CHECK(report.divergence_rate == doctest::Approx(0.25));
  bool warned = false;
  for (const auto& w : report.warnings) warned = warned || w.find("divergence") != std::string::npos;
  CHECK(warned);
  auto doc = report.to_json();
  CHECK(doc["divergences"] == 50);
  CHECK(doc["coordinates"][0]["name"] == "x");
}
