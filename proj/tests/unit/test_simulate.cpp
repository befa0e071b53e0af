#include <doctest.h>

#include <cmath>
#include <set>

#include "jmrp/data_io.hpp"
#include "jmrp/errors.hpp"
#include "jmrp/simulate.hpp"
#include "support/fixtures.hpp"

using namespace jmrp;

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

double mean_outcome(const std::vector<SurveyRecord>& records, Modality m) {
  double k = 0.0, n = 0.0;
  for (const auto& r : records) {
    if (r.modality != m) continue;
    k += r.outcome;
    n += 1.0;
  }
  return k / n;
}

GroundTruth hand_truth(std::size_t S) {
  GroundTruth gt;
  gt.spec = testing::small_spec(S, 1, 1);
  gt.params = ParamState::zeros(gt.spec);
  gt.table.S = S;
  gt.table.variables = model_variables(gt.spec);
  gt.T = 1;
  return gt;
}

}  // namespace

TEST_CASE("generate is deterministic in the seed") {
  SimConfig conf;
  conf.seed = 17;
  const auto a = generate(conf);
  const auto b = generate(conf);
  CHECK(records_to_csv(a.data.records, a.data.spec) == records_to_csv(b.data.records, b.data.spec));
  CHECK(table_to_csv(a.truth.table) == table_to_csv(b.truth.table));
  CHECK(truth_to_csv(a.truth, conf.S) == truth_to_csv(b.truth, conf.S));
  conf.seed = 18;
  const auto c = generate(conf);
  CHECK(records_to_csv(a.data.records, a.data.spec) != records_to_csv(c.data.records, c.data.spec));
}

TEST_CASE("sample counts follow the config") {
  SimConfig conf;
  conf.holdout_month = 5;
  const auto sim = generate(conf);
  std::size_t mp = 0, f2f = 0;
  std::set<std::size_t> f2f_months;
  for (const auto& r : sim.data.records) {
    if (r.modality == Modality::MP) {
      ++mp;
      CHECK(r.phone_prob > 0.0);
      CHECK(r.phone_prob < 1.0);
    } else {
      ++f2f;
      f2f_months.insert(r.month);
      CHECK((r.phone_prob == 0.0 || r.phone_prob == 1.0));
    }
  }
  CHECK(mp == conf.S * conf.T * conf.mp_per_district_month);
  CHECK(f2f == conf.S * conf.f2f_months.size() * conf.f2f_per_district);
  CHECK(f2f_months == std::set<std::size_t>{2, 8});
  CHECK(sim.holdout.size() == conf.S * conf.f2f_per_district);
  for (const auto& r : sim.holdout) {
    CHECK(r.month == 5);
    CHECK(r.modality == Modality::F2F);
  }
  CHECK(sim.data.graph.node_count() == conf.S);
  CHECK(sim.data.graph.component_count() == 1);
  CHECK(sim.data.spec.district_to_province == std::vector<std::size_t>{0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2});
}

TEST_CASE("identical generating law without selection or modality effect") {
  SimConfig conf;
  conf.S = conf.R = conf.T = 1;
  conf.grid_rows = conf.grid_cols = 1;
  conf.f2f_months = {0};
  conf.mp_per_district_month = 5000;
  conf.f2f_per_district = 5000;
  conf.phone_selection_strength = 0.0;
  conf.modality_effect = 0.0;
  conf.gamma = 0.0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    conf.seed = seed;
    const auto sim = generate(conf);
    const double p_mp = mean_outcome(sim.data.records, Modality::MP);
    const double p_f2f = mean_outcome(sim.data.records, Modality::F2F);
    const double pooled = 0.5 * (p_mp + p_f2f);
    const double se = std::sqrt(pooled * (1.0 - pooled) * 2.0 / 5000.0);
    CHECK(std::abs(p_mp - p_f2f) < 3.89 * se);
  }
}

TEST_CASE("modality effect is an exact log-odds shift without interactions") {
  SimConfig conf;
  conf.modality_effect = 1.438;
  const auto sim = generate(conf);
  for (std::size_t j = 0; j < sim.truth.table.cells.size(); j += 7) {
    const auto& cell = sim.truth.table.cells[j];
    for (std::size_t t : {0u, 4u, 9u}) {
      const double f2f = true_cell_probability(sim.truth, cell, t, Modality::F2F);
      const double mp = true_cell_probability(sim.truth, cell, t, Modality::MP);
      CHECK(logit(f2f) - logit(mp) == doctest::Approx(1.438).epsilon(1e-9));
    }
  }
}

TEST_CASE("phone sample is tilted towards higher socio-economic status") {
  SimConfig conf;
  conf.S = conf.R = conf.T = 1;
  conf.grid_rows = conf.grid_cols = 1;
  conf.f2f_months = {};
  conf.mp_per_district_month = 5000;
  conf.phone_selection_strength = 1.0;
  const auto sim = generate(conf);
  // improved water raises the SES score
  double improved = 0.0, total = 0.0;
  for (const auto& cell : sim.truth.table.cells) {
    total += cell.weight;
    if (cell.codes[0] == 1) improved += cell.weight;
  }
  const double p0 = improved / total;
  double k = 0.0;
  for (const auto& r : sim.data.records) k += r.covariates[0] == 1 ? 1.0 : 0.0;
  const double n = static_cast<double>(sim.data.records.size());
  const double z = (k / n - p0) / std::sqrt(p0 * (1.0 - p0) / n);
  CHECK(z > 3.719);  // one-sided 1e-4
}

TEST_CASE("true prevalence hand cases") {
  SUBCASE("single cell") {
    auto gt = hand_truth(1);
    gt.params.gamma = 0.7;
    gt.table.cells = {{0, {1, 2, 0}, 5.0}};
    const double p = true_cell_probability(gt, gt.table.cells[0], 0, Modality::F2F);
    CHECK(true_prevalence(gt, 0, 0) == doctest::Approx(p).epsilon(1e-14));
  }
  SUBCASE("uniform probability") {
    auto gt = hand_truth(3);
    gt.params.gamma = logit(0.3);
    gt.table.cells = {{0, {0, 0, 0}, 2.0}, {0, {1, 3, 1}, 1.0}, {1, {1, 1, 0}, 4.0}, {2, {0, 2, 1}, 9.0}};
    for (std::size_t s = 0; s < 3; ++s) CHECK(true_prevalence(gt, s, 0) == doctest::Approx(0.3).epsilon(1e-12));
  }
  SUBCASE("two cells") {
    auto gt = hand_truth(1);
    gt.params.gamma = logit(0.2);
    gt.params.beta[0] = logit(0.4) - logit(0.2);
    gt.table.cells = {{0, {0, 0, 0}, 1.0}, {0, {1, 0, 0}, 3.0}};
    CHECK(true_prevalence(gt, 0, 0) == doctest::Approx(0.35).epsilon(1e-12));
  }
  SUBCASE("empty district") {
    auto gt = hand_truth(2);
    gt.table.cells = {{0, {0, 0, 0}, 1.0}};
    CHECK_THROWS_AS(true_prevalence(gt, 1, 0), DomainError);
  }
}

TEST_CASE("ground truth prevalence does not depend on emission order") {
  SimConfig a;
  a.f2f_months = {2, 8};
  SimConfig b = a;
  b.f2f_months = {8, 2};
  const auto sa = generate(a);
  const auto sb = generate(b);
  CHECK(sa.truth.prevalence == sb.truth.prevalence);
  for (std::size_t s = 0; s < a.S; ++s) {
    for (std::size_t t = 0; t < a.T; ++t) {
      const double p = sa.truth.p(s, t);
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
      CHECK(p == true_prevalence(sa.truth, s, t));
    }
  }
}

TEST_CASE("true spatial effect sums to zero and nu is centred") {
  const auto sim = generate(SimConfig{});
  double phi = 0.0, nu = 0.0;
  for (double v : sim.truth.params.phi) phi += v;
  for (double v : sim.truth.params.nu) nu += v;
  CHECK(std::abs(phi) < 1e-10);
  CHECK(std::abs(nu) < 1e-10);
}

TEST_CASE("config json") {
  SimConfig conf;
  conf.holdout_month = 3;
  conf.seed = 99;
  conf.modality_effect = 1.0;
  const auto back = sim_config_from_json(to_json(conf));
  CHECK(to_json(back) == to_json(conf));
  CHECK_THROWS_WITH_AS(sim_config_from_json({{"modality_efect", 1.0}}), doctest::Contains("modality_efect"),
                       SchemaError);
  CHECK_THROWS_AS(sim_config_from_json({{"S", 10}}), SchemaError);
  CHECK_THROWS_AS(sim_config_from_json({{"f2f_months", {12}}}), SchemaError);
  CHECK_THROWS_AS(sim_config_from_json({{"beta", {1.0, 2.0}}}), SchemaError);
  CHECK_THROWS_AS(sim_config_from_json({{"sigma_phi", "big"}}), SchemaError);
}
