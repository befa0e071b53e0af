#include "jmrp/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "jmrp/csv.hpp"
#include "jmrp/errors.hpp"
#include "jmrp/rng.hpp"

namespace jmrp {

namespace {

struct TagName {
  EstimatorTag tag;
  const char* name;
};
constexpr TagName kTags[] = {{EstimatorTag::ZimvacDirect, "zimvac_direct"},
                             {EstimatorTag::MvamDirect, "mvam_direct"},
                             {EstimatorTag::MR, "mr"},
                             {EstimatorTag::MRP, "mrp"},
                             {EstimatorTag::JmrMP, "jmr_mp"},
                             {EstimatorTag::JmrF2F, "jmr_f2f"},
                             {EstimatorTag::Jmrp, "jmrp"}};

EstimateEntry from_wilson(double successes, double n, double estimate) {
  EstimateEntry e;
  e.has_data = true;
  e.mean = estimate;
  e.n = n;
  const auto i90 = wilson(successes, n, 0.9);
  const auto i80 = wilson(successes, n, 0.8);
  e.q = {i90.lower, i80.lower, estimate, i80.upper, i90.upper};
  return e;
}

bool bernoulli(std::uint64_t seed, std::initializer_list<std::uint64_t> key, double p) {
  return rng::to_unit(rng::derive(seed, key)) < p;
}

EstimateEntry from_draws(std::vector<double> values, double n) {
  EstimateEntry e;
  e.has_data = true;
  e.n = n;
  const auto s = summarize_draws(values);
  e.mean = s.mean;
  e.q = s.q;
  e.draws = std::move(values);
  return e;
}

// Design rows of a district's cells under a fixed modality.
struct CellRow {
  std::size_t index;  // position in the full table
  double weight;
  std::vector<double> row;
};

std::vector<CellRow> district_rows(const PostStratTable& table, std::size_t s, Modality modality,
                                   const ModelSpec& spec) {
  std::vector<std::size_t> var_of;
  for (const auto& cov : spec.covariate_schema) {
    auto v = table.variable_index(cov.name);
    if (!v) throw SchemaError("poststratification table lacks covariate '" + cov.name + "'");
    var_of.push_back(*v);
  }
  auto phone = table.variable_index(kPhoneVariable);
  if (!phone) throw SchemaError(std::string("poststratification table lacks '") + kPhoneVariable + "'");
  std::vector<CellRow> rows;
  std::vector<std::size_t> levels(var_of.size());
  for (std::size_t j = 0; j < table.cells.size(); ++j) {
    const auto& cell = table.cells[j];
    if (cell.district != s || cell.weight == 0.0) continue;
    for (std::size_t c = 0; c < var_of.size(); ++c) {
      levels[c] = spec.covariate_schema[c].level_index(table.variables[var_of[c]].levels[cell.codes[var_of[c]]]);
    }
    const double own = csv::parse_double(table.variables[*phone].levels[cell.codes[*phone]], kPhoneVariable);
    rows.push_back({j, cell.weight, build_design_row(levels, own, modality, spec)});
  }
  return rows;
}

}  // namespace

std::string to_string(EstimatorTag tag) {
  for (const auto& t : kTags) {
    if (t.tag == tag) return t.name;
  }
  return "unknown";
}

EstimatorTag parse_estimator(const std::string& text) {
  for (const auto& t : kTags) {
    if (text == t.name) return t.tag;
  }
  throw SchemaError("unknown estimator '" + text + "'");
}

const std::vector<EstimatorTag>& all_estimators() {
  static const std::vector<EstimatorTag> tags = [] {
    std::vector<EstimatorTag> v;
    for (const auto& t : kTags) v.push_back(t.tag);
    return v;
  }();
  return tags;
}

std::string to_string(DrawMode mode) { return mode == DrawMode::Rate ? "rate" : "bernoulli"; }

DrawMode parse_draw_mode(const std::string& text) {
  if (text == "rate") return DrawMode::Rate;
  if (text == "bernoulli") return DrawMode::Bernoulli;
  throw SchemaError("draw mode must be 'rate' or 'bernoulli', got '" + text + "'");
}

DrawSummary summarize_draws(std::span<const double> values) {
  if (values.empty()) throw DomainError("summarize_draws: no values");
  std::vector<double> x(values.begin(), values.end());
  std::sort(x.begin(), x.end());
  DrawSummary s;
  for (double v : x) s.mean += v;
  s.mean /= x.size();
  for (std::size_t k = 0; k < kQuantileLevels.size(); ++k) {
    const double h = (x.size() - 1) * kQuantileLevels[k];
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, x.size() - 1);
    s.q[k] = x[lo] + (h - lo) * (x[hi] - x[lo]);
  }
  return s;
}

EstimateEntry direct_proportion(std::span<const SurveyRecord> records) {
  if (records.empty()) return {};
  double k = 0.0;
  for (const auto& r : records) k += r.outcome;
  const double n = static_cast<double>(records.size());
  return from_wilson(k, n, k / n);
}

EstimateEntry direct_weighted(std::span<const SurveyRecord> records) {
  if (records.empty()) return {};
  double sw = 0.0, swy = 0.0, sw2 = 0.0;
  for (const auto& r : records) {
    if (!(r.weight >= 0.0)) throw DomainError("direct_weighted: negative weight");
    sw += r.weight;
    swy += r.weight * r.outcome;
    sw2 += r.weight * r.weight;
  }
  if (!(sw > 0.0)) throw DomainError("direct_weighted: all weights are zero");
  const double p = swy / sw;
  const double n_eff = sw * sw / sw2;
  return from_wilson(p * n_eff, n_eff, p);
}

EstimateEntry mr_aggregate(const PosteriorDraws& draws, std::span<const SurveyRecord> records,
                           ModalityOverride modality_override, DrawMode mode, std::uint64_t seed) {
  if (records.empty()) return {};
  CellPredictor predictor(draws);
  const auto& spec = predictor.spec();
  struct Row {
    std::vector<double> x;
    std::size_t s, t;
  };
  std::vector<Row> rows;
  for (const auto& r : records) {
    validate_record(r, spec);
    Modality m = r.modality;
    if (modality_override == ModalityOverride::MP) m = Modality::MP;
    if (modality_override == ModalityOverride::F2F) m = Modality::F2F;
    rows.push_back({build_design_row(r.covariates, r.phone_prob, m, spec), r.district, r.month});
  }
  std::vector<double> values(draws.size());
  for (std::size_t b = 0; b < draws.size(); ++b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double p = logistic(predictor.eta(b, rows[i].x, rows[i].s, rows[i].t));
      acc += mode == DrawMode::Rate ? p : bernoulli(seed, {rows[i].s, rows[i].t, b, i}, p);
    }
    values[b] = acc / rows.size();
  }
  return from_draws(std::move(values), static_cast<double>(records.size()));
}

EstimateEntry jmrp_estimate(const PosteriorDraws& draws, const PostStratTable& table, std::size_t s, std::size_t t,
                           Modality modality, DrawMode mode, std::uint64_t seed) {
  CellPredictor predictor(draws);
  const auto& spec = predictor.spec();
  if (s >= spec.S || t >= spec.T) throw SchemaError("jmrp: district or month out of range");
  bool any_cell = false;
  for (const auto& c : table.cells) any_cell = any_cell || c.district == s;
  if (!any_cell) return {};
  const auto rows = district_rows(table, s, modality, spec);
  double total = 0.0;
  for (const auto& r : rows) total += r.weight;
  if (!(total > 0.0)) throw DomainError("jmrp: district " + std::to_string(s) + " has zero total cell weight");

  std::vector<double> values(draws.size());
  for (std::size_t b = 0; b < draws.size(); ++b) {
    double acc = 0.0;
    for (const auto& r : rows) {
      const double p = logistic(predictor.eta(b, r.row, s, t));
      acc += r.weight * (mode == DrawMode::Rate ? p : bernoulli(seed, {s, t, b, r.index}, p));
    }
    values[b] = acc / total;
  }
  return from_draws(std::move(values), total);
}

EstimateSeries full_series(const PosteriorDraws& draws, const PostStratTable& table, Modality modality,
                           DrawMode mode, std::uint64_t seed, EstimatorTag tag) {
  CellPredictor predictor(draws);
  EstimateSeries series;
  for (std::size_t s = 0; s < predictor.spec().S; ++s) {
    for (std::size_t t = 0; t < predictor.spec().T; ++t) {
      auto e = jmrp_estimate(draws, table, s, t, modality, mode, seed);
      e.tag = tag;
      e.district = s;
      e.month = t;
      series.entries.push_back(std::move(e));
    }
  }
  return series;
}

std::vector<std::vector<SurveyRecord>> group_records(const std::vector<SurveyRecord>& records, std::size_t S,
                                                     std::size_t T, std::optional<Modality> modality) {
  std::vector<std::vector<SurveyRecord>> groups(S * T);
  for (const auto& r : records) {
    if (modality && r.modality != *modality) continue;
    if (r.district >= S || r.month >= T) throw SchemaError("record outside the district/month grid");
    groups[r.district * T + r.month].push_back(r);
  }
  return groups;
}

std::string EstimateSeries::csv_header() { return "estimator,district,month,mean,q05,q10,q50,q90,q95,n"; }

std::string EstimateSeries::to_csv() const {
  std::ostringstream out;
  out << csv_header() << '\n';
  for (const auto& e : entries) {
    out << to_string(e.tag) << ',' << e.district << ',' << e.month;
    if (e.has_data) {
      out << ',' << csv::format(e.mean);
      for (double q : e.q) out << ',' << csv::format(q);
      out << ',' << csv::format(e.n);
    } else {
      out << ",NA,NA,NA,NA,NA,NA,0";
    }
    out << '\n';
  }
  return out.str();
}

std::string EstimateSeries::draws_to_csv() const {
  std::ostringstream out;
  out << "estimator,district,month,draw,value\n";
  for (const auto& e : entries) {
    for (std::size_t b = 0; b < e.draws.size(); ++b) {
      out << to_string(e.tag) << ',' << e.district << ',' << e.month << ',' << b << ',' << csv::format(e.draws[b])
          << '\n';
    }
  }
  return out.str();
}

EstimateSeries read_estimates(const std::string& path) {
  const auto table = csv::read(path);
  const std::vector<std::string> cols = {"estimator", "district", "month", "mean", "q05",
                                         "q10",       "q50",      "q90",   "q95",  "n"};
  std::vector<std::size_t> idx;
  for (const auto& c : cols) idx.push_back(table.require(c));
  EstimateSeries series;
  for (const auto& row : table.rows) {
    EstimateEntry e;
    e.tag = parse_estimator(row[idx[0]]);
    e.district = static_cast<std::size_t>(csv::parse_int(row[idx[1]], path));
    e.month = static_cast<std::size_t>(csv::parse_int(row[idx[2]], path));
    e.mean = csv::parse_double(row[idx[3]], path);
    e.has_data = !std::isnan(e.mean);
    for (std::size_t k = 0; k < 5; ++k) e.q[k] = csv::parse_double(row[idx[4 + k]], path);
    e.n = csv::parse_double(row[idx[9]], path);
    series.entries.push_back(std::move(e));
  }
  return series;
}

}  // namespace jmrp
