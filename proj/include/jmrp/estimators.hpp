#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jmrp/metrics.hpp"
#include "jmrp/model.hpp"
#include "jmrp/sampler.hpp"
#include "jmrp/weights.hpp"

namespace jmrp {

enum class EstimatorTag { ZimvacDirect, MvamDirect, MR, MRP, JmrMP, JmrF2F, Jmrp };
std::string to_string(EstimatorTag tag);
/// Throws SchemaError for unknown tags.
EstimatorTag parse_estimator(const std::string& text);
const std::vector<EstimatorTag>& all_estimators();

enum class DrawMode { Bernoulli, Rate };
std::string to_string(DrawMode mode);
DrawMode parse_draw_mode(const std::string& text);

enum class ModalityOverride { None, MP, F2F };

/// Probabilities of the reported quantiles.
inline constexpr std::array<double, 5> kQuantileLevels = {0.05, 0.10, 0.50, 0.90, 0.95};

struct EstimateEntry {
  EstimatorTag tag = EstimatorTag::Jmrp;
  std::size_t district = 0;
  std::size_t month = 0;
  bool has_data = false;
  double mean = 0.0;
  std::array<double, 5> q{};  // at kQuantileLevels
  double n = 0.0;             // records or total cell weight used
  std::vector<double> draws;  // per-draw values for model estimators

  Interval interval80() const { return {q[1], q[3]}; }
  Interval interval90() const { return {q[0], q[4]}; }
};

struct EstimateSeries {
  std::vector<EstimateEntry> entries;

  static std::string csv_header();
  /// Long format: estimator, district, month, mean, q05, q10, q50, q90, q95, n ("NA" without data).
  std::string to_csv() const;
  /// Draw-level long format: estimator, district, month, draw, value.
  std::string draws_to_csv() const;
};

EstimateSeries read_estimates(const std::string& path);

/// Mean and type-7 quantiles of a sample.
struct DrawSummary {
  double mean = 0.0;
  std::array<double, 5> q{};
};
DrawSummary summarize_draws(std::span<const double> values);

/// Direct estimates: Wilson bounds stand in for quantiles (q05/q95 at 90%, q10/q90 at 80%).
/// Empty input gives has_data = false.
EstimateEntry direct_proportion(std::span<const SurveyRecord> records);
/// Weighted proportion; Wilson intervals use the Kish effective sample size.
/// Throws DomainError when every weight is zero.
EstimateEntry direct_weighted(std::span<const SurveyRecord> records);

/// Per-draw mean over records of pi_i (modality replaced per override). In
/// bernoulli mode each pi_i is replaced by a Bernoulli draw seeded from
/// (seed, record position, b).
EstimateEntry mr_aggregate(const PosteriorDraws& draws, std::span<const SurveyRecord> records,
                           ModalityOverride modality_override, DrawMode mode = DrawMode::Rate,
                           std::uint64_t seed = 0);

/// Poststratified estimate for district s, month t. Throws DomainError when the
/// district's cells carry no weight; no cells gives has_data = false.
EstimateEntry jmrp_estimate(const PosteriorDraws& draws, const PostStratTable& table, std::size_t s, std::size_t t,
                           Modality modality, DrawMode mode = DrawMode::Bernoulli, std::uint64_t seed = 0);

/// jmrp_estimate over every (s, t) with the same table.
EstimateSeries full_series(const PosteriorDraws& draws, const PostStratTable& table, Modality modality,
                           DrawMode mode = DrawMode::Bernoulli, std::uint64_t seed = 0,
                           EstimatorTag tag = EstimatorTag::Jmrp);

/// Records grouped by (district, month), optionally filtered by modality.
std::vector<std::vector<SurveyRecord>> group_records(const std::vector<SurveyRecord>& records, std::size_t S,
                                                     std::size_t T, std::optional<Modality> modality);

}  // namespace jmrp
