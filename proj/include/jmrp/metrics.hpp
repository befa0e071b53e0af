#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace jmrp {

/// Standard-normal quantile (rational approximation refined by one Halley step).
double normal_quantile(double p);

/// 1-based ranks with ties assigned their average rank.
std::vector<double> average_ranks(std::span<const double> values);

struct ErrorMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  double mbe = 0.0;  // estimate - truth
};

/// Throws DomainError on length mismatch or empty input.
ErrorMetrics error_metrics(std::span<const double> estimate, std::span<const double> truth);

/// Lin's concordance correlation with population moments; nullopt when either
/// vector is constant.
std::optional<double> ccc(std::span<const double> estimate, std::span<const double> truth);
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

struct Correlations {
  std::optional<double> pearson;
  std::optional<double> spearman;
};
Correlations rank_corr(std::span<const double> estimate, std::span<const double> truth);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double length() const { return upper - lower; }
};

/// Wilson score interval; n may be an effective (non-integer) sample size.
/// Throws DomainError unless 0 <= k <= n, n > 0 and level in (0,1).
Interval wilson(double successes, double n, double level);

/// Closed intervals intersect (touching endpoints count).
bool overlaps(const Interval& a, const Interval& b);
/// Share of pairs whose intervals overlap.
double coverage(std::span<const Interval> model, std::span<const Interval> reference);

/// Empirical CRPS of a sample forecast, O(B log B) via sorting.
double crps_empirical(std::span<const double> samples, double observation);

struct UnitEvaluation {
  double estimate = 0.0;
  double reference = 0.0;
  Interval model80, model90;
  Interval reference80, reference90;
  std::vector<double> samples;  // optional, enables CRPS
};

struct MetricsReport {
  double mae = 0.0, rmse = 0.0, mbe = 0.0;
  std::optional<double> pearson, spearman, ccc;
  double coverage80 = 0.0, coverage90 = 0.0;
  double length80 = 0.0, length90 = 0.0;
  std::optional<double> crps;
  std::size_t n_units = 0;

  nlohmann::json to_json() const;
  static std::string csv_header();
  std::string csv_fields() const;
};

/// CRPS is reported only when every unit carries samples.
MetricsReport summarize(std::span<const UnitEvaluation> units);

}  // namespace jmrp
