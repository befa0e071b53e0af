#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "jmrp/log_density.hpp"
#include "jmrp/model.hpp"
#include "jmrp/sampler.hpp"

namespace jmrp {

/// Days per week (0-7) each food group was eaten, in the order of kFoodGroups.
struct FoodFrequencies {
  std::array<int, 8> days{};
};

inline constexpr std::array<const char*, 8> kFoodGroups = {"staples", "pulses",         "vegetables", "fruits",
                                                           "meat_fish_eggs", "dairy", "fats",       "sugar"};
inline constexpr std::array<double, 8> kFoodWeights = {2.0, 3.0, 1.0, 1.0, 4.0, 4.0, 0.5, 0.5};

/// Weighted sum in [0, 112]; throws DomainError for a frequency outside 0-7.
double fcs(const FoodFrequencies& freq);

enum class FcsClass { Poor, Borderline, Acceptable };
std::string to_string(FcsClass c);

struct FcsThresholds {
  double poor_max = 21.0;
  double borderline_max = 35.0;

  static FcsThresholds standard() { return {21.0, 35.0}; }
  static FcsThresholds zimbabwe() { return {28.0, 42.0}; }
  /// "standard" or "zimbabwe"; throws SchemaError otherwise.
  static FcsThresholds preset(const std::string& name);
  void validate() const;
};

/// Upper bounds are inclusive.
FcsClass classify(double score, const FcsThresholds& th);

/// A reference-survey household with observed phone ownership.
struct OwnershipRow {
  std::size_t district = 0;
  std::vector<std::size_t> covariates;
  int owns = 0;
};

/// Logistic ownership model: intercept, covariate dummies and an iid district
/// intercept whose scale has the ModelSpec hyperprior.
class OwnershipPosterior final : public LogDensity {
 public:
  OwnershipPosterior(ModelSpec spec, const std::vector<OwnershipRow>& rows);
  std::size_t dimension() const override { return 1 + width_ + spec_.S + 1; }
  double log_density_gradient(std::span<const double> x, std::span<double> grad) const override;
  std::vector<std::string> coordinate_names() const override;

  std::size_t width() const { return width_; }

 private:
  struct Pattern {
    std::vector<std::size_t> columns;
    std::size_t district;
    double successes, trials;
  };
  ModelSpec spec_;
  std::size_t width_;
  std::vector<Pattern> patterns_;
};

class PhoneOwnershipModel {
 public:
  PhoneOwnershipModel(ModelSpec spec, PosteriorDraws draws);

  /// Posterior-mean ownership probability; districts outside the fit use a zero random effect.
  double predict(std::span<const std::size_t> covariates, std::size_t district) const;
  const PosteriorDraws& draws() const { return draws_; }
  const ModelSpec& spec() const { return spec_; }

 private:
  ModelSpec spec_;
  PosteriorDraws draws_;
  std::size_t width_;
};

/// Throws DomainError when every row has the same ownership outcome.
PhoneOwnershipModel fit_phone_ownership(const ModelSpec& spec, const std::vector<OwnershipRow>& rows,
                                        const SamplerConfig& config);

/// Fills phone_prob of MP records; F2F records pass through. Throws SchemaError
/// with per-covariate counts when records lack covariates the model needs.
std::vector<SurveyRecord> impute_phone_prob(std::vector<SurveyRecord> records, const PhoneOwnershipModel& model);

/// Columns: district, owns, then one column per schema covariate (level labels).
std::vector<OwnershipRow> read_ownership_rows(const std::string& path, const ModelSpec& spec);
std::string ownership_rows_to_csv(const std::vector<OwnershipRow>& rows, const ModelSpec& spec);

}  // namespace jmrp
