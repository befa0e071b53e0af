#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "jmrp/model.hpp"

namespace jmrp {

enum class Provenance { FrequencyCounts, Raked };
std::string to_string(Provenance p);

/// Name of the poststratification variable holding phone ownership ("0"/"1").
inline constexpr const char* kPhoneVariable = "phone_ownership";
/// Pseudo-variable name that lets targets rake district totals.
inline constexpr const char* kDistrictVariable = "district";

struct PostStratVariable {
  std::string name;
  std::vector<std::string> levels;

  std::optional<std::size_t> find(const std::string& label) const;
};

struct PostStratCell {
  std::size_t district = 0;
  std::vector<std::size_t> codes;  // one per variable
  double weight = 0.0;
};

struct PostStratTable {
  std::size_t S = 0;
  std::vector<PostStratVariable> variables;
  std::vector<PostStratCell> cells;
  Provenance provenance = Provenance::FrequencyCounts;

  double total() const;
  double district_total(std::size_t district) const;
  std::optional<std::size_t> variable_index(const std::string& name) const;
  /// Throws SchemaError on duplicate keys, bad codes or negative weights.
  void validate() const;
};

/// One row of a representative survey used to count cells.
struct MicrodataRow {
  std::size_t district = 0;
  std::vector<std::size_t> codes;
  double weight = 1.0;
};

/// Weighted counts per (district, code combination); throws DomainError on empty input.
PostStratTable table_from_microdata(std::size_t S, std::vector<PostStratVariable> variables,
                                    const std::vector<MicrodataRow>& rows);

/// Variables matching a model: the schema covariates followed by phone ownership.
std::vector<PostStratVariable> model_variables(const ModelSpec& spec);

enum class MarginScope { National, PerDistrict };

struct MarginTarget {
  std::string variable;
  std::vector<std::pair<std::string, double>> proportions;
  MarginScope scope = MarginScope::National;

  /// Proportions nonnegative and summing to 1 within 1e-9.
  void validate() const;
};

struct RakeStats {
  std::size_t cycles = 0;
  double residual = 0.0;
};

/// Classic multiplicative IPF. Each cycle rescales cells to every target in
/// turn; convergence is the L-infinity distance between weighted and target
/// proportions. Throws InfeasibleError naming the category when a positive
/// target has no prior mass, ConvergenceError after max_iter cycles.
PostStratTable rake(const PostStratTable& prior, const std::vector<MarginTarget>& targets, double tol = 1e-8,
                    std::size_t max_iter = 1000, RakeStats* stats = nullptr);

/// Cells of one district, weights unchanged.
PostStratTable restrict(const PostStratTable& table, std::size_t district);

std::string table_to_csv(const PostStratTable& table);
void write_table(const std::string& path, const PostStratTable& table);
/// Levels are taken from `variables` when given, otherwise collected in order of appearance.
PostStratTable read_table(const std::string& path, std::size_t S,
                          const std::optional<std::vector<PostStratVariable>>& variables = std::nullopt);

std::vector<MarginTarget> targets_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const std::vector<MarginTarget>& targets);

}  // namespace jmrp
