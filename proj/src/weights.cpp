#include "jmrp/weights.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "jmrp/csv.hpp"
#include "jmrp/errors.hpp"

namespace jmrp {

std::string to_string(Provenance p) { return p == Provenance::Raked ? "raked" : "frequency_counts"; }

std::optional<std::size_t> PostStratVariable::find(const std::string& label) const {
  auto it = std::find(levels.begin(), levels.end(), label);
  if (it == levels.end()) return std::nullopt;
  return static_cast<std::size_t>(it - levels.begin());
}

double PostStratTable::total() const {
  double t = 0.0;
  for (const auto& c : cells) t += c.weight;
  return t;
}

double PostStratTable::district_total(std::size_t district) const {
  double t = 0.0;
  for (const auto& c : cells) {
    if (c.district == district) t += c.weight;
  }
  return t;
}

std::optional<std::size_t> PostStratTable::variable_index(const std::string& name) const {
  for (std::size_t v = 0; v < variables.size(); ++v) {
    if (variables[v].name == name) return v;
  }
  return std::nullopt;
}

void PostStratTable::validate() const {
  std::set<std::pair<std::size_t, std::vector<std::size_t>>> keys;
  for (const auto& c : cells) {
    if (c.district >= S) throw SchemaError("poststratification cell in district " + std::to_string(c.district) +
                                           " outside [0," + std::to_string(S) + ")");
    if (c.codes.size() != variables.size()) throw SchemaError("poststratification cell has the wrong arity");
    for (std::size_t v = 0; v < variables.size(); ++v) {
      if (c.codes[v] >= variables[v].levels.size()) {
        throw SchemaError("poststratification variable '" + variables[v].name + "': unknown code " +
                          std::to_string(c.codes[v]));
      }
    }
    if (!(c.weight >= 0.0) || !std::isfinite(c.weight)) throw SchemaError("cell weights must be finite and >= 0");
    if (!keys.insert({c.district, c.codes}).second) {
      throw SchemaError("duplicate poststratification cell in district " + std::to_string(c.district));
    }
  }
}

PostStratTable table_from_microdata(std::size_t S, std::vector<PostStratVariable> variables,
                                    const std::vector<MicrodataRow>& rows) {
  if (rows.empty()) throw DomainError("table_from_microdata: no rows");
  std::map<std::pair<std::size_t, std::vector<std::size_t>>, double> counts;
  for (const auto& r : rows) {
    if (!(r.weight >= 0.0)) throw SchemaError("microdata weights must be >= 0");
    counts[{r.district, r.codes}] += r.weight;
  }
  PostStratTable table;
  table.S = S;
  table.variables = std::move(variables);
  for (const auto& [key, w] : counts) table.cells.push_back({key.first, key.second, w});
  table.validate();
  return table;
}

std::vector<PostStratVariable> model_variables(const ModelSpec& spec) {
  std::vector<PostStratVariable> vars;
  for (const auto& c : spec.covariate_schema) vars.push_back({c.name, c.levels});
  vars.push_back({kPhoneVariable, {"0", "1"}});
  return vars;
}

void MarginTarget::validate() const {
  double sum = 0.0;
  std::set<std::string> seen;
  for (const auto& [label, p] : proportions) {
    if (!(p >= 0.0)) throw SchemaError("target '" + variable + "': proportion of '" + label + "' is negative");
    if (!seen.insert(label).second) throw SchemaError("target '" + variable + "': duplicate category '" + label + "'");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw SchemaError("target '" + variable + "': proportions sum to " + csv::format(sum) + ", not 1");
  }
}

namespace {

struct CompiledTarget {
  const MarginTarget* source;
  std::size_t categories = 0;
  std::vector<double> proportion;      // per category index
  std::vector<std::string> labels;
  std::vector<std::size_t> cell_cat;   // category of every cell
  std::vector<std::size_t> cell_group; // 0 for national, district otherwise
  std::size_t groups = 1;
};

CompiledTarget compile(const MarginTarget& target, const PostStratTable& table) {
  target.validate();
  CompiledTarget ct;
  ct.source = &target;
  std::vector<std::string> levels;
  std::optional<std::size_t> var;
  if (target.variable == kDistrictVariable) {
    for (std::size_t s = 0; s < table.S; ++s) levels.push_back(std::to_string(s));
  } else {
    var = table.variable_index(target.variable);
    if (!var) throw SchemaError("raking target names unknown variable '" + target.variable + "'");
    levels = table.variables[*var].levels;
  }
  // Table levels first, then target-only labels (which have no prior support).
  ct.labels = levels;
  ct.proportion.assign(levels.size(), 0.0);
  for (const auto& [label, p] : target.proportions) {
    auto it = std::find(ct.labels.begin(), ct.labels.end(), label);
    if (it == ct.labels.end()) {
      ct.labels.push_back(label);
      ct.proportion.push_back(p);
    } else {
      ct.proportion[it - ct.labels.begin()] = p;
    }
  }
  ct.categories = ct.labels.size();
  if (target.scope == MarginScope::PerDistrict) ct.groups = table.S;
  for (const auto& c : table.cells) {
    ct.cell_cat.push_back(var ? c.codes[*var] : c.district);
    ct.cell_group.push_back(target.scope == MarginScope::PerDistrict ? c.district : 0);
  }
  return ct;
}

// mass[group * categories + cat] and group totals under the current weights.
void margins(const CompiledTarget& ct, const std::vector<double>& w, std::vector<double>& mass,
             std::vector<double>& totals) {
  mass.assign(ct.groups * ct.categories, 0.0);
  totals.assign(ct.groups, 0.0);
  for (std::size_t j = 0; j < w.size(); ++j) {
    mass[ct.cell_group[j] * ct.categories + ct.cell_cat[j]] += w[j];
    totals[ct.cell_group[j]] += w[j];
  }
}

}  // namespace

PostStratTable rake(const PostStratTable& prior, const std::vector<MarginTarget>& targets, double tol,
                    std::size_t max_iter, RakeStats* stats) {
  if (!(tol > 0.0)) throw DomainError("rake: tol must be positive");
  prior.validate();
  std::vector<CompiledTarget> compiled;
  for (const auto& t : targets) compiled.push_back(compile(t, prior));

  std::vector<double> w;
  for (const auto& c : prior.cells) w.push_back(c.weight);
  std::vector<double> mass, totals;

  for (const auto& ct : compiled) {
    margins(ct, w, mass, totals);
    for (std::size_t g = 0; g < ct.groups; ++g) {
      if (totals[g] <= 0.0) continue;
      for (std::size_t k = 0; k < ct.categories; ++k) {
        if (ct.proportion[k] > 0.0 && mass[g * ct.categories + k] <= 0.0) {
          std::string where = ct.source->scope == MarginScope::PerDistrict ? " in district " + std::to_string(g) : "";
          throw InfeasibleError("raking infeasible: '" + ct.source->variable + "' category '" + ct.labels[k] +
                                "' has positive target but no prior weight" + where);
        }
      }
    }
  }

  auto residual = [&] {
    double r = 0.0;
    for (const auto& ct : compiled) {
      margins(ct, w, mass, totals);
      for (std::size_t g = 0; g < ct.groups; ++g) {
        if (totals[g] <= 0.0) continue;
        for (std::size_t k = 0; k < ct.categories; ++k) {
          r = std::max(r, std::abs(mass[g * ct.categories + k] / totals[g] - ct.proportion[k]));
        }
      }
    }
    return r;
  };

  std::size_t cycle = 0;
  double r = residual();
  while (r > tol) {
    if (cycle == max_iter) {
      throw ConvergenceError("raking did not converge in " + std::to_string(max_iter) +
                                 " cycles (residual " + csv::format(r) + ")",
                             r);
    }
    for (const auto& ct : compiled) {
      margins(ct, w, mass, totals);
      std::vector<double> factor(mass.size(), 1.0);
      for (std::size_t g = 0; g < ct.groups; ++g) {
        for (std::size_t k = 0; k < ct.categories; ++k) {
          const double m = mass[g * ct.categories + k];
          if (m > 0.0) factor[g * ct.categories + k] = ct.proportion[k] * totals[g] / m;
        }
      }
      for (std::size_t j = 0; j < w.size(); ++j) w[j] *= factor[ct.cell_group[j] * ct.categories + ct.cell_cat[j]];
    }
    ++cycle;
    r = residual();
  }
  if (stats) *stats = {cycle, r};

  PostStratTable out = prior;
  for (std::size_t j = 0; j < w.size(); ++j) out.cells[j].weight = w[j];
  out.provenance = Provenance::Raked;
  return out;
}

PostStratTable restrict(const PostStratTable& table, std::size_t district) {
  PostStratTable sub;
  sub.S = table.S;
  sub.variables = table.variables;
  sub.provenance = table.provenance;
  for (const auto& c : table.cells) {
    if (c.district == district) sub.cells.push_back(c);
  }
  return sub;
}

std::string table_to_csv(const PostStratTable& table) {
  std::ostringstream out;
  out << "district";
  for (const auto& v : table.variables) out << ',' << v.name;
  out << ",weight\n";
  for (const auto& c : table.cells) {
    out << c.district;
    for (std::size_t v = 0; v < c.codes.size(); ++v) out << ',' << table.variables[v].levels[c.codes[v]];
    out << ',' << csv::format(c.weight) << '\n';
  }
  return out.str();
}

void write_table(const std::string& path, const PostStratTable& table) { csv::write_file(path, table_to_csv(table)); }

PostStratTable read_table(const std::string& path, std::size_t S,
                          const std::optional<std::vector<PostStratVariable>>& variables) {
  const auto csv_table = csv::read(path);
  const auto& h = csv_table.header;
  if (h.size() < 2 || h.front() != "district" || h.back() != "weight") {
    throw SchemaError(path + ": poststratification table needs columns district, <variables...>, weight");
  }
  PostStratTable table;
  table.S = S;
  const std::size_t nvar = h.size() - 2;
  if (variables) {
    if (variables->size() != nvar) throw SchemaError(path + ": variable columns do not match the schema");
    for (std::size_t v = 0; v < nvar; ++v) {
      if ((*variables)[v].name != h[v + 1]) {
        throw SchemaError(path + ": expected column '" + (*variables)[v].name + "', found '" + h[v + 1] + "'");
      }
    }
    table.variables = *variables;
  } else {
    for (std::size_t v = 0; v < nvar; ++v) table.variables.push_back({h[v + 1], {}});
  }
  for (const auto& row : csv_table.rows) {
    PostStratCell cell;
    const auto d = csv::parse_int(row[0], path);
    if (d < 0) throw SchemaError(path + ": negative district");
    cell.district = static_cast<std::size_t>(d);
    for (std::size_t v = 0; v < nvar; ++v) {
      auto& var = table.variables[v];
      auto code = var.find(row[v + 1]);
      if (!code) {
        if (variables) throw SchemaError(path + ": variable '" + var.name + "' has unknown level '" + row[v + 1] + "'");
        var.levels.push_back(row[v + 1]);
        code = var.levels.size() - 1;
      }
      cell.codes.push_back(*code);
    }
    cell.weight = csv::parse_double(row.back(), path);
    table.cells.push_back(std::move(cell));
  }
  table.validate();
  return table;
}

std::vector<MarginTarget> targets_from_json(const nlohmann::json& doc) {
  const auto& list = doc.is_object() && doc.contains("targets") ? doc.at("targets") : doc;
  if (!list.is_array()) throw SchemaError("raking targets must be an array (or an object with 'targets')");
  std::vector<MarginTarget> out;
  for (const auto& item : list) {
    static const std::set<std::string> known = {"variable", "proportions", "scope"};
    for (const auto& [key, _] : item.items()) {
      if (!known.count(key)) throw SchemaError("unknown raking target key '" + key + "'");
    }
    MarginTarget t;
    try {
      t.variable = item.at("variable").get<std::string>();
      for (const auto& [label, p] : item.at("proportions").items()) t.proportions.emplace_back(label, p.get<double>());
      const auto scope = item.value("scope", std::string("national"));
      if (scope == "national") t.scope = MarginScope::National;
      else if (scope == "per_district") t.scope = MarginScope::PerDistrict;
      else throw SchemaError("raking target scope must be 'national' or 'per_district', got '" + scope + "'");
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(std::string("raking target: ") + e.what());
    }
    t.validate();
    out.push_back(std::move(t));
  }
  return out;
}

nlohmann::json to_json(const std::vector<MarginTarget>& targets) {
  auto arr = nlohmann::json::array();
  for (const auto& t : targets) {
    nlohmann::json props = nlohmann::json::object();
    for (const auto& [label, p] : t.proportions) props[label] = p;
    arr.push_back({{"variable", t.variable},
                   {"proportions", props},
                   {"scope", t.scope == MarginScope::National ? "national" : "per_district"}});
  }
  return arr;
}

}  // namespace jmrp
