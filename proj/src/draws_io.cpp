#include "jmrp/draws_io.hpp"

#include <sstream>

#include "jmrp/csv.hpp"
#include "jmrp/data_io.hpp"
#include "jmrp/errors.hpp"

namespace jmrp {

namespace {
constexpr std::size_t kMetaColumns = 6;
}

std::string draws_to_csv(const PosteriorDraws& draws) {
  std::ostringstream out;
  out << "chain,draw,divergent,treedepth,n_leapfrog,accept_stat";
  for (const auto& n : draws.names) out << ',' << n;
  out << '\n';
  for (std::size_t b = 0; b < draws.size(); ++b) {
    out << draws.chain_of(b) << ',' << b % draws.draws_per_chain << ',' << int(draws.divergent[b]) << ','
        << draws.treedepth[b] << ',' << draws.n_leapfrog[b] << ',' << csv::format(draws.accept_stat[b]);
    for (double v : draws.draw(b)) out << ',' << csv::format(v);
    out << '\n';
  }
  return out.str();
}

nlohmann::json draws_sidecar(const PosteriorDraws& draws) {
  nlohmann::json doc;
  doc["chains"] = draws.chains;
  doc["draws_per_chain"] = draws.draws_per_chain;
  auto& adapt = doc["adaptation"] = nlohmann::json::array();
  for (const auto& a : draws.adaptation) adapt.push_back({{"step_size", a.step_size}, {"inv_metric", a.inv_metric}});
  if (draws.layout) {
    doc["model"] = to_json(draws.layout->spec());
    doc["free_phi"] = draws.layout->free_phi();
  }
  return doc;
}

void write_draws(const std::string& csv_path, const std::string& sidecar_path, const PosteriorDraws& draws) {
  csv::write_file(csv_path, draws_to_csv(draws));
  write_json(sidecar_path, draws_sidecar(draws));
}

PosteriorDraws read_draws(const std::string& csv_path, const std::string& sidecar_path) {
  const auto table = csv::read(csv_path);
  const auto meta = read_json(sidecar_path);
  PosteriorDraws draws;
  try {
    draws.chains = meta.at("chains").get<std::size_t>();
    draws.draws_per_chain = meta.at("draws_per_chain").get<std::size_t>();
    for (const auto& a : meta.at("adaptation")) {
      draws.adaptation.push_back({a.at("step_size").get<double>(), a.at("inv_metric").get<std::vector<double>>()});
    }
    if (meta.contains("model")) {
      draws.layout = ParameterLayout(model_spec_from_json(meta.at("model")),
                                     meta.at("free_phi").get<std::vector<std::size_t>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(sidecar_path + ": " + e.what());
  }
  if (table.header.size() < kMetaColumns) throw SchemaError(csv_path + ": missing draw metadata columns");
  draws.names.assign(table.header.begin() + kMetaColumns, table.header.end());
  if (table.rows.size() != draws.size()) {
    throw SchemaError(csv_path + ": expected " + std::to_string(draws.size()) + " draws, found " +
                      std::to_string(table.rows.size()));
  }
  if (draws.layout && draws.layout->names() != draws.names) {
    throw SchemaError(csv_path + ": columns do not match the model layout in " + sidecar_path);
  }
  draws.values.reserve(draws.size() * draws.dimension());
  for (const auto& row : table.rows) {
    draws.divergent.push_back(static_cast<std::uint8_t>(csv::parse_int(row[2], csv_path)));
    draws.treedepth.push_back(static_cast<std::uint32_t>(csv::parse_int(row[3], csv_path)));
    draws.n_leapfrog.push_back(static_cast<std::uint32_t>(csv::parse_int(row[4], csv_path)));
    draws.accept_stat.push_back(csv::parse_double(row[5], csv_path));
    for (std::size_t k = kMetaColumns; k < row.size(); ++k) draws.values.push_back(csv::parse_double(row[k], csv_path));
  }
  return draws;
}

}  // namespace jmrp
