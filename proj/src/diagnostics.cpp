#include "jmrp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "jmrp/metrics.hpp"

namespace jmrp {

namespace {

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double sample_variance(const std::vector<double>& v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / (v.size() - 1.0);
}

ChainSet split(const ChainSet& chains) {
  ChainSet out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    out.emplace_back(c.begin(), c.begin() + half);
    out.emplace_back(c.end() - half, c.end());
  }
  return out;
}

bool is_constant(const ChainSet& chains) {
  const double first = chains.front().front();
  for (const auto& c : chains) {
    for (double x : c) {
      if (x != first) return false;
    }
  }
  return true;
}

// Autocovariance at `lag`, normalized by n (biased estimator).
double autocovariance(const std::vector<double>& c, double mean, std::size_t lag) {
  double acc = 0.0;
  for (std::size_t i = 0; i + lag < c.size(); ++i) acc += (c[i] - mean) * (c[i + lag] - mean);
  return acc / c.size();
}

std::optional<double> ess_unsplit(const ChainSet& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = std::min_element(chains.begin(), chains.end(), [](const auto& a, const auto& b) {
                          return a.size() < b.size();
                        })->size();
  if (n < 4 || is_constant(chains)) return std::nullopt;

  std::vector<double> means(m), vars(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = mean_of(chains[c]);
    vars[c] = autocovariance(chains[c], means[c], 0) * n / (n - 1.0);
  }
  const double mean_var = mean_of(vars);
  double var_plus = mean_var * (n - 1.0) / n;
  if (m > 1) var_plus += sample_variance(means);
  if (!(var_plus > 0.0)) return std::nullopt;

  auto mean_acov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m; ++c) acc += autocovariance(chains[c], means[c], lag);
    return acc / m;
  };

  std::vector<double> rho(n, 0.0);
  rho[0] = 1.0;
  double rho_even = 1.0;
  double rho_odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
  rho[1] = rho_odd;
  std::size_t t = 1;
  while (t < n - 5 && rho_even + rho_odd > 0.0) {
    rho_even = 1.0 - (mean_var - mean_acov(t + 1)) / var_plus;
    rho_odd = 1.0 - (mean_var - mean_acov(t + 2)) / var_plus;
    if (rho_even + rho_odd >= 0.0) {
      rho[t + 1] = rho_even;
      rho[t + 2] = rho_odd;
    }
    t += 2;
  }
  const std::size_t max_t = t;
  if (rho_even > 0.0 && max_t + 1 < n) rho[max_t + 1] = rho_even;

  // Initial monotone sequence.
  for (std::size_t k = 1; k + 3 <= max_t; k += 2) {
    if (rho[k + 1] + rho[k + 2] > rho[k - 1] + rho[k]) {
      rho[k + 1] = (rho[k - 1] + rho[k]) / 2.0;
      rho[k + 2] = rho[k + 1];
    }
  }
  const double total = static_cast<double>(m * n);
  double tau = -1.0;
  for (std::size_t k = 0; k <= max_t && k < n; ++k) tau += 2.0 * rho[k];
  if (max_t + 1 < n) tau += rho[max_t + 1];
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

}  // namespace

std::optional<double> split_rhat(const ChainSet& chains) {
  if (chains.size() < 2) return std::nullopt;
  for (const auto& c : chains) {
    if (c.size() < 4) return std::nullopt;
  }
  auto halves = split(chains);
  const std::size_t n = std::min_element(halves.begin(), halves.end(), [](const auto& a, const auto& b) {
                          return a.size() < b.size();
                        })->size();
  std::vector<double> means, vars;
  for (auto& h : halves) {
    h.resize(n);
    means.push_back(mean_of(h));
    vars.push_back(sample_variance(h));
  }
  const double within = mean_of(vars);
  if (!(within > 0.0)) return std::nullopt;
  const double between = n * sample_variance(means);
  const double var_plus = (n - 1.0) / n * within + between / n;
  return std::sqrt(var_plus / within);
}

std::optional<double> effective_sample_size(const ChainSet& chains) {
  if (chains.empty()) return std::nullopt;
  return ess_unsplit(split(chains));
}

std::optional<double> bulk_ess(const ChainSet& chains) {
  if (chains.empty() || is_constant(chains)) return std::nullopt;
  // Pool, rank with average ties, then map to normal scores.
  std::vector<double> flat;
  for (const auto& c : chains) flat.insert(flat.end(), c.begin(), c.end());
  const auto ranks = average_ranks(flat);
  const double total = static_cast<double>(flat.size());
  ChainSet z(chains.size());
  std::size_t k = 0;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (std::size_t i = 0; i < chains[c].size(); ++i, ++k) {
      z[c].push_back(normal_quantile((ranks[k] - 0.375) / (total + 0.25)));
    }
  }
  return effective_sample_size(z);
}

ChainSet chains_of(const PosteriorDraws& draws, std::size_t coord) {
  ChainSet chains(draws.chains);
  for (std::size_t c = 0; c < draws.chains; ++c) {
    chains[c].reserve(draws.draws_per_chain);
    for (std::size_t i = 0; i < draws.draws_per_chain; ++i) {
      chains[c].push_back(draws.values[(c * draws.draws_per_chain + i) * draws.dimension() + coord]);
    }
  }
  return chains;
}

DiagnosticsReport diagnostics(const PosteriorDraws& draws) {
  DiagnosticsReport report;
  report.rhat_available = draws.chains >= 2 && draws.draws_per_chain >= 4;
  if (!report.rhat_available) report.warnings.emplace_back("R-hat unavailable: needs >= 2 chains of >= 4 draws");
  double max_rhat = 0.0;
  double min_ess = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < draws.dimension(); ++p) {
    CoordinateDiagnostics cd;
    cd.name = draws.names[p];
    auto chains = chains_of(draws, p);
    cd.degenerate = draws.size() == 0 || is_constant(chains);
    if (!cd.degenerate) {
      if (report.rhat_available) cd.rhat = split_rhat(chains);
      cd.ess_bulk = bulk_ess(chains);
    }
    if (cd.rhat) max_rhat = std::max(max_rhat, *cd.rhat);
    if (cd.ess_bulk) min_ess = std::min(min_ess, *cd.ess_bulk);
    if (cd.degenerate) report.warnings.push_back("coordinate " + cd.name + " is constant; ESS undefined");
    report.coordinates.push_back(std::move(cd));
  }
  report.max_rhat = max_rhat;
  report.min_ess = std::isfinite(min_ess) ? min_ess : 0.0;
  report.divergences = draws.divergence_count();
  report.divergence_rate = draws.size() ? static_cast<double>(report.divergences) / draws.size() : 0.0;
  if (report.divergence_rate > 0.2) {
    report.warnings.push_back("divergence rate " + std::to_string(report.divergence_rate) + " exceeds 20%");
  }
  report.ok = report.rhat_available && max_rhat < 1.05;
  return report;
}

nlohmann::json DiagnosticsReport::to_json() const {
  nlohmann::json doc;
  doc["rhat_available"] = rhat_available;
  doc["max_rhat"] = max_rhat;
  doc["min_ess_bulk"] = min_ess;
  doc["divergences"] = divergences;
  doc["divergence_rate"] = divergence_rate;
  doc["ok"] = ok;
  doc["warnings"] = warnings;
  auto& coords = doc["coordinates"] = nlohmann::json::array();
  for (const auto& c : coordinates) {
    nlohmann::json entry;
    entry["name"] = c.name;
    entry["rhat"] = c.rhat ? nlohmann::json(*c.rhat) : nlohmann::json(nullptr);
    entry["ess_bulk"] = c.ess_bulk ? nlohmann::json(*c.ess_bulk) : nlohmann::json(nullptr);
    entry["degenerate"] = c.degenerate;
    coords.push_back(entry);
  }
  return doc;
}

}  // namespace jmrp
