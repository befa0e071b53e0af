#include "jmrp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "jmrp/csv.hpp"
#include "jmrp/errors.hpp"

namespace jmrp {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DomainError("length mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  if (a.empty()) throw DomainError("metrics need at least one unit");
}

double mean(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw DomainError("normal_quantile: p must lie in [0,1]");
  }
  // Acklam's rational approximation.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement against the exact CDF.
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

ErrorMetrics error_metrics(std::span<const double> estimate, std::span<const double> truth) {
  check_pair(estimate, truth);
  ErrorMetrics m;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double e = estimate[i] - truth[i];
    m.mae += std::abs(e);
    m.rmse += e * e;
    m.mbe += e;
  }
  const double n = static_cast<double>(estimate.size());
  m.mae /= n;
  m.rmse = std::sqrt(m.rmse / n);
  m.mbe /= n;
  return m;
}

std::optional<double> ccc(std::span<const double> estimate, std::span<const double> truth) {
  check_pair(estimate, truth);
  const double me = mean(estimate), mt = mean(truth);
  double ve = 0.0, vt = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    ve += (estimate[i] - me) * (estimate[i] - me);
    vt += (truth[i] - mt) * (truth[i] - mt);
    cov += (estimate[i] - me) * (truth[i] - mt);
  }
  if (ve == 0.0 || vt == 0.0) return std::nullopt;
  const double n = static_cast<double>(estimate.size());
  ve /= n;
  vt /= n;
  cov /= n;
  return 2.0 * cov / (ve + vt + (me - mt) * (me - mt));
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b);
  const double ma = mean(a), mb = mean(b);
  double va = 0.0, vb = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
    cov += (a[i] - ma) * (b[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) return std::nullopt;
  return cov / std::sqrt(va * vb);
}

Correlations rank_corr(std::span<const double> estimate, std::span<const double> truth) {
  Correlations c;
  c.pearson = pearson(estimate, truth);
  const auto re = average_ranks(estimate);
  const auto rt = average_ranks(truth);
  c.spearman = pearson(re, rt);
  return c;
}

Interval wilson(double successes, double n, double level) {
  if (!(n > 0.0)) throw DomainError("wilson: n must be positive");
  if (!(successes >= 0.0 && successes <= n)) throw DomainError("wilson: successes must lie in [0, n]");
  if (!(level > 0.0 && level < 1.0)) throw DomainError("wilson: level must lie in (0,1)");
  const double z = normal_quantile((1.0 + level) / 2.0);
  const double z2 = z * z;
  const double center = (successes + z2 / 2.0) / (n + z2);
  const double half = z / (n + z2) * std::sqrt(successes * (n - successes) / n + z2 / 4.0);
  Interval iv{std::max(0.0, center - half), std::min(1.0, center + half)};
  if (successes == 0.0) iv.lower = 0.0;
  if (successes == n) iv.upper = 1.0;
  return iv;
}

bool overlaps(const Interval& a, const Interval& b) { return a.lower <= b.upper && b.lower <= a.upper; }

double coverage(std::span<const Interval> model, std::span<const Interval> reference) {
  if (model.size() != reference.size()) throw DomainError("coverage: interval lists differ in length");
  if (model.empty()) throw DomainError("coverage: no intervals");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < model.size(); ++i) hits += overlaps(model[i], reference[i]) ? 1 : 0;
  return static_cast<double>(hits) / model.size();
}

double crps_empirical(std::span<const double> samples, double observation) {
  if (samples.empty()) throw DomainError("crps_empirical: no samples");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double b = static_cast<double>(x.size());
  double abs_err = 0.0, spread = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    abs_err += std::abs(x[i] - observation);
    // sum_{i,j} |x_i - x_j| = 2 sum_i (2i - B - 1) x_(i), 1-based i
    spread += (2.0 * (static_cast<double>(i) + 1.0) - b - 1.0) * x[i];
  }
  return std::max(0.0, abs_err / b - spread / (b * b));
}

MetricsReport summarize(std::span<const UnitEvaluation> units) {
  if (units.empty()) throw DomainError("summarize: no units");
  std::vector<double> est, ref;
  std::vector<Interval> m80, m90, r80, r90;
  bool have_samples = true;
  double crps_total = 0.0;
  MetricsReport r;
  for (const auto& u : units) {
    est.push_back(u.estimate);
    ref.push_back(u.reference);
    m80.push_back(u.model80);
    m90.push_back(u.model90);
    r80.push_back(u.reference80);
    r90.push_back(u.reference90);
    r.length80 += u.model80.length();
    r.length90 += u.model90.length();
    if (u.samples.empty()) have_samples = false;
    else crps_total += crps_empirical(u.samples, u.reference);
  }
  const auto err = error_metrics(est, ref);
  r.mae = err.mae;
  r.rmse = err.rmse;
  r.mbe = err.mbe;
  auto corr = rank_corr(est, ref);
  r.pearson = corr.pearson;
  r.spearman = corr.spearman;
  r.ccc = ccc(est, ref);
  r.coverage80 = coverage(m80, r80);
  r.coverage90 = coverage(m90, r90);
  r.n_units = units.size();
  r.length80 /= r.n_units;
  r.length90 /= r.n_units;
  if (have_samples) r.crps = crps_total / r.n_units;
  return r;
}

nlohmann::json MetricsReport::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"mae", mae},
          {"rmse", rmse},
          {"mbe", mbe},
          {"pearson", opt(pearson)},
          {"spearman", opt(spearman)},
          {"ccc", opt(ccc)},
          {"coverage80", coverage80},
          {"coverage90", coverage90},
          {"length80", length80},
          {"length90", length90},
          {"crps", opt(crps)},
          {"n_units", n_units}};
}

std::string MetricsReport::csv_header() {
  return "pearson,spearman,ccc,rmse,mae,mbe,coverage80,length80,coverage90,length90,crps,n_units";
}

std::string MetricsReport::csv_fields() const {
  auto opt = [](const std::optional<double>& v) { return v ? csv::format(*v) : std::string("NA"); };
  return csv::join({opt(pearson), opt(spearman), opt(ccc), csv::format(rmse), csv::format(mae), csv::format(mbe),
                    csv::format(coverage80), csv::format(length80), csv::format(coverage90), csv::format(length90),
                    opt(crps), csv::format(n_units)});
}

}  // namespace jmrp
