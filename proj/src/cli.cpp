#include "jmrp/cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "jmrp/csv.hpp"
#include "jmrp/data_io.hpp"
#include "jmrp/diagnostics.hpp"
#include "jmrp/draws_io.hpp"
#include "jmrp/errors.hpp"
#include "jmrp/estimators.hpp"
#include "jmrp/indicators.hpp"
#include "jmrp/metrics.hpp"
#include "jmrp/rng.hpp"
#include "jmrp/simulate.hpp"
#include "jmrp/weights.hpp"

namespace jmrp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Labels for per-command seed derivation.
constexpr std::uint64_t kFitStream = 0x666974;
constexpr std::uint64_t kEstimateStream = 0x657374;
constexpr std::uint64_t kImputeStream = 0x696d70;

constexpr double kRhatHardFail = 1.2;

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::string out_dir = ".";
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* cmd, Common& c, bool config_required = false) {
  auto* opt = cmd->add_option("--config", c.config, "JSON configuration file");
  if (config_required) opt->required();
  cmd->add_option("--seed", c.seed, "Global seed");
  cmd->add_option("--threads", c.threads, "Worker threads (0 = one per chain, 1 = sequential)");
  cmd->add_option("--out-dir", c.out_dir, "Output directory");
}

class Session {
 public:
  Session(std::string command, std::vector<std::string> args, const Common& common, std::ostream& out)
      : common_(common), out_(out) {
    manifest_.command = std::move(command);
    manifest_.arguments = std::move(args);
    manifest_.seed = common.seed;
    manifest_.started_at = now_utc();
    std::error_code ec;
    fs::create_directories(common.out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + common.out_dir + "': " + ec.message());
    if (!common.config.empty()) manifest_.config_sha256 = file_sha256(common.config);
  }

  std::ostream& out() { return out_; }

  const std::string& input(const std::string& path) {
    manifest_.inputs[path] = file_sha256(path);
    return path;
  }

  std::string path(const std::string& name) const { return (fs::path(common_.out_dir) / name).string(); }

  std::string write(const std::string& name, const std::string& contents) {
    const auto p = path(name);
    csv::write_file(p, contents);
    manifest_.outputs[p] = sha256_hex(contents);
    return p;
  }

  std::string write(const std::string& name, const json& doc) { return write(name, doc.dump(2) + "\n"); }

  // Registers a file produced by library code.
  void produced(const std::string& p) { manifest_.outputs[p] = file_sha256(p); }

  void set_seed(std::uint64_t seed) { manifest_.seed = seed; }

  void finish() {
    manifest_.finished_at = now_utc();
    csv::write_file(path(manifest_.command + ".manifest.json"), manifest_.to_json().dump(2) + "\n");
  }

 private:
  const Common& common_;
  std::ostream& out_;
  RunManifest manifest_;
};

template <typename T>
void take(const json& doc, const char* key, T& target) {
  if (!doc.contains(key)) return;
  try {
    target = doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("sampler config key '") + key + "': " + e.what());
  }
}

SamplerConfig sampler_from_json(const json& doc, SamplerConfig cfg) {
  if (!doc.is_object()) throw SchemaError("sampler config must be a JSON object");
  static const std::set<std::string> known = {"chains", "iterations", "warmup", "target_accept",
                                              "max_treedepth", "seed", "init_scale", "threads"};
  for (const auto& [key, _] : doc.items()) {
    if (!known.count(key)) throw SchemaError("unknown sampler config key '" + key + "'");
  }
  take(doc, "chains", cfg.chains);
  take(doc, "iterations", cfg.iterations);
  take(doc, "warmup", cfg.warmup);
  take(doc, "target_accept", cfg.target_accept);
  take(doc, "max_treedepth", cfg.max_treedepth);
  take(doc, "seed", cfg.seed);
  take(doc, "init_scale", cfg.init_scale);
  take(doc, "threads", cfg.threads);
  return cfg;
}

json to_json(const SamplerConfig& c) {
  return {{"chains", c.chains},         {"iterations", c.iterations},       {"warmup", c.warmup},
          {"target_accept", c.target_accept}, {"max_treedepth", c.max_treedepth}, {"seed", c.seed},
          {"init_scale", c.init_scale}, {"threads", c.threads}};
}

// A model config is either a bare ModelSpec or {"model": ..., "sampler": ...}.
struct ModelConfig {
  ModelSpec spec;
  SamplerConfig sampler;
};

ModelConfig read_model_config(const std::string& path) {
  const auto doc = read_json(path);
  ModelConfig mc;
  if (doc.is_object() && doc.contains("model")) {
    for (const auto& [key, _] : doc.items()) {
      if (key != "model" && key != "sampler") throw SchemaError("unknown config key '" + key + "'");
    }
    mc.spec = model_spec_from_json(doc.at("model"));
    if (doc.contains("sampler")) mc.sampler = sampler_from_json(doc.at("sampler"), mc.sampler);
  } else {
    mc.spec = model_spec_from_json(doc);
  }
  return mc;
}

std::string draws_sidecar_path(const std::string& csv_path) {
  fs::path p(csv_path);
  p.replace_extension(".json");
  return p.string();
}

std::size_t infer_districts(const std::string& table_path) {
  const auto t = csv::read(table_path);
  const auto col = t.require("district");
  std::size_t S = 0;
  for (const auto& row : t.rows) {
    const auto d = csv::parse_int(row[col], table_path);
    if (d < 0) throw SchemaError(table_path + ": negative district");
    S = std::max(S, static_cast<std::size_t>(d) + 1);
  }
  return S;
}

// ---- simulate

int cmd_simulate(Session& session, const Common& common) {
  SimConfig conf;
  if (!common.config.empty()) conf = sim_config_from_json(read_json(session.input(common.config)));
  if (common.seed_opt->count()) conf.seed = common.seed;
  conf.validate();
  session.set_seed(conf.seed);
  const auto sim = generate(conf);
  session.write("data.csv", records_to_csv(sim.data.records, sim.data.spec));
  std::ostringstream edges;
  edges << "from,to\n";
  for (const auto& [a, b] : sim.data.graph.edges()) edges << a << ',' << b << '\n';
  session.write("graph.csv", edges.str());
  session.write("table.csv", table_to_csv(sim.truth.table));
  session.write("truth.csv", truth_to_csv(sim.truth, conf.S));
  session.write("model.json", to_json(sim.data.spec));
  session.write("simulation.json", to_json(conf));
  if (conf.holdout_month) session.write("holdout.csv", records_to_csv(sim.holdout, sim.data.spec));
  session.out() << "simulate: " << sim.data.records.size() << " records, " << sim.holdout.size()
                << " held out, S=" << conf.S << " T=" << conf.T << "\n";
  return kOk;
}

// ---- fit

struct FitOptions {
  std::string data, graph, sampler;
  std::string records = "all";
  std::optional<std::size_t> chains, iterations, warmup;
};

int cmd_fit(Session& session, const Common& common, const FitOptions& opt) {
  auto mc = read_model_config(session.input(common.config));
  if (!opt.sampler.empty()) mc.sampler = sampler_from_json(read_json(session.input(opt.sampler)), mc.sampler);
  if (opt.chains) mc.sampler.chains = *opt.chains;
  if (opt.iterations) mc.sampler.iterations = *opt.iterations;
  if (opt.warmup) mc.sampler.warmup = *opt.warmup;
  if (common.seed_opt->count()) mc.sampler.seed = rng::derive(common.seed, {kFitStream});
  mc.sampler.threads = common.threads;
  mc.sampler.validate();
  session.set_seed(mc.sampler.seed);

  auto data = load_dataset(session.input(opt.data), session.input(opt.graph), mc.spec);
  if (opt.records != "all") {
    const auto keep = parse_modality(opt.records);
    std::erase_if(data.records, [&](const SurveyRecord& r) { return r.modality != keep; });
  }
  if (data.records.empty()) throw SchemaError("fit: no records to fit");

  const auto draws = sample(data, mc.sampler);
  const auto csv_path = session.path("draws.csv");
  const auto json_path = session.path("draws.json");
  write_draws(csv_path, json_path, draws);
  session.produced(csv_path);
  session.produced(json_path);

  const auto report = diagnostics(draws);
  json diag = report.to_json();
  diag["sampler"] = to_json(mc.sampler);
  diag["sampler"].erase("threads");  // run setting, kept in the manifest arguments
  diag["records"] = data.records.size();
  session.write("diagnostics.json", diag);

  session.out() << "fit: " << draws.chains << " chains x " << draws.draws_per_chain << " draws, "
                << data.records.size() << " records";
  if (report.rhat_available) session.out() << ", max R-hat " << report.max_rhat;
  session.out() << ", divergences " << report.divergences << "\n";
  for (const auto& w : report.warnings) session.out() << "warning: " << w << "\n";
  if (report.rhat_available && report.max_rhat >= kRhatHardFail) {
    throw ConvergenceError("fit: max split R-hat " + csv::format(report.max_rhat) + " >= 1.2", report.max_rhat);
  }
  return kOk;
}

// ---- rake

struct RakeOptions {
  std::string table, targets;
  double tol = 1e-8;
  std::size_t max_iter = 1000;
  std::optional<std::size_t> districts;
};

int cmd_rake(Session& session, const RakeOptions& opt) {
  const std::size_t S = opt.districts ? *opt.districts : infer_districts(session.input(opt.table));
  const auto prior = read_table(session.input(opt.table), S);
  const auto targets = targets_from_json(read_json(session.input(opt.targets)));
  RakeStats stats;
  const auto raked = rake(prior, targets, opt.tol, opt.max_iter, &stats);
  session.write("raked.csv", table_to_csv(raked));
  session.write("rake.json", json{{"cycles", stats.cycles}, {"residual", stats.residual}, {"tol", opt.tol}});
  session.out() << "rake: converged in " << stats.cycles << " cycles, residual " << csv::format(stats.residual)
                << "\n";
  return kOk;
}

// ---- estimate

struct EstimateOptions {
  std::string draws, mobile_draws, table, data, modality = "F2F", draw_mode = "bernoulli";
  std::vector<std::string> estimators;
  bool write_draws = false;
};

int cmd_estimate(Session& session, const Common& common, const EstimateOptions& opt) {
  const auto draws = read_draws(session.input(opt.draws), session.input(draws_sidecar_path(opt.draws)));
  if (!draws.layout) throw SchemaError("estimate: draws do not come from a model fit");
  std::optional<PosteriorDraws> mobile;
  if (!opt.mobile_draws.empty()) {
    mobile = read_draws(session.input(opt.mobile_draws), session.input(draws_sidecar_path(opt.mobile_draws)));
    if (!mobile->layout) throw SchemaError("estimate: mobile draws do not come from a model fit");
  }
  const auto& spec = draws.layout->spec();
  const auto modality = parse_modality(opt.modality);
  const auto mode = parse_draw_mode(opt.draw_mode);

  std::vector<EstimatorTag> tags;
  if (opt.estimators.empty()) {
    for (auto tag : all_estimators()) {
      if ((tag == EstimatorTag::MR || tag == EstimatorTag::MRP) && !mobile) continue;
      tags.push_back(tag);
    }
  } else {
    for (const auto& name : opt.estimators) tags.push_back(parse_estimator(name));
  }
  auto needs = [&](std::initializer_list<EstimatorTag> group) {
    return std::any_of(tags.begin(), tags.end(),
                       [&](EstimatorTag t) { return std::find(group.begin(), group.end(), t) != group.end(); });
  };
  if (needs({EstimatorTag::MR, EstimatorTag::MRP}) && !mobile) {
    throw SchemaError("estimate: mr and mrp need --mobile-draws from a mobile-only fit");
  }
  if (mobile && (mobile->layout->spec().S != spec.S || mobile->layout->spec().T != spec.T)) {
    throw SchemaError("estimate: mobile draws cover a different district/month grid");
  }
  std::vector<SurveyRecord> records;
  if (needs({EstimatorTag::ZimvacDirect, EstimatorTag::MvamDirect, EstimatorTag::MR, EstimatorTag::JmrMP,
             EstimatorTag::JmrF2F})) {
    if (opt.data.empty()) throw SchemaError("estimate: the requested estimators need --data");
    records = read_records(session.input(opt.data), spec);
  }
  std::optional<PostStratTable> table;
  if (needs({EstimatorTag::MRP, EstimatorTag::Jmrp})) {
    if (opt.table.empty()) throw SchemaError("estimate: mrp and jmrp need --table");
    table = read_table(session.input(opt.table), spec.S, model_variables(spec));
  }

  const auto f2f = group_records(records, spec.S, spec.T, Modality::F2F);
  const auto mp = group_records(records, spec.S, spec.T, Modality::MP);
  const std::uint64_t seed = common.seed;

  EstimateSeries series;
  for (std::size_t k = 0; k < tags.size(); ++k) {
    const auto tag = tags[k];
    const std::uint64_t tag_seed = rng::derive(seed, {kEstimateStream, static_cast<std::uint64_t>(tag)});
    for (std::size_t s = 0; s < spec.S; ++s) {
      for (std::size_t t = 0; t < spec.T; ++t) {
        const auto& f = f2f[s * spec.T + t];
        const auto& m = mp[s * spec.T + t];
        EstimateEntry e;
        switch (tag) {
          case EstimatorTag::ZimvacDirect: e = direct_proportion(f); break;
          case EstimatorTag::MvamDirect: e = direct_weighted(m); break;
          case EstimatorTag::MR: e = mr_aggregate(*mobile, m, ModalityOverride::None, mode, tag_seed); break;
          case EstimatorTag::MRP: e = jmrp_estimate(*mobile, *table, s, t, Modality::MP, mode, tag_seed); break;
          case EstimatorTag::JmrMP: e = mr_aggregate(draws, m, ModalityOverride::MP, mode, tag_seed); break;
          case EstimatorTag::JmrF2F: e = mr_aggregate(draws, m, ModalityOverride::F2F, mode, tag_seed); break;
          case EstimatorTag::Jmrp: e = jmrp_estimate(draws, *table, s, t, modality, mode, tag_seed); break;
        }
        e.tag = tag;
        e.district = s;
        e.month = t;
        series.entries.push_back(std::move(e));
      }
    }
  }
  session.write("estimates.csv", series.to_csv());
  if (opt.write_draws) session.write("estimate_draws.csv", series.draws_to_csv());
  session.out() << "estimate: " << tags.size() << " estimators x " << spec.S * spec.T << " district-months ("
                << to_string(mode) << " mode)\n";
  return kOk;
}

// ---- evaluate

struct EvaluateOptions {
  std::string estimates, reference, estimate_draws, reference_estimator = "zimvac_direct";
  std::vector<std::string> estimators;
  std::vector<std::size_t> months;
};

struct ReferenceUnit {
  bool has_data = false;
  double value = 0.0;
  Interval r80, r90;
};

using UnitKey = std::pair<std::size_t, std::size_t>;

std::map<UnitKey, ReferenceUnit> read_reference(const std::string& path, const std::string& ref_tag) {
  const auto t = csv::read(path);
  std::map<UnitKey, ReferenceUnit> ref;
  if (t.find("p_true")) {
    const auto cs = t.require("district"), ct = t.require("month"), cp = t.require("p_true");
    for (const auto& row : t.rows) {
      const UnitKey key{csv::parse_int(row[cs], path), csv::parse_int(row[ct], path)};
      const double p = csv::parse_double(row[cp], path);
      ref[key] = {!std::isnan(p), p, {p, p}, {p, p}};
    }
    return ref;
  }
  const auto tag = parse_estimator(ref_tag);
  for (const auto& e : read_estimates(path).entries) {
    if (e.tag != tag) continue;
    ref[{e.district, e.month}] = {e.has_data, e.mean, e.interval80(), e.interval90()};
  }
  if (ref.empty()) throw SchemaError(path + ": no rows for reference estimator '" + ref_tag + "'");
  return ref;
}

std::string describe(const std::set<std::size_t>& v) {
  std::string s = "{";
  for (auto x : v) s += (s.size() > 1 ? "," : "") + std::to_string(x);
  return s + "}";
}

int cmd_evaluate(Session& session, const EvaluateOptions& opt) {
  const auto est = read_estimates(session.input(opt.estimates));
  const auto ref = read_reference(session.input(opt.reference), opt.reference_estimator);
  std::map<std::tuple<EstimatorTag, std::size_t, std::size_t>, std::vector<double>> samples;
  if (!opt.estimate_draws.empty()) {
    const auto t = csv::read(session.input(opt.estimate_draws));
    const auto ce = t.require("estimator"), cs = t.require("district"), ct = t.require("month"),
               cv = t.require("value");
    for (const auto& row : t.rows) {
      samples[{parse_estimator(row[ce]), static_cast<std::size_t>(csv::parse_int(row[cs], opt.estimate_draws)),
               static_cast<std::size_t>(csv::parse_int(row[ct], opt.estimate_draws))}]
          .push_back(csv::parse_double(row[cv], opt.estimate_draws));
    }
  }
  const std::set<std::size_t> months(opt.months.begin(), opt.months.end());
  auto in_months = [&](std::size_t t) { return months.empty() || months.count(t) > 0; };

  std::vector<EstimatorTag> tags;
  if (opt.estimators.empty()) {
    for (const auto& e : est.entries) {
      if (std::find(tags.begin(), tags.end(), e.tag) == tags.end()) tags.push_back(e.tag);
    }
  } else {
    for (const auto& name : opt.estimators) tags.push_back(parse_estimator(name));
  }

  std::set<std::size_t> ref_districts;
  for (const auto& [key, _] : ref) {
    if (in_months(key.second)) ref_districts.insert(key.first);
  }

  std::ostringstream metrics_csv, units_csv;
  metrics_csv << "estimator," << MetricsReport::csv_header() << "\n";
  units_csv << "estimator,district,month,estimate,reference\n";
  json metrics_json = json::object();
  for (auto tag : tags) {
    std::set<std::size_t> est_districts;
    std::vector<UnitEvaluation> units;
    std::vector<UnitKey> keys;
    bool all_samples = !samples.empty();
    for (const auto& e : est.entries) {
      if (e.tag != tag || !in_months(e.month)) continue;
      est_districts.insert(e.district);
      const auto it = ref.find({e.district, e.month});
      if (!e.has_data || it == ref.end() || !it->second.has_data) continue;
      UnitEvaluation u;
      u.estimate = e.mean;
      u.reference = it->second.value;
      u.model80 = e.interval80();
      u.model90 = e.interval90();
      u.reference80 = it->second.r80;
      u.reference90 = it->second.r90;
      const auto sit = samples.find({tag, e.district, e.month});
      if (sit != samples.end()) u.samples = sit->second;
      else all_samples = false;
      units.push_back(std::move(u));
      keys.push_back({e.district, e.month});
    }
    if (est_districts.empty()) throw SchemaError("evaluate: no rows for estimator '" + to_string(tag) + "'");
    if (est_districts != ref_districts) {
      std::set<std::size_t> only_est, only_ref;
      std::set_difference(est_districts.begin(), est_districts.end(), ref_districts.begin(), ref_districts.end(),
                          std::inserter(only_est, only_est.end()));
      std::set_difference(ref_districts.begin(), ref_districts.end(), est_districts.begin(), est_districts.end(),
                          std::inserter(only_ref, only_ref.end()));
      throw SchemaError("evaluate: district sets differ for '" + to_string(tag) + "': only in estimates " +
                        describe(only_est) + ", only in reference " + describe(only_ref));
    }
    if (units.empty()) {
      session.out() << "evaluate: " << to_string(tag) << " has no units with data in both files\n";
      continue;
    }
    if (!all_samples) {
      for (auto& u : units) u.samples.clear();
    }
    const auto report = summarize(units);
    metrics_csv << to_string(tag) << "," << report.csv_fields() << "\n";
    metrics_json[to_string(tag)] = report.to_json();
    for (std::size_t i = 0; i < units.size(); ++i) {
      units_csv << to_string(tag) << ',' << keys[i].first << ',' << keys[i].second << ','
                << csv::format(units[i].estimate) << ',' << csv::format(units[i].reference) << '\n';
    }
    session.out() << "evaluate: " << to_string(tag) << " n=" << report.n_units << " MAE=" << csv::format(report.mae)
                  << " MBE=" << csv::format(report.mbe) << "\n";
  }
  session.write("metrics.csv", metrics_csv.str());
  session.write("metrics.json", metrics_json);
  session.write("evaluation_units.csv", units_csv.str());
  return kOk;
}

// ---- fcs

struct FcsOptions {
  std::string input, thresholds = "zimbabwe";
};

int cmd_fcs(Session& session, const FcsOptions& opt) {
  const auto th = FcsThresholds::preset(opt.thresholds);
  const auto t = csv::read(session.input(opt.input));
  std::array<std::size_t, 8> cols{};
  for (std::size_t g = 0; g < kFoodGroups.size(); ++g) cols[g] = t.require(kFoodGroups[g]);
  const auto id = t.find("id");
  std::ostringstream out;
  out << (id ? "id," : "") << "fcs,class\n";
  std::array<std::size_t, 3> counts{};
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    FoodFrequencies f;
    for (std::size_t g = 0; g < 8; ++g) {
      const auto v = csv::parse_int(t.rows[i][cols[g]], opt.input);
      if (v < 0 || v > 7) {
        throw DomainError(opt.input + ": row " + std::to_string(i + 1) + ": " + kFoodGroups[g] +
                          " frequency must lie in 0-7, got " + std::to_string(v));
      }
      f.days[g] = static_cast<int>(v);
    }
    const double score = fcs(f);
    const auto c = classify(score, th);
    ++counts[static_cast<std::size_t>(c)];
    if (id) out << t.rows[i][*id] << ',';
    out << csv::format(score) << ',' << to_string(c) << '\n';
  }
  session.write("fcs.csv", out.str());
  session.out() << "fcs: " << t.rows.size() << " households; poor " << counts[0] << ", borderline " << counts[1]
                << ", acceptable " << counts[2] << "\n";
  return kOk;
}

// ---- impute-phone

struct ImputeOptions {
  std::string data, reference;
};

int cmd_impute(Session& session, const Common& common, const ImputeOptions& opt) {
  auto mc = read_model_config(session.input(common.config));
  if (common.seed_opt->count()) mc.sampler.seed = rng::derive(common.seed, {kImputeStream});
  mc.sampler.threads = common.threads;
  mc.sampler.validate();
  session.set_seed(mc.sampler.seed);
  const auto records = read_records(session.input(opt.data), mc.spec);
  const auto rows = read_ownership_rows(session.input(opt.reference), mc.spec);
  const auto model = fit_phone_ownership(mc.spec, rows, mc.sampler);
  const auto imputed = impute_phone_prob(records, model);
  session.write("data_imputed.csv", records_to_csv(imputed, mc.spec));
  session.out() << "impute-phone: fitted on " << rows.size() << " reference households, imputed "
                << std::count_if(imputed.begin(), imputed.end(),
                                 [](const SurveyRecord& r) { return r.modality == Modality::MP; })
                << " phone records\n";
  return kOk;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::ostringstream s;
  for (unsigned int i = 0; i < len; ++i) s << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return s.str();
}

std::string file_sha256(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

json RunManifest::to_json() const {
  json doc = {{"command", command},
              {"arguments", arguments},
              {"seed", seed},
              {"versions", {{"jmrp", kVersion}}},
              {"inputs", inputs},
              {"outputs", outputs},
              {"started_at", started_at},
              {"finished_at", finished_at}};
  doc["config_sha256"] = config_sha256.empty() ? json(nullptr) : json(config_sha256);
  return doc;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint multilevel regression and poststratification for two-modality surveys", "jmrp"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common common;
  FitOptions fit;
  RakeOptions rake_opt;
  EstimateOptions est;
  EvaluateOptions eval;
  FcsOptions fcs_opt;
  ImputeOptions impute;

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic two-modality survey with known truth");
  add_common(simulate, common);

  auto* fit_cmd = app.add_subcommand("fit", "Fit the joint model with NUTS");
  add_common(fit_cmd, common, true);
  fit_cmd->add_option("--data", fit.data, "Survey records CSV")->required();
  fit_cmd->add_option("--graph", fit.graph, "District adjacency edge list")->required();
  fit_cmd->add_option("--sampler", fit.sampler, "Sampler JSON (overrides the config's sampler block)");
  fit_cmd->add_option("--records", fit.records, "Fit only MP or F2F records")
      ->check(CLI::IsMember({"all", "MP", "F2F"}));
  fit_cmd->add_option("--chains", fit.chains);
  fit_cmd->add_option("--iterations", fit.iterations, "Iterations per chain including warmup");
  fit_cmd->add_option("--warmup", fit.warmup);

  auto* rake_cmd = app.add_subcommand("rake", "Rake a poststratification table to margin targets");
  add_common(rake_cmd, common);
  rake_cmd->add_option("--table", rake_opt.table, "Prior table CSV")->required();
  rake_cmd->add_option("--targets", rake_opt.targets, "Margin targets JSON")->required();
  rake_cmd->add_option("--tol", rake_opt.tol, "Max absolute margin residual");
  rake_cmd->add_option("--max-iter", rake_opt.max_iter, "Max raking cycles");
  rake_cmd->add_option("--districts", rake_opt.districts, "Number of districts (default: inferred)");

  auto* est_cmd = app.add_subcommand("estimate", "Direct and model-based district x month estimates");
  add_common(est_cmd, common);
  est_cmd->add_option("--draws", est.draws, "Joint-model draws CSV (sidecar JSON alongside)")->required();
  est_cmd->add_option("--mobile-draws", est.mobile_draws, "Draws of a mobile-only fit, for mr and mrp");
  est_cmd->add_option("--table", est.table, "Poststratification table CSV");
  est_cmd->add_option("--data", est.data, "Survey records CSV");
  est_cmd->add_option("--estimators", est.estimators, "Estimator tags")->delimiter(',');
  est_cmd->add_option("--modality", est.modality, "Modality for jmrp")->check(CLI::IsMember({"MP", "F2F"}));
  est_cmd->add_option("--draw-mode", est.draw_mode, "bernoulli or rate");
  est_cmd->add_flag("--write-draws", est.write_draws, "Also write per-draw estimates");

  auto* eval_cmd = app.add_subcommand("evaluate", "Compare estimates with a reference series");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--estimates", eval.estimates, "Estimates CSV")->required();
  eval_cmd->add_option("--reference", eval.reference, "Truth CSV (p_true) or estimates CSV")->required();
  eval_cmd->add_option("--reference-estimator", eval.reference_estimator, "Reference tag in an estimates CSV");
  eval_cmd->add_option("--estimate-draws", eval.estimate_draws, "Per-draw estimates, enables CRPS");
  eval_cmd->add_option("--estimators", eval.estimators, "Estimator tags to evaluate")->delimiter(',');
  eval_cmd->add_option("--months", eval.months, "Months to evaluate")->delimiter(',');

  auto* fcs_cmd = app.add_subcommand("fcs", "Score and classify food consumption");
  add_common(fcs_cmd, common);
  fcs_cmd->add_option("--input", fcs_opt.input, "Food frequency CSV")->required();
  fcs_cmd->add_option("--thresholds", fcs_opt.thresholds, "standard or zimbabwe");

  auto* impute_cmd = app.add_subcommand("impute-phone", "Impute phone-ownership probabilities of MP records");
  add_common(impute_cmd, common, true);
  impute_cmd->add_option("--data", impute.data, "Survey records CSV")->required();
  impute_cmd->add_option("--reference", impute.reference, "Reference ownership CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    auto* cmd = app.get_subcommands().front();
    common.seed_opt = cmd->get_option("--seed");
    Session session(cmd->get_name(), args, common, out);
    int code = kOk;
    try {
      if (cmd == simulate) code = cmd_simulate(session, common);
      else if (cmd == fit_cmd) code = cmd_fit(session, common, fit);
      else if (cmd == rake_cmd) code = cmd_rake(session, rake_opt);
      else if (cmd == est_cmd) code = cmd_estimate(session, common, est);
      else if (cmd == eval_cmd) code = cmd_evaluate(session, eval);
      else if (cmd == fcs_cmd) code = cmd_fcs(session, fcs_opt);
      else code = cmd_impute(session, common, impute);
    } catch (const ConvergenceError&) {
      session.finish();  // artifacts stay on disk
      throw;
    }
    session.finish();
    return code;
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const InfeasibleError& e) {
    err << "error: " << e.what() << "\n";
    return kInfeasible;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kNotConverged;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kGenericError;
  }
}

}  // namespace jmrp::cli
