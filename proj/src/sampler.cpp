#include "jmrp/sampler.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

#include "jmrp/errors.hpp"
#include "jmrp/rng.hpp"

namespace jmrp {

namespace {

using Eigen::VectorXd;

constexpr double kMaxDeltaH = 1000.0;
constexpr int kInitRetries = 100;

double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct PhasePoint {
  VectorXd q, p, grad;
  double logp = 0.0;
};

// Nesterov dual averaging of log step size.
class StepSizeAdaptation {
 public:
  StepSizeAdaptation(double delta) : delta_(delta) {}
  void set_mu(double mu) { mu_ = mu; }
  void restart() {
    counter_ = 0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
  }
  double learn(double adapt_stat) {
    ++counter_;
    adapt_stat = std::min(adapt_stat, 1.0);
    const double eta = 1.0 / (counter_ + kT0);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - adapt_stat);
    const double x = mu_ - s_bar_ * std::sqrt(static_cast<double>(counter_)) / kGamma;
    const double x_eta = std::pow(static_cast<double>(counter_), -kKappa);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    return std::exp(x);
  }
  double final_step_size() const { return std::exp(x_bar_); }

 private:
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;
  double delta_;
  double mu_ = 0.0;
  double s_bar_ = 0.0;
  double x_bar_ = 0.0;
  std::size_t counter_ = 0;
};

// Expanding-window estimation of the diagonal metric.
class MetricAdaptation {
 public:
  MetricAdaptation(std::size_t warmup, std::size_t dim) : warmup_(warmup), mean_(VectorXd::Zero(dim)),
                                                          m2_(VectorXd::Zero(dim)) {
    init_buffer_ = static_cast<std::size_t>(0.15 * warmup);
    term_buffer_ = static_cast<std::size_t>(0.1 * warmup);
    base_window_ = 25;
    if (warmup < 20) {
      enabled_ = false;
    } else if (init_buffer_ + term_buffer_ + base_window_ > warmup) {
      base_window_ = warmup - init_buffer_ - term_buffer_;
    }
    window_size_ = base_window_;
    next_window_ = init_buffer_ + window_size_ - 1;
  }

  /// Returns true when a window closed and `inv_metric` was updated.
  bool learn(VectorXd& inv_metric, const VectorXd& q) {
    if (!enabled_) {
      ++counter_;
      return false;
    }
    if (in_window()) add(q);
    if (end_of_window()) {
      compute_next_window();
      const double n = static_cast<double>(n_);
      VectorXd var = m2_ / (n - 1.0);
      inv_metric = (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
      n_ = 0;
      mean_.setZero();
      m2_.setZero();
      ++counter_;
      return true;
    }
    ++counter_;
    return false;
  }

 private:
  bool in_window() const {
    return counter_ >= init_buffer_ && counter_ < warmup_ - term_buffer_ && counter_ != warmup_;
  }
  bool end_of_window() const { return counter_ == next_window_ && counter_ != warmup_; }
  void compute_next_window() {
    if (next_window_ == warmup_ - term_buffer_ - 1) return;
    window_size_ *= 2;
    next_window_ = counter_ + window_size_;
    if (next_window_ != warmup_ - term_buffer_ - 1) {
      const std::size_t boundary = next_window_ + 2 * window_size_;
      if (boundary >= warmup_ - term_buffer_) next_window_ = warmup_ - term_buffer_ - 1;
    }
  }
  void add(const VectorXd& q) {
    ++n_;
    VectorXd delta = q - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta.cwiseProduct(q - mean_);
  }

  std::size_t warmup_;
  std::size_t init_buffer_ = 0, term_buffer_ = 0, base_window_ = 0;
  std::size_t window_size_ = 0, next_window_ = 0, counter_ = 0;
  bool enabled_ = true;
  std::size_t n_ = 0;
  VectorXd mean_, m2_;
};

struct ChainResult {
  std::vector<double> values;
  std::vector<std::uint8_t> divergent;
  std::vector<std::uint32_t> treedepth;
  std::vector<std::uint32_t> n_leapfrog;
  std::vector<double> accept_stat;
  ChainAdaptation adaptation;
  std::string error;
};

class NutsChain {
 public:
  NutsChain(const LogDensity& target, const SamplerConfig& config, std::size_t chain)
      : target_(target), config_(config), dim_(target.dimension()),
        rng_(rng::derive(config.seed, {0x6e757473ULL, chain})), inv_metric_(VectorXd::Ones(dim_)) {}

  ChainResult run() {
    ChainResult out;
    initialize();
    StepSizeAdaptation stepsize(config_.target_accept);
    MetricAdaptation metric(config_.warmup, dim_);
    init_stepsize();
    stepsize.set_mu(std::log(10.0 * epsilon_));
    stepsize.restart();

    const std::size_t kept = config_.iterations - config_.warmup;
    out.values.reserve(kept * dim_);
    for (std::size_t it = 0; it < config_.iterations; ++it) {
      const bool adapting = it < config_.warmup;
      auto stats = transition();
      if (adapting) {
        epsilon_ = stepsize.learn(stats.accept_stat);
        if (metric.learn(inv_metric_, z_.q)) {
          init_stepsize();
          stepsize.set_mu(std::log(10.0 * epsilon_));
          stepsize.restart();
        }
        if (it + 1 == config_.warmup) epsilon_ = stepsize.final_step_size();
        continue;
      }
      out.values.insert(out.values.end(), z_.q.data(), z_.q.data() + dim_);
      out.divergent.push_back(stats.divergent ? 1 : 0);
      out.treedepth.push_back(stats.depth);
      out.n_leapfrog.push_back(stats.n_leapfrog);
      out.accept_stat.push_back(stats.accept_stat);
    }
    out.adaptation.step_size = epsilon_;
    out.adaptation.inv_metric.assign(inv_metric_.data(), inv_metric_.data() + dim_);
    return out;
  }

 private:
  struct TransitionStats {
    double accept_stat = 0.0;
    std::uint32_t depth = 0;
    std::uint32_t n_leapfrog = 0;
    bool divergent = false;
  };

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

  void evaluate(PhasePoint& z) const {
    std::vector<double> g(dim_);
    z.logp = target_.log_density_gradient(std::span<const double>(z.q.data(), dim_), g);
    z.grad = Eigen::Map<const VectorXd>(g.data(), dim_);
    if (!z.grad.allFinite()) z.logp = -std::numeric_limits<double>::infinity();
  }

  double hamiltonian(const PhasePoint& z) const {
    if (!std::isfinite(z.logp)) return std::numeric_limits<double>::infinity();
    return -z.logp + 0.5 * z.p.cwiseProduct(inv_metric_).dot(z.p);
  }

  void sample_momentum(PhasePoint& z) {
    std::normal_distribution<double> normal(0.0, 1.0);
    z.p.resize(dim_);
    for (std::size_t i = 0; i < dim_; ++i) z.p[i] = normal(rng_) / std::sqrt(inv_metric_[i]);
  }

  VectorXd p_sharp(const PhasePoint& z) const { return inv_metric_.cwiseProduct(z.p); }

  void leapfrog(PhasePoint& z, double eps) const {
    z.p += 0.5 * eps * z.grad;
    z.q += eps * inv_metric_.cwiseProduct(z.p);
    evaluate(z);
    z.p += 0.5 * eps * z.grad;
  }

  void initialize() {
    std::normal_distribution<double> normal(0.0, config_.init_scale);
    z_.q.resize(dim_);
    for (int attempt = 0; attempt < kInitRetries; ++attempt) {
      for (std::size_t i = 0; i < dim_; ++i) z_.q[i] = normal(rng_);
      evaluate(z_);
      if (std::isfinite(z_.logp)) return;
    }
    throw std::runtime_error("sampler initialization failed: no finite log density after 100 attempts");
  }

  void init_stepsize() {
    const PhasePoint z_init = z_;
    sample_momentum(z_);
    double h0 = hamiltonian(z_);
    leapfrog(z_, epsilon_);
    double h = hamiltonian(z_);
    if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
    const int direction = (h0 - h) > std::log(0.8) ? 1 : -1;
    while (true) {
      z_ = z_init;
      sample_momentum(z_);
      h0 = hamiltonian(z_);
      leapfrog(z_, epsilon_);
      h = hamiltonian(z_);
      if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
      const double delta_h = h0 - h;
      if (direction == 1 && !(delta_h > std::log(0.8))) break;
      if (direction == -1 && !(delta_h < std::log(0.8))) break;
      epsilon_ = direction == 1 ? 2.0 * epsilon_ : 0.5 * epsilon_;
      if (epsilon_ > 1e7) throw std::runtime_error("step size diverged during initialization");
      if (epsilon_ == 0.0) throw std::runtime_error("step size collapsed to zero during initialization");
    }
    z_ = z_init;
  }

  static bool no_u_turn(const VectorXd& p_sharp_minus, const VectorXd& p_sharp_plus, const VectorXd& rho) {
    return p_sharp_plus.dot(rho) > 0.0 && p_sharp_minus.dot(rho) > 0.0;
  }

  // Builds a subtree of 2^depth leapfrog steps from z_, sampling within it
  // uniformly by weight. Returns false on divergence or an internal U-turn.
  bool build_tree(std::size_t depth, PhasePoint& z_propose, VectorXd& p_sharp_beg, VectorXd& p_sharp_end,
                  VectorXd& rho, VectorXd& p_beg, VectorXd& p_end, double h0, double sign,
                  std::uint32_t& n_leapfrog, double& log_sum_weight, double& sum_metro_prob) {
    if (depth == 0) {
      leapfrog(z_, sign * epsilon_);
      ++n_leapfrog;
      double h = hamiltonian(z_);
      if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
      if (h - h0 > kMaxDeltaH) divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
      sum_metro_prob += h0 - h > 0.0 ? 1.0 : std::exp(h0 - h);
      z_propose = z_;
      p_sharp_beg = p_sharp(z_);
      p_sharp_end = p_sharp_beg;
      rho += z_.p;
      p_beg = z_.p;
      p_end = p_beg;
      return !divergent_;
    }

    double log_sum_weight_init = -std::numeric_limits<double>::infinity();
    VectorXd p_init_end(dim_), p_sharp_init_end(dim_), rho_init = VectorXd::Zero(dim_);
    if (!build_tree(depth - 1, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg, p_init_end, h0, sign,
                    n_leapfrog, log_sum_weight_init, sum_metro_prob)) {
      return false;
    }

    PhasePoint z_propose_final = z_;
    double log_sum_weight_final = -std::numeric_limits<double>::infinity();
    VectorXd p_final_beg(dim_), p_sharp_final_beg(dim_), rho_final = VectorXd::Zero(dim_);
    if (!build_tree(depth - 1, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final, p_final_beg, p_end, h0,
                    sign, n_leapfrog, log_sum_weight_final, sum_metro_prob)) {
      return false;
    }

    const double log_sum_weight_subtree = log_sum_exp(log_sum_weight_init, log_sum_weight_final);
    log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);
    if (log_sum_weight_final > log_sum_weight_subtree) {
      z_propose = z_propose_final;
    } else if (uniform() < std::exp(log_sum_weight_final - log_sum_weight_subtree)) {
      z_propose = z_propose_final;
    }

    VectorXd rho_subtree = rho_init + rho_final;
    rho += rho_subtree;
    bool persist = no_u_turn(p_sharp_beg, p_sharp_end, rho_subtree);
    persist = persist && no_u_turn(p_sharp_beg, p_sharp_final_beg, rho_init + p_final_beg);
    persist = persist && no_u_turn(p_sharp_init_end, p_sharp_end, rho_final + p_init_end);
    return persist;
  }

  TransitionStats transition() {
    sample_momentum(z_);
    divergent_ = false;
    PhasePoint z_fwd = z_, z_bck = z_, z_sample = z_, z_propose = z_;

    VectorXd p_fwd_fwd = z_.p, p_fwd_bck = z_.p, p_bck_fwd = z_.p, p_bck_bck = z_.p;
    VectorXd p_sharp_fwd_fwd = p_sharp(z_), p_sharp_fwd_bck = p_sharp_fwd_fwd;
    VectorXd p_sharp_bck_fwd = p_sharp_fwd_fwd, p_sharp_bck_bck = p_sharp_fwd_fwd;
    VectorXd rho = z_.p;

    double log_sum_weight = 0.0;
    const double h0 = hamiltonian(z_);
    std::uint32_t n_leapfrog = 0;
    double sum_metro_prob = 0.0;
    std::size_t depth = 0;

    while (depth < config_.max_treedepth) {
      VectorXd rho_fwd = VectorXd::Zero(dim_), rho_bck = VectorXd::Zero(dim_);
      bool valid_subtree = false;
      double log_sum_weight_subtree = -std::numeric_limits<double>::infinity();

      if (uniform() > 0.5) {
        z_ = z_fwd;
        rho_bck = rho;
        p_bck_fwd = p_fwd_fwd;
        p_sharp_bck_fwd = p_sharp_fwd_fwd;
        valid_subtree = build_tree(depth, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck,
                                   p_fwd_fwd, h0, 1.0, n_leapfrog, log_sum_weight_subtree, sum_metro_prob);
        z_fwd = z_;
      } else {
        z_ = z_bck;
        rho_fwd = rho;
        p_fwd_bck = p_bck_bck;
        p_sharp_fwd_bck = p_sharp_bck_bck;
        valid_subtree = build_tree(depth, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd,
                                   p_bck_bck, h0, -1.0, n_leapfrog, log_sum_weight_subtree, sum_metro_prob);
        z_bck = z_;
      }
      if (!valid_subtree) break;
      ++depth;

      if (log_sum_weight_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (uniform() < std::exp(log_sum_weight_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);

      rho = rho_bck + rho_fwd;
      bool persist = no_u_turn(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      persist = persist && no_u_turn(p_sharp_bck_bck, p_sharp_fwd_bck, rho_bck + p_fwd_bck);
      persist = persist && no_u_turn(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_fwd + p_bck_fwd);
      if (!persist) break;
    }

    z_ = z_sample;
    TransitionStats stats;
    stats.n_leapfrog = n_leapfrog;
    stats.depth = static_cast<std::uint32_t>(depth);
    stats.divergent = divergent_;
    stats.accept_stat = n_leapfrog > 0 ? sum_metro_prob / n_leapfrog : 0.0;
    return stats;
  }

  const LogDensity& target_;
  const SamplerConfig& config_;
  std::size_t dim_;
  std::mt19937_64 rng_;
  VectorXd inv_metric_;
  double epsilon_ = 1.0;
  bool divergent_ = false;
  PhasePoint z_;
};

}  // namespace

void SamplerConfig::validate() const {
  if (chains < 1) throw SchemaError("sampler: chains must be >= 1");
  if (warmup >= iterations) throw SchemaError("sampler: warmup must be smaller than iterations");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw SchemaError("sampler: target_accept must lie in (0,1)");
  if (max_treedepth < 1 || max_treedepth > 30) throw SchemaError("sampler: max_treedepth must lie in [1,30]");
  if (!(init_scale > 0.0)) throw SchemaError("sampler: init_scale must be positive");
}

std::vector<double> PosteriorDraws::column(std::size_t coord) const {
  std::vector<double> col(size());
  for (std::size_t b = 0; b < size(); ++b) col[b] = values[b * dimension() + coord];
  return col;
}

std::size_t PosteriorDraws::divergence_count() const {
  return static_cast<std::size_t>(std::count(divergent.begin(), divergent.end(), std::uint8_t{1}));
}

ParamState PosteriorDraws::param_state(std::size_t b) const {
  if (!layout) throw SchemaError("draws carry no model layout");
  return layout->unpack(draw(b));
}

std::optional<std::size_t> PosteriorDraws::find(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names.begin());
}

PosteriorDraws sample(const LogDensity& target, const SamplerConfig& config) {
  config.validate();
  std::vector<ChainResult> results(config.chains);
  auto run_chain = [&](std::size_t c) {
    try {
      NutsChain chain(target, config, c);
      results[c] = chain.run();
    } catch (const std::exception& e) {
      results[c].error = e.what();
    }
  };
  const std::size_t workers = config.threads == 0 ? config.chains : std::min(config.threads, config.chains);
  if (workers <= 1) {
    for (std::size_t c = 0; c < config.chains; ++c) run_chain(c);
  } else {
    for (std::size_t start = 0; start < config.chains; start += workers) {
      std::vector<std::thread> pool;
      for (std::size_t c = start; c < std::min(start + workers, config.chains); ++c) pool.emplace_back(run_chain, c);
      for (auto& t : pool) t.join();
    }
  }
  for (const auto& r : results) {
    if (!r.error.empty()) throw std::runtime_error(r.error);
  }

  PosteriorDraws draws;
  draws.names = target.coordinate_names();
  draws.chains = config.chains;
  draws.draws_per_chain = config.iterations - config.warmup;
  for (auto& r : results) {
    draws.values.insert(draws.values.end(), r.values.begin(), r.values.end());
    draws.divergent.insert(draws.divergent.end(), r.divergent.begin(), r.divergent.end());
    draws.treedepth.insert(draws.treedepth.end(), r.treedepth.begin(), r.treedepth.end());
    draws.n_leapfrog.insert(draws.n_leapfrog.end(), r.n_leapfrog.begin(), r.n_leapfrog.end());
    draws.accept_stat.insert(draws.accept_stat.end(), r.accept_stat.begin(), r.accept_stat.end());
    draws.adaptation.push_back(std::move(r.adaptation));
  }
  return draws;
}

PosteriorDraws sample(const Dataset& data, const SamplerConfig& config) {
  JointPosterior posterior(data);
  NonCenteredPosterior target(posterior);
  auto draws = sample(static_cast<const LogDensity&>(target), config);
  // stored draws are on the model scale
  const std::size_t d = draws.dimension();
  for (std::size_t b = 0; b < draws.size(); ++b) {
    const auto x = target.to_centered(std::span<const double>(draws.values).subspan(b * d, d));
    std::copy(x.begin(), x.end(), draws.values.begin() + static_cast<std::ptrdiff_t>(b * d));
  }
  draws.layout = posterior.layout();
  return draws;
}

CellPredictor::CellPredictor(const PosteriorDraws& draws) : draws_(&draws) {
  if (!draws.layout) throw SchemaError("draws carry no model layout");
  layout_ = *draws.layout;
  phi_pos_.assign(layout_.spec().S, -1);
  const auto& free = layout_.free_phi();
  for (std::size_t k = 0; k < free.size(); ++k) phi_pos_[free[k]] = static_cast<std::ptrdiff_t>(k);
}

double CellPredictor::eta(std::size_t b, std::span<const double> row, std::size_t district,
                          std::size_t month) const {
  const auto x = draws_->draw(b);
  const auto& spec = layout_.spec();
  double eta = x[0];
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (row[k] != 0.0) eta += row[k] * x[layout_.beta_offset() + k];
  }
  if (phi_pos_[district] >= 0) eta += x[layout_.phi_offset() + phi_pos_[district]];
  eta += x[layout_.zeta_offset() + district];
  eta += x[layout_.nu_offset() + month];
  eta += x[layout_.xi_offset() + month];
  eta += x[layout_.psi_offset() + spec.interaction_index(district, month)];
  return eta;
}

std::vector<double> extract_cell_probability(const PosteriorDraws& draws, std::span<const std::size_t> levels,
                                             double phone_prob, std::size_t district, std::size_t month,
                                             Modality modality) {
  CellPredictor predictor(draws);
  const auto& spec = predictor.spec();
  if (district >= spec.S) throw SchemaError("district " + std::to_string(district) + " out of range");
  if (month >= spec.T) throw SchemaError("month " + std::to_string(month) + " out of range");
  const auto row = build_design_row(levels, phone_prob, modality, spec);
  std::vector<double> out(draws.size());
  for (std::size_t b = 0; b < out.size(); ++b) out[b] = logistic(predictor.eta(b, row, district, month));
  return out;
}

namespace hmc {

double hamiltonian(const LogDensity& target, std::span<const double> q, std::span<const double> p,
                   std::span<const double> inv_metric) {
  std::vector<double> g(q.size());
  double kinetic = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) kinetic += 0.5 * inv_metric[i] * p[i] * p[i];
  return -target.log_density_gradient(q, g) + kinetic;
}

void leapfrog(const LogDensity& target, std::vector<double>& q, std::vector<double>& p,
              std::span<const double> inv_metric, double eps, std::size_t steps) {
  std::vector<double> g(q.size());
  target.log_density_gradient(q, g);
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t i = 0; i < q.size(); ++i) p[i] += 0.5 * eps * g[i];
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += eps * inv_metric[i] * p[i];
    target.log_density_gradient(q, g);
    for (std::size_t i = 0; i < q.size(); ++i) p[i] += 0.5 * eps * g[i];
  }
}

}  // namespace hmc

}  // namespace jmrp
