#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "nvsim/dynamics.hpp"

namespace nvsim {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kReadoutMaxStep = 0.1;  // ns
constexpr double kTimeEps = 1e-12;

std::size_t bin_count(const Readout& r) {
  return static_cast<std::size_t>(std::llround(r.window_ns / r.bin_ns));
}

bool is_excited(int level) { return level >= kE0 && level <= kEMinus; }
bool is_ground(int level) { return level >= kG0 && level <= kGMinus; }

double pulse_transfer(const MwPulse& pulse, const EsrContext& ctx) {
  const auto& d = pulse.drive;
  const double f0 = transition_frequency(ctx, d.target_manifold, d.target_transition);
  const double detuning = pulse.resonant ? 0.0 : d.frequency - f0;
  double transfer = 0;
  if (pulse.pi) {
    if (detuning == 0) {
      transfer = 1;
    } else {
      if (!(d.rabi_frequency > 0))
        throw InvalidInput("detuned pi pulse requires a positive rabi_frequency");
      const double t_pi_ns = 1e3 / (2.0 * d.rabi_frequency);
      transfer = rabi_transfer(d.rabi_frequency, detuning, t_pi_ns);
    }
  } else {
    transfer = rabi_transfer(d.rabi_frequency, detuning, pulse.duration_ns);
  }
  return pulse.fidelity * transfer;
}

// Histogram bookkeeping shared by both engines.
struct Window {
  bool open = false;
  double start = 0;
  double bin = 0;
  std::size_t bins = 0;

  double end() const { return start + static_cast<double>(bins) * bin; }
  double edge(std::size_t k) const { return start + static_cast<double>(k) * bin; }
  bool contains(double t) const { return open && t >= start && t < end(); }
};

class ExpectedEngine {
 public:
  using State = Eigen::Matrix<double, kNumLevels + 1, 1>;
  using Augmented = Eigen::Matrix<double, kNumLevels + 1, kNumLevels + 1>;

  ExpectedEngine(const RateParams& rp, const LevelPopulations& initial)
      : laser_(augment(rate_matrix(rp, true), rp)), dark_(augment(rate_matrix(rp, false), rp)) {
    x_.setZero();
    x_.head<kNumLevels>() = initial;
  }

  void advance(double dt, bool laser) {
    const Augmented& g = laser ? laser_ : dark_;
    const double end = t_ + dt;
    while (true) {
      record_edges();
      if (t_ >= end) break;
      double stop = end;
      if (window_.open && next_edge_ <= window_.bins) stop = std::min(stop, window_.edge(next_edge_));
      const double max_step =
          window_.contains(t_) ? kReadoutMaxStep : std::numeric_limits<double>::infinity();
      x_ = detail::integrate_linear(g, x_, stop - t_, max_step);
      t_ = stop;
    }
  }

  void excite(double p_exc) {
    for (int m = 0; m < 3; ++m) {
      const double moved = p_exc * x_(kG0 + m);
      x_(kG0 + m) -= moved;
      x_(kE0 + m) += moved;
    }
  }

  void swap(int a, int b, double eta) {
    const double pa = x_(a);
    const double pb = x_(b);
    x_(a) = (1 - eta) * pa + eta * pb;
    x_(b) = eta * pa + (1 - eta) * pb;
  }

  void open_window(const Readout& r) {
    window_ = {true, t_, r.bin_ns, bin_count(r)};
    edge_counter_.assign(window_.bins + 1, 0.0);
    edge_counter_[0] = x_(kNumLevels);
    next_edge_ = 1;
  }

  void finish() {
    if (window_.open && t_ < window_.end()) advance(window_.end() - t_, false);
  }

  std::vector<double> counts() const {
    std::vector<double> c;
    for (std::size_t k = 0; k + 1 < edge_counter_.size(); ++k)
      c.push_back(std::max(0.0, edge_counter_[k + 1] - edge_counter_[k]));
    return c;
  }

  LevelPopulations populations() const {
    LevelPopulations p = x_.head<kNumLevels>();
    for (int i = 0; i < kNumLevels; ++i)
      if (p(i) < 0 && p(i) > -1e-12) p(i) = 0;
    return p;
  }

 private:
  // Extra row integrates the emitted photon number.
  static Augmented augment(const Generator& g, const RateParams& rp) {
    Augmented a = Augmented::Zero();
    a.topLeftCorner<kNumLevels, kNumLevels>() = g;
    a(kNumLevels, kE0) = a(kNumLevels, kEPlus) = a(kNumLevels, kEMinus) = rp.gamma_rad;
    return a;
  }

  void record_edges() {
    while (window_.open && next_edge_ <= window_.bins && window_.edge(next_edge_) <= t_ + kTimeEps)
      edge_counter_[next_edge_++] = x_(kNumLevels);
  }

  Augmented laser_, dark_;
  State x_;
  double t_ = 0;
  Window window_;
  std::vector<double> edge_counter_;
  std::size_t next_edge_ = 0;
};

// Kinetic Monte Carlo (Gillespie) over one shot at a time; every e -> g jump
// is radiative and emits a photon.
class MonteCarloEngine {
 public:
  MonteCarloEngine(const RateParams& rp, std::uint64_t seed)
      : laser_(rate_matrix(rp, true)), dark_(rate_matrix(rp, false)), rng_(seed) {}

  void start_shot(const LevelPopulations& initial) {
    t_ = 0;
    window_ = {};
    std::discrete_distribution<int> pick(initial.data(), initial.data() + kNumLevels);
    level_ = pick(rng_);
  }

  void advance(double dt, bool laser) {
    const Generator& g = laser ? laser_ : dark_;
    const double end = t_ + dt;
    while (true) {
      const double out_rate = -g(level_, level_);
      if (!(out_rate > 0)) break;
      const double wait = std::exponential_distribution<double>(out_rate)(rng_);
      if (t_ + wait >= end) break;
      t_ += wait;
      double u = uniform_(rng_) * out_rate;
      int next = level_;
      for (int j = 0; j < kNumLevels; ++j) {
        if (j == level_) continue;
        next = j;
        u -= g(j, level_);
        if (u < 0) break;
      }
      if (is_excited(level_) && is_ground(next) && window_.contains(t_)) {
        const auto k = static_cast<std::size_t>((t_ - window_.start) / window_.bin);
        if (k < counts_.size()) counts_[k] += 1;
      }
      level_ = next;
    }
    t_ = end;
  }

  void excite(double p_exc) {
    if (is_ground(level_) && uniform_(rng_) < p_exc) level_ += kE0 - kG0;
  }

  void swap(int a, int b, double eta) {
    if (level_ != a && level_ != b) return;
    if (uniform_(rng_) < eta) level_ = level_ == a ? b : a;
  }

  void open_window(const Readout& r) {
    window_ = {true, t_, r.bin_ns, bin_count(r)};
    if (counts_.size() != window_.bins) counts_.assign(window_.bins, 0.0);
  }

  void finish() {
    if (window_.open && t_ < window_.end()) advance(window_.end() - t_, false);
    final_counts_(level_) += 1;
  }

  const std::vector<double>& counts() const { return counts_; }
  const LevelPopulations& final_counts() const { return final_counts_; }

 private:
  Generator laser_, dark_;
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  int level_ = kG0;
  double t_ = 0;
  Window window_;
  std::vector<double> counts_;
  LevelPopulations final_counts_ = LevelPopulations::Zero();
};

// Walks the segments once, driving an engine. Returns true if some optical
// excitation happened before the readout opened.
template <typename Engine>
bool play(const PulseSequence& seq, const EsrContext& ctx, Engine& engine) {
  bool excited = false;
  bool excited_before_readout = false;
  for (const auto& segment : seq.segments) {
    std::visit(overloaded{
                   [&](const LaserPulse& s) {
                     engine.advance(s.duration_ns, true);
                     excited = excited || s.duration_ns > 0;
                   },
                   [&](const Wait& s) { engine.advance(s.duration_ns, false); },
                   [&](const MwPulse& s) {
                     const auto [a, b] =
                         drive_levels(s.drive.target_manifold, s.drive.target_transition);
                     engine.advance(0.5 * s.duration_ns, false);
                     engine.swap(a, b, pulse_transfer(s, ctx));
                     engine.advance(0.5 * s.duration_ns, false);
                   },
                   [&](const PsExcitation& s) {
                     engine.excite(s.p_exc);
                     excited = excited || s.p_exc > 0;
                   },
                   [&](const Readout& s) {
                     excited_before_readout = excited;
                     engine.open_window(s);
                   },
               },
               segment);
  }
  engine.finish();
  return excited_before_readout;
}

void require_duration(double value, const char* what) {
  if (!std::isfinite(value) || value < 0)
    throw InvalidInput(std::string(what) + " duration must be finite and >= 0");
}

}  // namespace

void PulseSequence::validate() const {
  int readouts = 0;
  for (const auto& segment : segments) {
    std::visit(overloaded{
                   [](const LaserPulse& s) { require_duration(s.duration_ns, "laser"); },
                   [](const Wait& s) { require_duration(s.duration_ns, "wait"); },
                   [](const MwPulse& s) {
                     require_duration(s.duration_ns, "mw");
                     s.drive.validate();
                     if (!std::isfinite(s.fidelity) || s.fidelity < 0 || s.fidelity > 1)
                       throw InvalidInput("mw fidelity must lie in [0, 1]");
                     if (!s.pi && !(s.duration_ns > 0))
                       throw InvalidInput("mw pulse needs pi=true or a positive duration");
                   },
                   [](const PsExcitation& s) {
                     if (!std::isfinite(s.p_exc) || s.p_exc < 0 || s.p_exc > 1)
                       throw InvalidInput("ps p_exc must lie in [0, 1]");
                   },
                   [&](const Readout& s) {
                     ++readouts;
                     if (!std::isfinite(s.window_ns) || !(s.window_ns > 0) ||
                         !std::isfinite(s.bin_ns) || !(s.bin_ns > 0))
                       throw InvalidInput("readout window and bin must be positive");
                     const double n = s.window_ns / s.bin_ns;
                     if (std::abs(n - std::round(n)) > 1e-9 * n)
                       throw InvalidInput("readout window must be a whole number of bins");
                   },
               },
               segment);
  }
  if (readouts > 1) throw InvalidInput("sequence may contain at most one readout");
}

SequenceResult run_sequence(const PulseSequence& seq, const RateParams& rp,
                            const SpinContext& spins, const RunOptions& options,
                            const LevelPopulations& initial) {
  seq.validate();
  rp.validate();
  if (!initial.allFinite() || (initial.array() < 0).any() || std::abs(initial.sum() - 1) > 1e-9)
    throw InvalidInput("initial populations must be a probability distribution");
  const EsrContext ctx = make_esr_context(spins.ground, spins.excited, spins.field_nv);

  SequenceResult result;
  const bool has_readout = std::any_of(seq.segments.begin(), seq.segments.end(), [](const auto& s) {
    return std::holds_alternative<Readout>(s);
  });

  bool excited_before_readout = true;
  if (!options.monte_carlo) {
    ExpectedEngine engine(rp, initial);
    excited_before_readout = play(seq, ctx, engine);
    result.histogram.counts = engine.counts();
    result.histogram.shots = 1;
    result.final_populations = engine.populations();
  } else {
    if (options.shots == 0) throw InvalidInput("Monte Carlo mode requires shots > 0");
    MonteCarloEngine engine(rp, options.seed);
    for (std::uint64_t shot = 0; shot < options.shots; ++shot) {
      engine.start_shot(initial);
      excited_before_readout = play(seq, ctx, engine);
    }
    result.histogram.counts = engine.counts();
    result.histogram.monte_carlo = true;
    result.histogram.shots = options.shots;
    result.final_populations = engine.final_counts() / static_cast<double>(options.shots);
  }

  if (has_readout) {
    const Readout* r = nullptr;
    for (const auto& s : seq.segments)
      if (const auto* p = std::get_if<Readout>(&s)) r = p;
    const std::size_t n = bin_count(*r);
    result.histogram.bin_edges.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) result.histogram.bin_edges[k] = static_cast<double>(k) * r->bin_ns;
    if (!excited_before_readout) result.warning = "readout before any optical excitation";
  } else {
    result.histogram.counts.clear();
    result.warning = "sequence has no readout; histogram is empty";
  }
  return result;
}

}  // namespace nvsim
