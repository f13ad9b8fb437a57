// Copyright 2026 The smfmagic Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "smfmagic/binary_io.hpp"
#include "smfmagic/coupled.hpp"
#include "smfmagic/lattice.hpp"
#include "smfmagic/rng.hpp"
#include "smfmagic/stats.hpp"

namespace smfmagic {

enum class Target { base_z, coupled_zm };

std::string_view to_string(Target t);

enum class Sampler { metropolis, wolff, mixed };

std::string_view to_string(Sampler s);
Sampler parse_sampler(std::string_view name);

struct UnsupportedSampler : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct Protocol {
    long equilibration_sweeps = 10000;
    long measurement_sweeps = 100000;
    long bin_size = 1000;
    Sampler sampler = Sampler::mixed;
    /// Cluster updates per sweep for the wolff and mixed samplers.
    int wolff_per_sweep = 1;
    bool parallel_tempering = true;
    int sweeps_per_exchange = 1;
    long recompute_interval = 1000;
    /// Slots with beta below this fraction of the ladder maximum start hot.
    double hot_start_fraction = 0.5;
    std::size_t histogram_bins = 200;
    bool measure_overlap = false;

    long total_sweeps() const { return equilibration_sweeps + measurement_sweeps; }
    long bin_count() const { return bin_size > 0 ? measurement_sweeps / bin_size : 0; }
    void validate() const;
};

/// One Markov chain sampling either Z (one layer, weight e^{-beta E}) or Z_M
/// (2n layers, weight e^{-(beta/2) E_M}).
///
/// Spins are stored site-major: code_i holds the layer bits of site i, so the
/// bond term of every layer and every leave-one-out product is a function of
/// code_i ^ code_j alone.
class MarkovChain {
  public:
    MarkovChain(const LatticeModel& model, Target target, int n, double beta, RngStream rng);

    Target target() const { return target_; }
    int n() const { return n_; }
    int layer_count() const { return layers_; }
    double beta() const { return beta_; }
    /// Inverse temperature multiplying the sampled energy: beta or beta/2.
    double weight_beta() const { return target_ == Target::base_z ? beta_ : 0.5 * beta_; }
    const LatticeModel& model() const { return *model_; }

    /// The sampled energy: E for base_z, E_M for coupled_zm.
    double energy() const;
    /// Recomputes the energy from the spins; returns the removed drift.
    double recompute_energy();

    void set_uniform();
    void randomize();

    void metropolis_sweep();
    /// One Wolff cluster flip; returns the cluster size.
    std::size_t wolff_update();
    /// Replaces one random layer by its image under a random lattice
    /// symmetry, accepted with the Metropolis rule on the new energy. Only
    /// coupled chains of frustrated square or triangular models carry maps.
    void symmetry_update();
    std::size_t symmetry_map_count() const { return symmetry_maps_.size(); }
    /// One sweep as defined by the sampler, followed by a symmetry update.
    void sweep(Sampler sampler, int wolff_per_sweep);

    SpinConfiguration layer(int a) const;
    void set_layer(int a, const SpinConfiguration& config);
    CoupledLayerState to_layer_state() const;
    std::span<const std::uint8_t> codes() const { return codes_; }

    /// Layer-averaged site overlap with a chain of the same shape.
    double overlap(const MarkovChain& other) const;

    /// Exchanges spins and energy bookkeeping with `other`; beta and RNG
    /// streams stay in place.
    void swap_configuration(MarkovChain& other);

    RngStream& rng() { return rng_; }
    std::uint64_t attempted() const { return attempted_; }
    std::uint64_t accepted() const { return accepted_; }
    std::uint64_t cluster_sites() const { return cluster_sites_; }
    std::uint64_t clusters() const { return clusters_; }

    void save(BinaryWriter& w) const;
    void load(BinaryReader& r);

  private:
    enum class Kernel { one_class, two_class, real, complete };

    void build_tables();
    void rebuild_class_sums();
    void metropolis_tabulated1();
    void metropolis_tabulated2();
    void metropolis_real();
    void metropolis_complete();
    long site_field_tally(std::size_t i, int a, int cls) const;

    const LatticeModel* model_;
    Target target_;
    int n_;
    int layers_;
    double beta_;
    RngStream rng_;
    Kernel kernel_;

    std::size_t sites_;
    std::vector<std::uint32_t> offsets_;
    std::vector<std::uint32_t> nbr_site_;
    std::vector<std::uint8_t> nbr_class_;
    std::vector<double> nbr_coef_;
    std::vector<double> strengths_;

    std::vector<int> bond_h_;
    std::vector<std::int8_t> delta_h_;
    std::vector<std::uint64_t> threshold_;
    int range0_ = 0;
    int range1_ = 0;

    std::vector<std::vector<std::uint32_t>> symmetry_maps_;

    std::vector<std::uint8_t> codes_;
    std::vector<long> class_sum_;
    double real_energy_ = 0.0;
    std::vector<long> layer_mag_;
    std::vector<long> product_mag_;

    std::uint64_t attempted_ = 0;
    std::uint64_t accepted_ = 0;
    std::uint64_t cluster_sites_ = 0;
    std::uint64_t clusters_ = 0;
};

/// Binned accumulation of the sampled energy, its square, and the overlap.
class ObservableAccumulator {
  public:
    ObservableAccumulator() = default;
    ObservableAccumulator(long bin_size, double hist_lo, double hist_hi, std::size_t hist_bins);

    void add(double energy, std::optional<double> overlap);
    const std::vector<double>& bin_energy() const { return bin_e_; }
    const std::vector<double>& bin_energy_sq() const { return bin_e2_; }
    const std::vector<double>& bin_overlap() const { return bin_q_; }
    const Histogram& histogram() const { return histogram_; }
    long samples() const { return samples_; }
    double min_energy() const { return min_energy_; }

    void save(BinaryWriter& w) const;
    void load(BinaryReader& r);

  private:
    long bin_size_ = 1;
    long in_bin_ = 0;
    double sum_e_ = 0.0, sum_e2_ = 0.0, sum_q_ = 0.0;
    bool have_q_ = false;
    std::vector<double> bin_e_, bin_e2_, bin_q_;
    Histogram histogram_;
    long samples_ = 0;
    double min_energy_ = 0.0;
};

struct PointSeries {
    double beta = 0.0;
    Target target = Target::base_z;
    /// Sweep-count multiplier relative to the base protocol (bins hold the
    /// same number of bins, each this many times longer).
    int sweep_multiplier = 1;
    std::vector<double> bin_e;
    std::vector<double> bin_e2;
    std::vector<double> bin_q;
    Histogram histogram;
    double acceptance = 0.0;
    /// Exchange acceptance with the next-higher beta slot (NaN for the last).
    double swap_acceptance = 0.0;
    bool nonequilibrated = false;
    long samples = 0;
    double min_energy = 0.0;
    /// Exact infinite-temperature point inserted analytically.
    bool analytic = false;
};

struct ObservableSeries {
    Target target = Target::base_z;
    int n = 2;
    std::size_t sites = 0;
    std::vector<PointSeries> points;

    std::vector<double> betas() const;
    /// Sorted merge of two series on disjoint grids.
    static ObservableSeries merge(const ObservableSeries& a, const ObservableSeries& b);
};

/// Per-ladder hooks: called after every exchange round with the global sweep
/// count; returning false halts the run (checkpoint-and-stop).
using ProgressHook = std::function<bool(long sweeps_done)>;

/// Deterministic static partition of ladder slots over worker threads.
class WorkerPool {
  public:
    explicit WorkerPool(int workers);
    ~WorkerPool();
    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    int workers() const { return workers_; }
    /// Runs fn(k) for k in [0, count); each k is always handled by worker k mod workers.
    void run(std::size_t count, const std::function<void(std::size_t)>& fn);

  private:
    struct Impl;
    int workers_;
    std::unique_ptr<Impl> impl_;
};

/// A temperature ladder of chains with optional replica exchange.
class Ladder {
  public:
    Ladder(const LatticeModel& model, Target target, int n, std::vector<double> betas, Protocol protocol,
           std::uint64_t master_seed, std::uint64_t unit_id, int sweep_multiplier = 1);

    /// Advances to `protocol.total_sweeps()` or until the hook returns false.
    /// Returns true when the run is complete.
    bool run(WorkerPool* pool = nullptr, const ProgressHook& hook = {}, long hook_interval = 1000);

    long sweeps_done() const { return sweeps_done_; }
    bool finished() const { return sweeps_done_ >= protocol_.total_sweeps(); }
    const Protocol& protocol() const { return protocol_; }
    std::size_t size() const { return slots_.size(); }
    std::vector<double> betas() const;
    const MarkovChain& chain(std::size_t k) const { return slots_[k].chain; }
    const LatticeModel& model() const { return *model_; }

    /// Pair acceptance rates of replica exchange, slot k with k+1.
    std::vector<double> swap_acceptance() const;

    ObservableSeries series() const;

    /// Lowest sampled energy over all slots and its configuration (layer 0).
    double best_energy() const { return best_energy_; }
    const SpinConfiguration& best_configuration() const { return best_config_; }

    /// Longer measurement with unchanged equilibration and bin size.
    void extend(const Protocol& longer);

    /// Sets every layer of every slot and of its overlap pair to `config`,
    /// replacing both hot and cold starts. Only valid before the first sweep.
    void seed_slots(const SpinConfiguration& config);

    void save(BinaryWriter& w) const;
    static Ladder load(BinaryReader& r, const LatticeModel& model);

    /// One exchange round (even or odd pairs by round parity).
    void exchange();

  private:
    struct Slot {
        MarkovChain chain;
        ObservableAccumulator acc;
        std::optional<MarkovChain> pair_a;
        std::optional<MarkovChain> pair_b;
    };
    Ladder(const LatticeModel& model) : model_(&model) {}
    void sweep_slot(std::size_t k);
    void measure_slot(std::size_t k);

    const LatticeModel* model_;
    Target target_ = Target::base_z;
    int n_ = 2;
    Protocol protocol_;
    std::uint64_t master_seed_ = 0;
    std::uint64_t unit_id_ = 0;
    int sweep_multiplier_ = 1;
    std::vector<Slot> slots_;
    long sweeps_done_ = 0;
    long rounds_done_ = 0;
    std::vector<std::uint64_t> swap_attempts_;
    std::vector<std::uint64_t> swap_accepts_;
    double best_energy_ = 0.0;
    SpinConfiguration best_config_;
    bool track_best_ = false;
};

/// PT acceptance probability min(1, exp((b_i - b_j)(E_i - E_j))) for weight
/// inverse temperatures b.
double exchange_probability(double weight_beta_i, double energy_i, double weight_beta_j, double energy_j);

/// Single-temperature run without exchanges.
PointSeries run_point(const LatticeModel& model, Target target, int n, double beta, const Protocol& protocol,
                      std::uint64_t seed);

/// Iteratively moves interior betas of a ladder so that neighbouring pairs
/// share the exchange acceptance equally. Endpoints stay fixed.
std::vector<double> tune_ladder(const LatticeModel& model, Target target, int n, std::vector<double> betas,
                                const Protocol& short_protocol, std::uint64_t seed, int iterations = 4);

/// Greedy zero-temperature single-flip descent.
SpinConfiguration quench(const LatticeModel& model, SpinConfiguration config);

/// Energy range used for histograms of the sampled energy.
std::pair<double, double> energy_bounds(const LatticeModel& model, Target target, int n);

}  // namespace smfmagic
