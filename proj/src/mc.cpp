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

#include "smfmagic/mc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <condition_variable>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>

namespace smfmagic {

namespace {

constexpr std::uint64_t kAlways = std::uint64_t{1} << 32;
constexpr double kTwo32 = 4294967296.0;

int bond_sum_for(unsigned x, int layers, bool coupled) {
    if (!coupled) return (x & 1u) ? -1 : 1;
    int total = 0;
    for (int a = 0; a < layers; ++a) {
        total += ((x >> a) & 1u) ? -1 : 1;
        total += (std::popcount(x & ~(1u << a)) % 2) ? -1 : 1;
    }
    return total;
}

std::uint64_t acceptance_threshold(double weight_beta, double delta) {
    if (delta <= 0.0) return kAlways;
    double p = std::exp(-weight_beta * delta);
    return static_cast<std::uint64_t>(p * kTwo32);
}

}  // namespace

std::string_view to_string(Target t) { return t == Target::base_z ? "base_Z" : "coupled_ZM"; }

std::string_view to_string(Sampler s) {
    switch (s) {
        case Sampler::metropolis: return "metropolis";
        case Sampler::wolff: return "wolff";
        case Sampler::mixed: return "mixed";
    }
    return "?";
}

Sampler parse_sampler(std::string_view name) {
    if (name == "metropolis") return Sampler::metropolis;
    if (name == "wolff") return Sampler::wolff;
    if (name == "mixed") return Sampler::mixed;
    throw std::invalid_argument("unknown sampler '" + std::string(name) + "'");
}

void Protocol::validate() const {
    if (equilibration_sweeps < 0 || measurement_sweeps <= 0) {
        throw std::invalid_argument("protocol needs equilibration >= 0 and measurement > 0 sweeps");
    }
    if (bin_size <= 0 || measurement_sweeps % bin_size != 0) {
        throw std::invalid_argument("measurement sweeps must be a positive multiple of the bin size");
    }
    if (bin_count() < 20) {
        throw std::invalid_argument("protocol yields " + std::to_string(bin_count()) +
                                    " bins; at least 20 are required for jackknife errors");
    }
    if (sweeps_per_exchange <= 0 || recompute_interval <= 0 || histogram_bins == 0 || wolff_per_sweep < 0) {
        throw std::invalid_argument("invalid protocol parameter");
    }
}

// ---------------------------------------------------------------------------
// MarkovChain

MarkovChain::MarkovChain(const LatticeModel& model, Target target, int n, double beta, RngStream rng)
    : model_(&model), target_(target), n_(n), beta_(beta), rng_(rng), sites_(model.site_count()) {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be finite and >= 0");
    if (target == Target::coupled_zm) {
        if (n < 2 || n > 4) throw std::invalid_argument("coupled chains support n in [2, 4]");
        layers_ = 2 * n;
    } else {
        layers_ = 1;
    }
    if (model.geometry() == Geometry::complete) {
        kernel_ = Kernel::complete;
    } else if (model.has_uniform_classes() && model.class_strengths().size() == 1) {
        kernel_ = Kernel::one_class;
    } else if (model.has_uniform_classes() && model.class_strengths().size() == 2) {
        kernel_ = Kernel::two_class;
    } else {
        kernel_ = Kernel::real;
    }
    if (model.has_uniform_classes()) {
        auto s = model.class_strengths();
        strengths_.assign(s.begin(), s.end());
    }
    offsets_.resize(sites_ + 1, 0);
    for (std::size_t i = 0; i < sites_; ++i) {
        auto nb = model.neighbors(i);
        offsets_[i + 1] = offsets_[i] + static_cast<std::uint32_t>(nb.size());
        for (const auto& e : nb) {
            nbr_site_.push_back(e.site);
            nbr_class_.push_back(e.bond_class);
            nbr_coef_.push_back(e.coefficient);
        }
    }
    codes_.assign(sites_, 0);
    build_tables();
    rebuild_class_sums();
    const bool frustrated = model.kind() == ModelKind::j1j2 || model.kind() == ModelKind::triangular_afm;
    if (target == Target::coupled_zm && frustrated && model.dimension() == 2) {
        for (int axis = 0; axis < 2; ++axis) {
            auto fwd = model.cyclic_shift(axis);
            std::vector<std::uint32_t> f(sites_), b(sites_);
            for (std::size_t i = 0; i < sites_; ++i) {
                f[i] = static_cast<std::uint32_t>(fwd[i]);
                b[fwd[i]] = static_cast<std::uint32_t>(i);
            }
            symmetry_maps_.push_back(std::move(f));
            symmetry_maps_.push_back(std::move(b));
        }
        if (model.geometry() == Geometry::square) {
            const std::size_t L = static_cast<std::size_t>(model.linear_size());
            std::vector<std::uint32_t> t(sites_);
            for (std::size_t i = 0; i < sites_; ++i) t[i] = static_cast<std::uint32_t>((i % L) * L + i / L);
            symmetry_maps_.push_back(std::move(t));
        }
    }
}

void MarkovChain::build_tables() {
    const unsigned states = 1u << layers_;
    const bool coupled = target_ == Target::coupled_zm;
    bond_h_.resize(states);
    for (unsigned x = 0; x < states; ++x) bond_h_[x] = bond_sum_for(x, layers_, coupled);
    delta_h_.resize(static_cast<std::size_t>(layers_) * states);
    int max_d = 0;
    for (int a = 0; a < layers_; ++a) {
        for (unsigned x = 0; x < states; ++x) {
            int d = bond_h_[x ^ (1u << a)] - bond_h_[x];
            delta_h_[static_cast<std::size_t>(a) * states + x] = static_cast<std::int8_t>(d);
            max_d = std::max(max_d, std::abs(d));
        }
    }
    if (kernel_ != Kernel::one_class && kernel_ != Kernel::two_class) return;
    std::size_t classes = strengths_.size();
    std::vector<int> zmax(classes, 0);
    for (std::size_t i = 0; i < sites_; ++i) {
        std::vector<int> z(classes, 0);
        for (auto k = offsets_[i]; k < offsets_[i + 1]; ++k) ++z[nbr_class_[k]];
        for (std::size_t c = 0; c < classes; ++c) zmax[c] = std::max(zmax[c], z[c]);
    }
    double wb = weight_beta();
    if (kernel_ == Kernel::one_class) {
        range0_ = zmax[0] * max_d;
        threshold_.resize(static_cast<std::size_t>(2 * range0_ + 1));
        for (int t = -range0_; t <= range0_; ++t) {
            threshold_[static_cast<std::size_t>(t + range0_)] = acceptance_threshold(wb, strengths_[0] * t);
        }
    } else {
        range0_ = zmax[0] * max_d;
        range1_ = zmax[1] * max_d;
        const int w1 = 2 * range1_ + 1;
        threshold_.resize(static_cast<std::size_t>((2 * range0_ + 1) * w1));
        for (int t0 = -range0_; t0 <= range0_; ++t0) {
            for (int t1 = -range1_; t1 <= range1_; ++t1) {
                threshold_[static_cast<std::size_t>((t0 + range0_) * w1 + t1 + range1_)] =
                    acceptance_threshold(wb, strengths_[0] * t0 + strengths_[1] * t1);
            }
        }
    }
}

void MarkovChain::rebuild_class_sums() {
    switch (kernel_) {
        case Kernel::one_class:
        case Kernel::two_class: {
            class_sum_.assign(strengths_.size(), 0);
            for (const auto& b : model_->bonds()) class_sum_[b.bond_class] += bond_h_[codes_[b.i] ^ codes_[b.j]];
            break;
        }
        case Kernel::real: {
            double e = 0.0;
            for (const auto& b : model_->bonds()) e += b.coefficient * bond_h_[codes_[b.i] ^ codes_[b.j]];
            real_energy_ = e;
            break;
        }
        case Kernel::complete: {
            const bool coupled = target_ == Target::coupled_zm;
            layer_mag_.assign(layers_, 0);
            product_mag_.assign(coupled ? layers_ : 0, 0);
            for (std::size_t i = 0; i < sites_; ++i) {
                unsigned c = codes_[i];
                for (int a = 0; a < layers_; ++a) {
                    layer_mag_[a] += ((c >> a) & 1u) ? -1 : 1;
                    if (coupled) product_mag_[a] += (std::popcount(c & ~(1u << a)) % 2) ? -1 : 1;
                }
            }
            break;
        }
    }
}

double MarkovChain::energy() const {
    switch (kernel_) {
        case Kernel::one_class:
        case Kernel::two_class: {
            double e = 0.0;
            for (std::size_t k = 0; k < class_sum_.size(); ++k) e += strengths_[k] * static_cast<double>(class_sum_[k]);
            return e;
        }
        case Kernel::real: return real_energy_;
        case Kernel::complete: {
            double s = 0.0;
            for (long m : layer_mag_) s += static_cast<double>(m) * static_cast<double>(m);
            for (long m : product_mag_) s += static_cast<double>(m) * static_cast<double>(m);
            return -s / (2.0 * static_cast<double>(sites_));
        }
    }
    return 0.0;
}

double MarkovChain::recompute_energy() {
    double before = energy();
    rebuild_class_sums();
    return before - energy();
}

void MarkovChain::set_uniform() {
    std::fill(codes_.begin(), codes_.end(), 0);
    rebuild_class_sums();
}

void MarkovChain::randomize() {
    const unsigned mask = (1u << layers_) - 1u;
    for (auto& c : codes_) c = static_cast<std::uint8_t>(rng_.next_u64() & mask);
    rebuild_class_sums();
}

void MarkovChain::metropolis_sweep() {
    switch (kernel_) {
        case Kernel::one_class: metropolis_tabulated1(); break;
        case Kernel::two_class: metropolis_tabulated2(); break;
        case Kernel::real: metropolis_real(); break;
        case Kernel::complete: metropolis_complete(); break;
    }
}

void MarkovChain::metropolis_tabulated1() {
    const std::uint64_t count = static_cast<std::uint64_t>(sites_) * layers_;
    const unsigned shift = static_cast<unsigned>(layers_);
    const std::uint8_t* codes = codes_.data();
    std::uint8_t* mcodes = codes_.data();
    const std::uint32_t* nbr = nbr_site_.data();
    const std::uint32_t* off = offsets_.data();
    const std::int8_t* dtab = delta_h_.data();
    const std::uint64_t* thr = threshold_.data() + range0_;
    long tally_total = 0;
    std::uint64_t acc = 0;
    for (std::uint64_t step = 0; step < count; ++step) {
        std::uint64_t r = rng_.next_u64();
        std::uint64_t idx = ((r >> 32) * count) >> 32;
        std::size_t i = static_cast<std::size_t>(idx / shift);
        unsigned a = static_cast<unsigned>(idx - static_cast<std::uint64_t>(i) * shift);
        const std::int8_t* d = dtab + (static_cast<std::size_t>(a) << shift);
        unsigned ci = codes[i];
        int t = 0;
        for (auto k = off[i]; k < off[i + 1]; ++k) t += d[ci ^ codes[nbr[k]]];
        if ((r & 0xFFFFFFFFull) < thr[t]) {
            mcodes[i] = static_cast<std::uint8_t>(ci ^ (1u << a));
            tally_total += t;
            ++acc;
        }
    }
    class_sum_[0] += tally_total;
    attempted_ += count;
    accepted_ += acc;
}

void MarkovChain::metropolis_tabulated2() {
    const std::uint64_t count = static_cast<std::uint64_t>(sites_) * layers_;
    const unsigned shift = static_cast<unsigned>(layers_);
    const int w1 = 2 * range1_ + 1;
    long sum0 = 0, sum1 = 0;
    std::uint64_t acc = 0;
    for (std::uint64_t step = 0; step < count; ++step) {
        std::uint64_t r = rng_.next_u64();
        std::uint64_t idx = ((r >> 32) * count) >> 32;
        std::size_t i = static_cast<std::size_t>(idx / shift);
        unsigned a = static_cast<unsigned>(idx - static_cast<std::uint64_t>(i) * shift);
        const std::int8_t* d = delta_h_.data() + (static_cast<std::size_t>(a) << shift);
        unsigned ci = codes_[i];
        int t[2] = {0, 0};
        for (auto k = offsets_[i]; k < offsets_[i + 1]; ++k) t[nbr_class_[k]] += d[ci ^ codes_[nbr_site_[k]]];
        if ((r & 0xFFFFFFFFull) < threshold_[static_cast<std::size_t>((t[0] + range0_) * w1 + t[1] + range1_)]) {
            codes_[i] = static_cast<std::uint8_t>(ci ^ (1u << a));
            sum0 += t[0];
            sum1 += t[1];
            ++acc;
        }
    }
    class_sum_[0] += sum0;
    class_sum_[1] += sum1;
    attempted_ += count;
    accepted_ += acc;
}

void MarkovChain::metropolis_real() {
    const std::uint64_t count = static_cast<std::uint64_t>(sites_) * layers_;
    const unsigned shift = static_cast<unsigned>(layers_);
    const double wb = weight_beta();
    std::uint64_t acc = 0;
    for (std::uint64_t step = 0; step < count; ++step) {
        std::uint64_t r = rng_.next_u64();
        std::uint64_t idx = ((r >> 32) * count) >> 32;
        std::size_t i = static_cast<std::size_t>(idx / shift);
        unsigned a = static_cast<unsigned>(idx - static_cast<std::uint64_t>(i) * shift);
        const std::int8_t* d = delta_h_.data() + (static_cast<std::size_t>(a) << shift);
        unsigned ci = codes_[i];
        double delta = 0.0;
        for (auto k = offsets_[i]; k < offsets_[i + 1]; ++k) delta += nbr_coef_[k] * d[ci ^ codes_[nbr_site_[k]]];
        if (delta <= 0.0 || static_cast<double>(r & 0xFFFFFFFFull) < std::exp(-wb * delta) * kTwo32) {
            codes_[i] = static_cast<std::uint8_t>(ci ^ (1u << a));
            real_energy_ += delta;
            ++acc;
        }
    }
    attempted_ += count;
    accepted_ += acc;
}

void MarkovChain::metropolis_complete() {
    const std::uint64_t count = static_cast<std::uint64_t>(sites_) * layers_;
    const unsigned shift = static_cast<unsigned>(layers_);
    const double wb = weight_beta();
    const double inv_n = 1.0 / static_cast<double>(sites_);
    const bool coupled = target_ == Target::coupled_zm;
    std::uint64_t acc = 0;
    for (std::uint64_t step = 0; step < count; ++step) {
        std::uint64_t r = rng_.next_u64();
        std::uint64_t idx = ((r >> 32) * count) >> 32;
        std::size_t i = static_cast<std::size_t>(idx / shift);
        unsigned a = static_cast<unsigned>(idx - static_cast<std::uint64_t>(i) * shift);
        unsigned ci = codes_[i];
        long s = ((ci >> a) & 1u) ? -1 : 1;
        double delta = (2.0 * s * static_cast<double>(layer_mag_[a]) - 2.0) * inv_n;
        if (coupled) {
            for (int c = 0; c < layers_; ++c) {
                if (c == static_cast<int>(a)) continue;
                long p = (std::popcount(ci & ~(1u << c)) % 2) ? -1 : 1;
                delta += (2.0 * p * static_cast<double>(product_mag_[c]) - 2.0) * inv_n;
            }
        }
        if (delta <= 0.0 || static_cast<double>(r & 0xFFFFFFFFull) < std::exp(-wb * delta) * kTwo32) {
            layer_mag_[a] -= 2 * s;
            if (coupled) {
                for (int c = 0; c < layers_; ++c) {
                    if (c == static_cast<int>(a)) continue;
                    long p = (std::popcount(ci & ~(1u << c)) % 2) ? -1 : 1;
                    product_mag_[c] -= 2 * p;
                }
            }
            codes_[i] = static_cast<std::uint8_t>(ci ^ (1u << a));
            ++acc;
        }
    }
    attempted_ += count;
    accepted_ += acc;
}

long MarkovChain::site_field_tally(std::size_t i, int a, int cls) const {
    const std::int8_t* d = delta_h_.data() + (static_cast<std::size_t>(a) << layers_);
    unsigned ci = codes_[i];
    long t = 0;
    for (auto k = offsets_[i]; k < offsets_[i + 1]; ++k) {
        if (nbr_class_[k] == cls) t += d[ci ^ codes_[nbr_site_[k]]];
    }
    return t;
}

std::size_t MarkovChain::wolff_update() {
    if (target_ != Target::base_z || !model_->is_uniform_ferromagnet() || kernel_ != Kernel::one_class) {
        throw UnsupportedSampler("Wolff updates need the base target of a uniform ferromagnet (model " +
                                 std::string(to_string(model_->kind())) + ")");
    }
    const double p_add = -std::expm1(-2.0 * beta_ * std::abs(strengths_[0]));
    std::size_t seed = static_cast<std::size_t>(rng_.below(sites_));
    const std::uint8_t orientation = codes_[seed];
    std::vector<std::uint32_t> stack;
    stack.push_back(static_cast<std::uint32_t>(seed));
    class_sum_[0] += site_field_tally(seed, 0, 0);
    codes_[seed] ^= 1u;
    std::size_t size = 1;
    while (!stack.empty()) {
        std::uint32_t i = stack.back();
        stack.pop_back();
        for (auto k = offsets_[i]; k < offsets_[i + 1]; ++k) {
            std::uint32_t j = nbr_site_[k];
            if (codes_[j] != orientation) continue;
            if (rng_.uniform() < p_add) {
                class_sum_[0] += site_field_tally(j, 0, 0);
                codes_[j] ^= 1u;
                stack.push_back(j);
                ++size;
            }
        }
    }
    cluster_sites_ += size;
    ++clusters_;
    return size;
}

void MarkovChain::symmetry_update() {
    if (symmetry_maps_.empty()) return;
    const int a = static_cast<int>(rng_.below(static_cast<std::uint64_t>(layers_)));
    const auto& map = symmetry_maps_[rng_.below(symmetry_maps_.size())];
    const double u = rng_.uniform();
    const double before = energy();
    std::vector<std::uint8_t> saved = codes_;
    const unsigned bit = 1u << a;
    for (std::size_t i = 0; i < sites_; ++i) {
        codes_[i] = static_cast<std::uint8_t>((saved[i] & ~bit) | (saved[map[i]] & bit));
    }
    rebuild_class_sums();
    const double delta = energy() - before;
    if (delta > 0.0 && u >= std::exp(-weight_beta() * delta)) {
        codes_.swap(saved);
        rebuild_class_sums();
    }
}

void MarkovChain::sweep(Sampler sampler, int wolff_per_sweep) {
    switch (sampler) {
        case Sampler::metropolis: metropolis_sweep(); break;
        case Sampler::wolff:
            for (int k = 0; k < wolff_per_sweep; ++k) wolff_update();
            break;
        case Sampler::mixed:
            metropolis_sweep();
            if (target_ == Target::base_z && kernel_ == Kernel::one_class && model_->is_uniform_ferromagnet()) {
                for (int k = 0; k < wolff_per_sweep; ++k) wolff_update();
            }
            break;
    }
    symmetry_update();
}

SpinConfiguration MarkovChain::layer(int a) const {
    if (a < 0 || a >= layers_) throw std::out_of_range("layer index out of range");
    SpinConfiguration s(sites_);
    for (std::size_t i = 0; i < sites_; ++i) {
        if ((codes_[i] >> a) & 1u) s.flip(i);
    }
    return s;
}

void MarkovChain::set_layer(int a, const SpinConfiguration& config) {
    if (a < 0 || a >= layers_) throw std::out_of_range("layer index out of range");
    if (config.size() != sites_) throw std::invalid_argument("configuration size mismatch");
    for (std::size_t i = 0; i < sites_; ++i) {
        codes_[i] = static_cast<std::uint8_t>((codes_[i] & ~(1u << a)) | (config.down(i) ? (1u << a) : 0u));
    }
    rebuild_class_sums();
}

CoupledLayerState MarkovChain::to_layer_state() const {
    if (target_ != Target::coupled_zm) throw std::logic_error("to_layer_state needs a coupled chain");
    std::vector<SpinConfiguration> layers;
    for (int a = 0; a < layers_; ++a) layers.push_back(layer(a));
    return CoupledLayerState(*model_, std::move(layers));
}

double MarkovChain::overlap(const MarkovChain& other) const {
    if (other.sites_ != sites_ || other.layers_ != layers_) throw std::invalid_argument("overlap: shape mismatch");
    long differ = 0;
    for (std::size_t i = 0; i < sites_; ++i) differ += std::popcount(static_cast<unsigned>(codes_[i] ^ other.codes_[i]));
    return 1.0 - 2.0 * static_cast<double>(differ) / (static_cast<double>(sites_) * layers_);
}

void MarkovChain::swap_configuration(MarkovChain& other) {
    if (other.model_ != model_ || other.layers_ != layers_) throw std::invalid_argument("swap: chains differ in shape");
    codes_.swap(other.codes_);
    class_sum_.swap(other.class_sum_);
    std::swap(real_energy_, other.real_energy_);
    layer_mag_.swap(other.layer_mag_);
    product_mag_.swap(other.product_mag_);
}

void MarkovChain::save(BinaryWriter& w) const {
    w.put(rng_.state());
    w.put_vector(codes_);
    w.put_vector(class_sum_);
    w.put(real_energy_);
    w.put_vector(layer_mag_);
    w.put_vector(product_mag_);
    w.put(attempted_);
    w.put(accepted_);
    w.put(cluster_sites_);
    w.put(clusters_);
}

void MarkovChain::load(BinaryReader& r) {
    rng_.restore(r.get<RngStream::State>());
    auto codes = r.get_vector<std::uint8_t>();
    if (codes.size() != sites_) throw std::runtime_error("checkpoint chain size mismatch");
    codes_ = std::move(codes);
    class_sum_ = r.get_vector<long>();
    real_energy_ = r.get<double>();
    layer_mag_ = r.get_vector<long>();
    product_mag_ = r.get_vector<long>();
    attempted_ = r.get<std::uint64_t>();
    accepted_ = r.get<std::uint64_t>();
    cluster_sites_ = r.get<std::uint64_t>();
    clusters_ = r.get<std::uint64_t>();
}

// ---------------------------------------------------------------------------
// Accumulator

ObservableAccumulator::ObservableAccumulator(long bin_size, double hist_lo, double hist_hi, std::size_t hist_bins)
    : bin_size_(bin_size), histogram_(hist_lo, hist_hi, hist_bins), min_energy_(std::numeric_limits<double>::infinity()) {}

void ObservableAccumulator::add(double energy, std::optional<double> overlap) {
    ++samples_;
    min_energy_ = std::min(min_energy_, energy);
    histogram_.add(energy);
    sum_e_ += energy;
    sum_e2_ += energy * energy;
    if (overlap) {
        sum_q_ += *overlap;
        have_q_ = true;
    }
    if (++in_bin_ == bin_size_) {
        double inv = 1.0 / static_cast<double>(bin_size_);
        bin_e_.push_back(sum_e_ * inv);
        bin_e2_.push_back(sum_e2_ * inv);
        if (have_q_) bin_q_.push_back(sum_q_ * inv);
        sum_e_ = sum_e2_ = sum_q_ = 0.0;
        in_bin_ = 0;
    }
}

void ObservableAccumulator::save(BinaryWriter& w) const {
    w.put(bin_size_);
    w.put(in_bin_);
    w.put(sum_e_);
    w.put(sum_e2_);
    w.put(sum_q_);
    w.put(static_cast<std::uint8_t>(have_q_));
    w.put_vector(bin_e_);
    w.put_vector(bin_e2_);
    w.put_vector(bin_q_);
    w.put(histogram_.lo());
    w.put(histogram_.width());
    std::vector<std::uint64_t> counts(histogram_.counts().begin(), histogram_.counts().end());
    w.put_vector(counts);
    w.put(samples_);
    w.put(min_energy_);
}

void ObservableAccumulator::load(BinaryReader& r) {
    bin_size_ = r.get<long>();
    in_bin_ = r.get<long>();
    sum_e_ = r.get<double>();
    sum_e2_ = r.get<double>();
    sum_q_ = r.get<double>();
    have_q_ = r.get<std::uint8_t>() != 0;
    bin_e_ = r.get_vector<double>();
    bin_e2_ = r.get_vector<double>();
    bin_q_ = r.get_vector<double>();
    double lo = r.get<double>();
    double width = r.get<double>();
    histogram_.assign(lo, width, r.get_vector<std::uint64_t>());
    samples_ = r.get<long>();
    min_energy_ = r.get<double>();
}

// ---------------------------------------------------------------------------
// Series

std::vector<double> ObservableSeries::betas() const {
    std::vector<double> b;
    for (const auto& p : points) b.push_back(p.beta);
    return b;
}

ObservableSeries ObservableSeries::merge(const ObservableSeries& a, const ObservableSeries& b) {
    if (a.target != b.target || a.n != b.n || a.sites != b.sites) {
        throw std::invalid_argument("cannot merge series of different targets or sizes");
    }
    ObservableSeries out = a;
    for (const auto& p : b.points) {
        for (const auto& q : out.points) {
            if (q.beta == p.beta) throw std::invalid_argument("merged series share beta " + std::to_string(p.beta));
        }
        out.points.push_back(p);
    }
    std::stable_sort(out.points.begin(), out.points.end(),
                     [](const PointSeries& x, const PointSeries& y) { return x.beta < y.beta; });
    return out;
}

// ---------------------------------------------------------------------------
// Worker pool

struct WorkerPool::Impl {
    std::vector<std::thread> threads;
    std::mutex mu;
    std::condition_variable start_cv;
    std::condition_variable done_cv;
    const std::function<void(std::size_t)>* fn = nullptr;
    std::size_t count = 0;
    std::uint64_t generation = 0;
    int pending = 0;
    bool stop = false;
    std::exception_ptr error;
};

WorkerPool::WorkerPool(int workers) : workers_(std::max(1, workers)), impl_(std::make_unique<Impl>()) {
    for (int w = 1; w < workers_; ++w) {
        impl_->threads.emplace_back([this, w] {
            std::uint64_t seen = 0;
            while (true) {
                const std::function<void(std::size_t)>* fn;
                std::size_t count;
                {
                    std::unique_lock lock(impl_->mu);
                    impl_->start_cv.wait(lock, [&] { return impl_->stop || impl_->generation != seen; });
                    if (impl_->stop) return;
                    seen = impl_->generation;
                    fn = impl_->fn;
                    count = impl_->count;
                }
                try {
                    for (std::size_t k = static_cast<std::size_t>(w); k < count; k += static_cast<std::size_t>(workers_)) (*fn)(k);
                } catch (...) {
                    std::lock_guard lock(impl_->mu);
                    if (!impl_->error) impl_->error = std::current_exception();
                }
                std::lock_guard lock(impl_->mu);
                if (--impl_->pending == 0) impl_->done_cv.notify_one();
            }
        });
    }
}

WorkerPool::~WorkerPool() {
    {
        std::lock_guard lock(impl_->mu);
        impl_->stop = true;
    }
    impl_->start_cv.notify_all();
    for (auto& t : impl_->threads) t.join();
}

void WorkerPool::run(std::size_t count, const std::function<void(std::size_t)>& fn) {
    if (workers_ == 1 || count <= 1) {
        for (std::size_t k = 0; k < count; ++k) fn(k);
        return;
    }
    {
        std::lock_guard lock(impl_->mu);
        impl_->fn = &fn;
        impl_->count = count;
        impl_->pending = workers_ - 1;
        impl_->error = nullptr;
        ++impl_->generation;
    }
    impl_->start_cv.notify_all();
    std::exception_ptr local;
    try {
        for (std::size_t k = 0; k < count; k += static_cast<std::size_t>(workers_)) fn(k);
    } catch (...) {
        local = std::current_exception();
    }
    std::unique_lock lock(impl_->mu);
    impl_->done_cv.wait(lock, [&] { return impl_->pending == 0; });
    if (local) std::rethrow_exception(local);
    if (impl_->error) std::rethrow_exception(impl_->error);
}

// ---------------------------------------------------------------------------
// Ladder

double exchange_probability(double weight_beta_i, double energy_i, double weight_beta_j, double energy_j) {
    double x = (weight_beta_i - weight_beta_j) * (energy_i - energy_j);
    return x >= 0.0 ? 1.0 : std::exp(x);
}

std::pair<double, double> energy_bounds(const LatticeModel& model, Target target, int n) {
    double scale = model.energy_scale();
    if (scale <= 0.0) scale = 1.0;
    double factor = target == Target::base_z ? 1.0 : 4.0 * n;
    return {-factor * scale, factor * scale};
}

Ladder::Ladder(const LatticeModel& model, Target target, int n, std::vector<double> betas, Protocol protocol,
               std::uint64_t master_seed, std::uint64_t unit_id, int sweep_multiplier)
    : model_(&model), target_(target), n_(n), protocol_(protocol), master_seed_(master_seed), unit_id_(unit_id),
      sweep_multiplier_(sweep_multiplier) {
    if (betas.empty()) throw std::invalid_argument("ladder needs at least one beta");
    if (sweep_multiplier < 1) throw std::invalid_argument("sweep multiplier must be >= 1");
    protocol_.validate();
    if (protocol_.sampler == Sampler::wolff && !(target == Target::base_z && model.is_uniform_ferromagnet())) {
        throw UnsupportedSampler("the wolff sampler supports only the base target of uniform ferromagnets");
    }
    protocol_.equilibration_sweeps *= sweep_multiplier;
    protocol_.measurement_sweeps *= sweep_multiplier;
    protocol_.bin_size *= sweep_multiplier;
    std::sort(betas.begin(), betas.end());
    if (std::adjacent_find(betas.begin(), betas.end()) != betas.end()) {
        throw std::invalid_argument("ladder betas must be distinct");
    }
    const double beta_max = betas.back();
    auto [lo, hi] = energy_bounds(model, target, n);
    for (std::size_t k = 0; k < betas.size(); ++k) {
        std::uint64_t stream = hash_combine(unit_id, k);
        Slot slot{MarkovChain(model, target, n, betas[k], RngStream::for_stream(master_seed, stream)),
                  ObservableAccumulator(protocol_.bin_size, lo, hi, protocol_.histogram_bins), std::nullopt,
                  std::nullopt};
        if (beta_max == 0.0 || betas[k] < protocol_.hot_start_fraction * beta_max) {
            slot.chain.randomize();
        } else {
            slot.chain.set_uniform();
        }
        if (protocol_.measure_overlap && target == Target::coupled_zm) {
            slot.pair_a.emplace(model, target, n, betas[k],
                                RngStream::for_stream(master_seed, hash_combine(stream, 0xA1)));
            slot.pair_b.emplace(model, target, n, betas[k],
                                RngStream::for_stream(master_seed, hash_combine(stream, 0xB2)));
        }
        slots_.push_back(std::move(slot));
    }
    swap_attempts_.assign(slots_.size() > 1 ? slots_.size() - 1 : 0, 0);
    swap_accepts_ = swap_attempts_;
    track_best_ = target == Target::base_z;
    best_energy_ = slots_[0].chain.energy();
    best_config_ = slots_[0].chain.layer(0);
    for (const auto& s : slots_) {
        if (s.chain.energy() < best_energy_) {
            best_energy_ = s.chain.energy();
            best_config_ = s.chain.layer(0);
        }
    }
}

void Ladder::seed_slots(const SpinConfiguration& config) {
    if (sweeps_done_ != 0) throw std::logic_error("seed_slots after the run started");
    for (auto& s : slots_) {
        for (MarkovChain* c : {&s.chain, s.pair_a ? &*s.pair_a : nullptr, s.pair_b ? &*s.pair_b : nullptr}) {
            if (c == nullptr) continue;
            for (int a = 0; a < c->layer_count(); ++a) c->set_layer(a, config);
        }
    }
}

std::vector<double> Ladder::betas() const {
    std::vector<double> b;
    for (const auto& s : slots_) b.push_back(s.chain.beta());
    return b;
}

void Ladder::sweep_slot(std::size_t k) {
    Slot& s = slots_[k];
    s.chain.sweep(protocol_.sampler, protocol_.wolff_per_sweep);
    if (s.pair_a) {
        s.pair_a->metropolis_sweep();
        s.pair_b->metropolis_sweep();
    }
}

void Ladder::measure_slot(std::size_t k) {
    Slot& s = slots_[k];
    std::optional<double> q;
    if (s.pair_a) q = s.pair_a->overlap(*s.pair_b);
    s.acc.add(s.chain.energy(), q);
}

bool Ladder::run(WorkerPool* pool, const ProgressHook& hook, long hook_interval) {
    const long total = protocol_.total_sweeps();
    // Per-slot best energies are gathered without sharing state across workers.
    std::vector<double> slot_best(slots_.size(), std::numeric_limits<double>::infinity());
    std::vector<std::vector<std::uint8_t>> slot_best_codes(slots_.size());
    while (sweeps_done_ < total) {
        const long start = sweeps_done_;
        const long chunk = std::min<long>(protocol_.sweeps_per_exchange, total - start);
        auto work = [&](std::size_t k) {
            for (long s = 0; s < chunk; ++s) {
                long g = start + s;
                sweep_slot(k);
                if ((g + 1) % protocol_.recompute_interval == 0) {
                    slots_[k].chain.recompute_energy();
                    if (slots_[k].pair_a) {
                        slots_[k].pair_a->recompute_energy();
                        slots_[k].pair_b->recompute_energy();
                    }
                }
                if (track_best_) {
                    double e = slots_[k].chain.energy();
                    if (e < slot_best[k]) {
                        slot_best[k] = e;
                        auto c = slots_[k].chain.codes();
                        slot_best_codes[k].assign(c.begin(), c.end());
                    }
                }
                if (g >= protocol_.equilibration_sweeps) measure_slot(k);
            }
        };
        if (pool) pool->run(slots_.size(), work);
        else for (std::size_t k = 0; k < slots_.size(); ++k) work(k);
        sweeps_done_ += chunk;
        if (track_best_) {
            for (std::size_t k = 0; k < slots_.size(); ++k) {
                if (slot_best[k] < best_energy_) {
                    best_energy_ = slot_best[k];
                    SpinConfiguration c(model_->site_count());
                    for (std::size_t i = 0; i < c.size(); ++i) {
                        if (slot_best_codes[k][i] & 1u) c.flip(i);
                    }
                    best_config_ = c;
                }
                slot_best[k] = std::numeric_limits<double>::infinity();
            }
        }
        if (protocol_.parallel_tempering && slots_.size() > 1) exchange();
        if (hook && hook_interval > 0 && start / hook_interval != sweeps_done_ / hook_interval && sweeps_done_ < total) {
            if (!hook(sweeps_done_)) return false;
        }
    }
    return true;
}

void Ladder::exchange() {
    const std::size_t parity = static_cast<std::size_t>(rounds_done_ % 2);
    for (std::size_t k = parity; k + 1 < slots_.size(); k += 2) {
        MarkovChain& lo = slots_[k].chain;
        MarkovChain& hi = slots_[k + 1].chain;
        double p = exchange_probability(lo.weight_beta(), lo.energy(), hi.weight_beta(), hi.energy());
        ++swap_attempts_[k];
        if (lo.rng().uniform() < p) {
            lo.swap_configuration(hi);
            ++swap_accepts_[k];
        }
    }
    ++rounds_done_;
}

std::vector<double> Ladder::swap_acceptance() const {
    std::vector<double> out(swap_attempts_.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < out.size(); ++k) {
        if (swap_attempts_[k] > 0) out[k] = static_cast<double>(swap_accepts_[k]) / static_cast<double>(swap_attempts_[k]);
    }
    return out;
}

ObservableSeries Ladder::series() const {
    ObservableSeries out;
    out.target = target_;
    out.n = n_;
    out.sites = model_->site_count();
    auto swaps = swap_acceptance();
    for (std::size_t k = 0; k < slots_.size(); ++k) {
        const Slot& s = slots_[k];
        PointSeries p;
        p.beta = s.chain.beta();
        p.target = target_;
        p.sweep_multiplier = sweep_multiplier_;
        p.bin_e = s.acc.bin_energy();
        p.bin_e2 = s.acc.bin_energy_sq();
        p.bin_q = s.acc.bin_overlap();
        p.histogram = s.acc.histogram();
        p.acceptance = s.chain.attempted() ? static_cast<double>(s.chain.accepted()) / static_cast<double>(s.chain.attempted()) : 0.0;
        p.swap_acceptance = k < swaps.size() ? swaps[k] : std::numeric_limits<double>::quiet_NaN();
        p.nonequilibrated = halves_disagree(p.bin_e);
        p.samples = s.acc.samples();
        p.min_energy = s.acc.min_energy();
        out.points.push_back(std::move(p));
    }
    return out;
}

void Ladder::extend(const Protocol& longer) {
    const long m = sweep_multiplier_;
    if (longer.equilibration_sweeps * m != protocol_.equilibration_sweeps || longer.bin_size * m != protocol_.bin_size) {
        throw std::invalid_argument("protocol extension may only change the measurement length");
    }
    if (longer.measurement_sweeps * m < protocol_.measurement_sweeps) {
        throw std::invalid_argument("protocol extension cannot shorten the measurement");
    }
    protocol_.measurement_sweeps = longer.measurement_sweeps * m;
}

void Ladder::save(BinaryWriter& w) const {
    w.put(static_cast<std::uint8_t>(target_));
    w.put(n_);
    w.put(sweep_multiplier_);
    w.put(master_seed_);
    w.put(unit_id_);
    w.put(protocol_.equilibration_sweeps);
    w.put(protocol_.measurement_sweeps);
    w.put(protocol_.bin_size);
    w.put(static_cast<std::uint8_t>(protocol_.sampler));
    w.put(protocol_.wolff_per_sweep);
    w.put(static_cast<std::uint8_t>(protocol_.parallel_tempering));
    w.put(protocol_.sweeps_per_exchange);
    w.put(protocol_.recompute_interval);
    w.put(protocol_.hot_start_fraction);
    w.put<std::uint64_t>(protocol_.histogram_bins);
    w.put(static_cast<std::uint8_t>(protocol_.measure_overlap));
    w.put_vector(betas());
    w.put(sweeps_done_);
    w.put(rounds_done_);
    w.put_vector(swap_attempts_);
    w.put_vector(swap_accepts_);
    w.put(best_energy_);
    std::vector<std::uint64_t> words(best_config_.words().begin(), best_config_.words().end());
    w.put_vector(words);
    for (const auto& s : slots_) {
        s.chain.save(w);
        s.acc.save(w);
        w.put(static_cast<std::uint8_t>(s.pair_a.has_value()));
        if (s.pair_a) {
            s.pair_a->save(w);
            s.pair_b->save(w);
        }
    }
}

Ladder Ladder::load(BinaryReader& r, const LatticeModel& model) {
    Ladder l(model);
    l.target_ = static_cast<Target>(r.get<std::uint8_t>());
    l.n_ = r.get<int>();
    l.sweep_multiplier_ = r.get<int>();
    l.master_seed_ = r.get<std::uint64_t>();
    l.unit_id_ = r.get<std::uint64_t>();
    l.protocol_.equilibration_sweeps = r.get<long>();
    l.protocol_.measurement_sweeps = r.get<long>();
    l.protocol_.bin_size = r.get<long>();
    l.protocol_.sampler = static_cast<Sampler>(r.get<std::uint8_t>());
    l.protocol_.wolff_per_sweep = r.get<int>();
    l.protocol_.parallel_tempering = r.get<std::uint8_t>() != 0;
    l.protocol_.sweeps_per_exchange = r.get<int>();
    l.protocol_.recompute_interval = r.get<long>();
    l.protocol_.hot_start_fraction = r.get<double>();
    l.protocol_.histogram_bins = r.get<std::uint64_t>();
    l.protocol_.measure_overlap = r.get<std::uint8_t>() != 0;
    auto betas = r.get_vector<double>();
    l.sweeps_done_ = r.get<long>();
    l.rounds_done_ = r.get<long>();
    l.swap_attempts_ = r.get_vector<std::uint64_t>();
    l.swap_accepts_ = r.get_vector<std::uint64_t>();
    l.best_energy_ = r.get<double>();
    auto words = r.get_vector<std::uint64_t>();
    l.best_config_ = SpinConfiguration(model.site_count());
    l.best_config_.assign_words(words);
    l.track_best_ = l.target_ == Target::base_z;
    for (double beta : betas) {
        Slot slot{MarkovChain(model, l.target_, l.n_, beta, RngStream()), ObservableAccumulator(), std::nullopt,
                  std::nullopt};
        slot.chain.load(r);
        slot.acc.load(r);
        if (r.get<std::uint8_t>()) {
            slot.pair_a.emplace(model, l.target_, l.n_, beta, RngStream());
            slot.pair_b.emplace(model, l.target_, l.n_, beta, RngStream());
            slot.pair_a->load(r);
            slot.pair_b->load(r);
        }
        l.slots_.push_back(std::move(slot));
    }
    return l;
}

PointSeries run_point(const LatticeModel& model, Target target, int n, double beta, const Protocol& protocol,
                      std::uint64_t seed) {
    Protocol p = protocol;
    p.parallel_tempering = false;
    Ladder ladder(model, target, n, {beta}, p, seed, hash_combine(0x9017, static_cast<std::uint64_t>(target)));
    ladder.run();
    return ladder.series().points.front();
}

std::vector<double> tune_ladder(const LatticeModel& model, Target target, int n, std::vector<double> betas,
                                const Protocol& short_protocol, std::uint64_t seed, int iterations) {
    std::sort(betas.begin(), betas.end());
    if (betas.size() < 3) return betas;
    Protocol p = short_protocol;
    p.parallel_tempering = true;
    for (int it = 0; it < iterations; ++it) {
        Ladder ladder(model, target, n, betas, p, seed, hash_combine(0x7E4E, static_cast<std::uint64_t>(it)));
        ladder.run();
        auto rates = ladder.swap_acceptance();
        // Exchange "distance" of each interval; equalising it equalises the rates.
        std::vector<double> cumulative(betas.size(), 0.0);
        for (std::size_t k = 0; k + 1 < betas.size(); ++k) {
            double a = std::clamp(std::isnan(rates[k]) ? 1.0 : rates[k], 1e-3, 0.999);
            cumulative[k + 1] = cumulative[k] + std::sqrt(-std::log(a)) + 1e-3;
        }
        double total = cumulative.back();
        std::vector<double> updated = betas;
        for (std::size_t k = 1; k + 1 < betas.size(); ++k) {
            double target_c = total * static_cast<double>(k) / static_cast<double>(betas.size() - 1);
            auto itc = std::upper_bound(cumulative.begin(), cumulative.end(), target_c);
            std::size_t j = static_cast<std::size_t>(std::clamp<long>(itc - cumulative.begin(), 1, static_cast<long>(betas.size() - 1)));
            double frac = (target_c - cumulative[j - 1]) / (cumulative[j] - cumulative[j - 1]);
            double candidate = betas[j - 1] + frac * (betas[j] - betas[j - 1]);
            // Damped move keeps the ladder ordered and avoids oscillation.
            updated[k] = 0.5 * (betas[k] + candidate);
        }
        betas = updated;
    }
    return betas;
}

SpinConfiguration quench(const LatticeModel& model, SpinConfiguration config) {
    bool improved = true;
    while (improved) {
        improved = false;
        for (std::size_t i = 0; i < config.size(); ++i) {
            if (model.delta_energy(config, i) < -1e-12) {
                config.flip(i);
                improved = true;
            }
        }
    }
    return config;
}

}  // namespace smfmagic
