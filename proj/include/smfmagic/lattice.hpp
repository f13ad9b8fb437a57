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
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace smfmagic {

/// Bit-packed assignment of +-1 spins to N sites.
///
/// Encoding: site i lives in bit (i mod 64) of word i / 64, and a set bit
/// means spin -1. The site-wise product of two configurations is therefore the
/// XOR of their words, and for N <= 64 the configuration doubles as a basis
/// index with site i <-> bit i.
class SpinConfiguration {
  public:
    SpinConfiguration() = default;
    explicit SpinConfiguration(std::size_t sites);

    static SpinConfiguration from_spins(std::span<const int> spins);
    static SpinConfiguration from_index(std::size_t sites, std::uint64_t index);

    std::size_t size() const { return sites_; }
    bool down(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
    int spin(std::size_t i) const { return down(i) ? -1 : 1; }

    void flip(std::size_t i) {
        std::uint64_t mask = std::uint64_t{1} << (i & 63);
        std::uint64_t& w = words_[i >> 6];
        down_count_ += (w & mask) ? -1 : 1;
        w ^= mask;
    }
    void set(std::size_t i, int s);
    void negate();

    /// Number of -1 spins, maintained incrementally.
    std::size_t down_count() const { return static_cast<std::size_t>(down_count_); }
    long magnetization() const { return static_cast<long>(sites_) - 2 * down_count_; }

    /// Basis index (requires N <= 64).
    std::uint64_t index() const;
    std::vector<int> unpack() const;

    std::span<const std::uint64_t> words() const { return words_; }
    void assign_words(std::span<const std::uint64_t> words);

    /// Site-wise product.
    SpinConfiguration& operator*=(const SpinConfiguration& other);
    friend SpinConfiguration operator*(SpinConfiguration a, const SpinConfiguration& b) { return a *= b; }
    friend bool operator==(const SpinConfiguration& a, const SpinConfiguration& b) {
        return a.sites_ == b.sites_ && a.words_ == b.words_;
    }

    std::string to_string() const;

  private:
    void recount();

    std::size_t sites_ = 0;
    std::vector<std::uint64_t> words_;
    long down_count_ = 0;
};

enum class Geometry { chain, square, cubic, triangular, complete, cluster };

enum class ModelKind {
    ising_ferro_1d,
    ising_ferro_2d,
    ising_ferro_3d,
    infinite_range,
    j1j2,
    triangular_afm,
    edwards_anderson,
};

std::string_view to_string(Geometry g);
std::string_view to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view name);

/// One undirected bond contributing coefficient * s_i * s_j to the energy.
struct Bond {
    std::uint32_t i = 0;
    std::uint32_t j = 0;
    double coefficient = 0.0;
    std::uint8_t bond_class = 0;
};

struct Neighbor {
    std::uint32_t site = 0;
    double coefficient = 0.0;
    std::uint8_t bond_class = 0;
};

struct ModelParameters {
    /// J2/J1 for the J1-J2 model, with J1 = 1.
    std::optional<double> g;
    std::optional<std::uint64_t> disorder_seed;
};

/// Classical energy E_sigma on a periodic lattice, immutable after
/// construction.
///
/// Sign conventions (E = sum over bonds of coefficient * s_i * s_j):
///   ising_ferro_*     coefficient -1 on nearest-neighbour bonds
///   triangular_afm    coefficient +1 on the 3N triangular bonds
///   j1j2              -1 on nearest-neighbour bonds, +g on both plaquette diagonals
///   edwards_anderson  -J_ij with J_ij ~ N(0, 1) on cubic bonds
///   infinite_range    E = -(sum_i s_i)^2 / (2N), no bond list
class LatticeModel {
  public:
    ModelKind kind() const { return kind_; }
    Geometry geometry() const { return geometry_; }
    int linear_size() const { return linear_size_; }
    int dimension() const;
    std::size_t site_count() const { return sites_; }
    std::span<const Bond> bonds() const { return bonds_; }
    std::span<const Neighbor> neighbors(std::size_t i) const {
        return {neighbors_.data() + offsets_[i], neighbors_.data() + offsets_[i + 1]};
    }
    std::size_t max_coordination() const;

    const ModelParameters& parameters() const { return parameters_; }

    /// Every bond coefficient equals class_strengths()[bond_class]; the
    /// Monte Carlo kernels use integer bond-class tallies when this holds.
    bool has_uniform_classes() const { return uniform_classes_; }
    std::span<const double> class_strengths() const { return class_strengths_; }

    /// Unfrustrated uniform ferromagnet (a Wolff cluster update is valid).
    bool is_uniform_ferromagnet() const;

    double energy(const SpinConfiguration& s) const;
    double delta_energy(const SpinConfiguration& s, std::size_t i) const;

    /// Upper bound on |E_sigma| over all configurations.
    double energy_scale() const;

    /// Triangular sublattice label in {0, 1, 2}; -1 for other geometries.
    int sublattice(std::size_t i) const;

    /// Structural hash: kind, geometry, size, parameters and coupling values.
    std::uint64_t hash() const;

    std::vector<std::size_t> cyclic_shift(int axis) const;

    friend LatticeModel build_model(ModelKind, int, const ModelParameters&);
    friend LatticeModel induced_cluster(const LatticeModel&, std::span<const std::size_t>);
    friend LatticeModel load_couplings(std::istream&, ModelKind);

  private:
    LatticeModel() = default;
    void finalize();

    ModelKind kind_ = ModelKind::ising_ferro_1d;
    Geometry geometry_ = Geometry::chain;
    int linear_size_ = 0;
    std::size_t sites_ = 0;
    ModelParameters parameters_;
    std::vector<Bond> bonds_;
    std::vector<std::size_t> offsets_;
    std::vector<Neighbor> neighbors_;
    std::vector<double> class_strengths_;
    bool uniform_classes_ = true;
    std::vector<int> sublattice_;
};

/// Builds a periodic model. `linear_size` is L (N = L^d), or N itself for
/// the complete graph of the infinite-range model.
LatticeModel build_model(ModelKind kind, int linear_size, const ModelParameters& parameters = {});

/// Subgraph induced by a subset of sites of `model`, renumbered 0..k-1 in the
/// given order. Used for micro-instances small enough for exhaustive oracles.
LatticeModel induced_cluster(const LatticeModel& model, std::span<const std::size_t> sites);

/// Plain-text bond list, one `i j J_ij` line per bond, with a leading
/// `# sites N` line. J_ij is the physical coupling (energy -J_ij s_i s_j).
void dump_couplings(const LatticeModel& model, std::ostream& out);
LatticeModel load_couplings(std::istream& in, ModelKind kind = ModelKind::edwards_anderson);

/// Known zero-point properties of the reference configurations used for
/// stabilizer-overlap bounds.
enum class ReferenceKind { plus_x, ghz_zz, stripe, clock_sector, ground_state_file };

std::string_view to_string(ReferenceKind k);
ReferenceKind parse_reference_kind(std::string_view name);

struct ReferenceState {
    ReferenceKind kind = ReferenceKind::plus_x;
    double reference_energy = 0.0;
    /// ln of the number of basis configurations in the reference stabilizer state.
    double log_degeneracy = 0.0;
    /// Supporting basis configurations (empty for plus_x).
    std::vector<SpinConfiguration> configurations;
};

struct GroundStateRecord {
    std::size_t site_count = 0;
    double energy = 0.0;
    std::optional<SpinConfiguration> configuration;
};

/// Ground-state file: lines `site_count energy [bits]` where bits is a 0/1
/// string with 1 = spin -1. Comment lines start with '#'. One line per
/// disorder realization, in realization order.
std::vector<GroundStateRecord> read_ground_states(std::istream& in);
std::vector<GroundStateRecord> read_ground_states_file(const std::string& path);
void write_ground_state(std::ostream& out, const GroundStateRecord& record);

/// Reference stabilizer state compatible with `model`; throws
/// std::invalid_argument for incompatible pairs.
ReferenceState make_reference(const LatticeModel& model, ReferenceKind kind,
                              const GroundStateRecord* ground_state = nullptr);

/// The natural low-temperature reference for a model family.
ReferenceKind default_reference(ModelKind kind);

/// Clock configurations of the triangular antiferromagnet: sublattice
/// `plus` fixed to +1, `minus` to -1, the remaining one set from `free_bits`.
SpinConfiguration clock_configuration(const LatticeModel& model, int plus, int minus, std::uint64_t free_bits);

}  // namespace smfmagic
