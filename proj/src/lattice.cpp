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

#include "smfmagic/lattice.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "smfmagic/rng.hpp"

namespace smfmagic {

// ---------------------------------------------------------------------------
// SpinConfiguration

SpinConfiguration::SpinConfiguration(std::size_t sites) : sites_(sites), words_((sites + 63) / 64, 0) {}

SpinConfiguration SpinConfiguration::from_spins(std::span<const int> spins) {
    SpinConfiguration c(spins.size());
    for (std::size_t i = 0; i < spins.size(); ++i) {
        if (spins[i] != 1 && spins[i] != -1) {
            throw std::invalid_argument("spin values must be +1 or -1");
        }
        if (spins[i] == -1) {
            c.flip(i);
        }
    }
    return c;
}

SpinConfiguration SpinConfiguration::from_index(std::size_t sites, std::uint64_t index) {
    if (sites > 64) {
        throw std::invalid_argument("from_index requires at most 64 sites");
    }
    if (sites < 64 && (index >> sites) != 0) {
        throw std::invalid_argument("basis index out of range");
    }
    SpinConfiguration c(sites);
    if (sites > 0) {
        c.words_[0] = index;
    }
    c.recount();
    return c;
}

void SpinConfiguration::set(std::size_t i, int s) {
    if ((s == -1) != down(i)) {
        flip(i);
    }
}

void SpinConfiguration::negate() {
    for (auto& w : words_) {
        w = ~w;
    }
    if (sites_ % 64 != 0) {
        words_.back() &= (std::uint64_t{1} << (sites_ % 64)) - 1;
    }
    down_count_ = static_cast<long>(sites_) - down_count_;
}

std::uint64_t SpinConfiguration::index() const {
    if (sites_ > 64) {
        throw std::logic_error("index() requires at most 64 sites");
    }
    return words_.empty() ? 0 : words_[0];
}

std::vector<int> SpinConfiguration::unpack() const {
    std::vector<int> out(sites_);
    for (std::size_t i = 0; i < sites_; ++i) {
        out[i] = spin(i);
    }
    return out;
}

void SpinConfiguration::assign_words(std::span<const std::uint64_t> words) {
    if (words.size() != words_.size()) {
        throw std::invalid_argument("word count mismatch");
    }
    std::copy(words.begin(), words.end(), words_.begin());
    if (sites_ % 64 != 0 && !words_.empty()) {
        words_.back() &= (std::uint64_t{1} << (sites_ % 64)) - 1;
    }
    recount();
}

SpinConfiguration& SpinConfiguration::operator*=(const SpinConfiguration& other) {
    if (other.sites_ != sites_) {
        throw std::invalid_argument("site count mismatch in spin product");
    }
    for (std::size_t w = 0; w < words_.size(); ++w) {
        words_[w] ^= other.words_[w];
    }
    recount();
    return *this;
}

std::string SpinConfiguration::to_string() const {
    std::string s(sites_, '0');
    for (std::size_t i = 0; i < sites_; ++i) {
        if (down(i)) {
            s[i] = '1';
        }
    }
    return s;
}

void SpinConfiguration::recount() {
    long count = 0;
    for (auto w : words_) {
        count += std::popcount(w);
    }
    down_count_ = count;
}

// ---------------------------------------------------------------------------
// Names

std::string_view to_string(Geometry g) {
    switch (g) {
        case Geometry::chain: return "chain";
        case Geometry::square: return "square";
        case Geometry::cubic: return "cubic";
        case Geometry::triangular: return "triangular";
        case Geometry::complete: return "complete";
        case Geometry::cluster: return "cluster";
    }
    return "?";
}

std::string_view to_string(ModelKind k) {
    switch (k) {
        case ModelKind::ising_ferro_1d: return "ising_ferro_1d";
        case ModelKind::ising_ferro_2d: return "ising_ferro_2d";
        case ModelKind::ising_ferro_3d: return "ising_ferro_3d";
        case ModelKind::infinite_range: return "infinite_range";
        case ModelKind::j1j2: return "j1j2";
        case ModelKind::triangular_afm: return "triangular_afm";
        case ModelKind::edwards_anderson: return "edwards_anderson";
    }
    return "?";
}

ModelKind parse_model_kind(std::string_view name) {
    for (auto k : {ModelKind::ising_ferro_1d, ModelKind::ising_ferro_2d, ModelKind::ising_ferro_3d,
                   ModelKind::infinite_range, ModelKind::j1j2, ModelKind::triangular_afm,
                   ModelKind::edwards_anderson}) {
        if (to_string(k) == name) {
            return k;
        }
    }
    throw std::invalid_argument("unknown model kind '" + std::string(name) + "'");
}

std::string_view to_string(ReferenceKind k) {
    switch (k) {
        case ReferenceKind::plus_x: return "plus_x";
        case ReferenceKind::ghz_zz: return "ghz_zz";
        case ReferenceKind::stripe: return "stripe";
        case ReferenceKind::clock_sector: return "clock_sector";
        case ReferenceKind::ground_state_file: return "ground_state_file";
    }
    return "?";
}

ReferenceKind parse_reference_kind(std::string_view name) {
    for (auto k : {ReferenceKind::plus_x, ReferenceKind::ghz_zz, ReferenceKind::stripe,
                   ReferenceKind::clock_sector, ReferenceKind::ground_state_file}) {
        if (to_string(k) == name) {
            return k;
        }
    }
    if (name == "dx" || name == "x") return ReferenceKind::plus_x;
    if (name == "zz") return ReferenceKind::ghz_zz;
    if (name == "clock") return ReferenceKind::clock_sector;
    if (name == "gs") return ReferenceKind::ground_state_file;
    throw std::invalid_argument("unknown reference kind '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// LatticeModel

int LatticeModel::dimension() const {
    switch (geometry_) {
        case Geometry::chain: return 1;
        case Geometry::square:
        case Geometry::triangular: return 2;
        case Geometry::cubic: return 3;
        default: return 0;
    }
}

std::size_t LatticeModel::max_coordination() const {
    std::size_t z = 0;
    for (std::size_t i = 0; i < sites_; ++i) {
        z = std::max(z, offsets_[i + 1] - offsets_[i]);
    }
    return z;
}

bool LatticeModel::is_uniform_ferromagnet() const {
    if (kind_ != ModelKind::ising_ferro_1d && kind_ != ModelKind::ising_ferro_2d &&
        kind_ != ModelKind::ising_ferro_3d) {
        return false;
    }
    return uniform_classes_ && class_strengths_.size() == 1 && class_strengths_[0] < 0.0;
}

double LatticeModel::energy(const SpinConfiguration& s) const {
    if (s.size() != sites_) {
        throw std::invalid_argument("configuration size does not match model");
    }
    if (geometry_ == Geometry::complete) {
        double m = static_cast<double>(s.magnetization());
        return -m * m / (2.0 * static_cast<double>(sites_));
    }
    double e = 0.0;
    for (const auto& b : bonds_) {
        e += (s.down(b.i) == s.down(b.j)) ? b.coefficient : -b.coefficient;
    }
    return e;
}

double LatticeModel::delta_energy(const SpinConfiguration& s, std::size_t i) const {
    if (geometry_ == Geometry::complete) {
        double m = static_cast<double>(s.magnetization());
        return (2.0 * s.spin(i) * m - 2.0) / static_cast<double>(sites_);
    }
    double field = 0.0;
    for (const auto& nb : neighbors(i)) {
        field += s.down(nb.site) ? -nb.coefficient : nb.coefficient;
    }
    return -2.0 * s.spin(i) * field;
}

double LatticeModel::energy_scale() const {
    if (geometry_ == Geometry::complete) {
        return static_cast<double>(sites_) / 2.0;
    }
    double total = 0.0;
    for (const auto& b : bonds_) {
        total += std::abs(b.coefficient);
    }
    return total;
}

int LatticeModel::sublattice(std::size_t i) const { return sublattice_.empty() ? -1 : sublattice_[i]; }

std::uint64_t LatticeModel::hash() const {
    std::uint64_t h = hash_combine(0x534D46ull, static_cast<std::uint64_t>(kind_));
    h = hash_combine(h, static_cast<std::uint64_t>(geometry_));
    h = hash_combine(h, static_cast<std::uint64_t>(linear_size_));
    h = hash_combine(h, sites_);
    if (parameters_.g) h = hash_combine(h, std::bit_cast<std::uint64_t>(*parameters_.g));
    if (parameters_.disorder_seed) h = hash_combine(h, *parameters_.disorder_seed ^ 0xD15C0ull);
    for (const auto& b : bonds_) {
        h = hash_combine(h, (static_cast<std::uint64_t>(b.i) << 32) | b.j);
        h = hash_combine(h, std::bit_cast<std::uint64_t>(b.coefficient));
    }
    return h;
}

std::vector<std::size_t> LatticeModel::cyclic_shift(int axis) const {
    int d = dimension();
    if (d == 0 || axis < 0 || axis >= d) {
        throw std::invalid_argument("cyclic_shift needs a lattice axis");
    }
    std::size_t L = static_cast<std::size_t>(linear_size_);
    std::size_t stride = 1;
    for (int k = 0; k < axis; ++k) stride *= L;
    std::vector<std::size_t> perm(sites_);
    for (std::size_t i = 0; i < sites_; ++i) {
        std::size_t coord = (i / stride) % L;
        perm[i] = i - coord * stride + ((coord + 1) % L) * stride;
    }
    return perm;
}

void LatticeModel::finalize() {
    std::vector<std::size_t> degree(sites_, 0);
    for (const auto& b : bonds_) {
        if (b.i == b.j || b.i >= sites_ || b.j >= sites_) {
            throw std::invalid_argument("invalid bond endpoints");
        }
        ++degree[b.i];
        ++degree[b.j];
    }
    offsets_.assign(sites_ + 1, 0);
    for (std::size_t i = 0; i < sites_; ++i) offsets_[i + 1] = offsets_[i] + degree[i];
    neighbors_.assign(offsets_.back(), {});
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (const auto& b : bonds_) {
        neighbors_[fill[b.i]++] = {b.j, b.coefficient, b.bond_class};
        neighbors_[fill[b.j]++] = {b.i, b.coefficient, b.bond_class};
    }

    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    for (const auto& b : bonds_) {
        auto key = std::minmax(b.i, b.j);
        if (!seen.insert(key).second) {
            throw std::logic_error("duplicate bond between sites " + std::to_string(b.i) + " and " +
                                   std::to_string(b.j));
        }
    }

    std::uint8_t classes = 0;
    for (const auto& b : bonds_) classes = std::max<std::uint8_t>(classes, b.bond_class + 1);
    class_strengths_.assign(classes, 0.0);
    std::vector<bool> assigned(classes, false);
    uniform_classes_ = true;
    for (const auto& b : bonds_) {
        if (!assigned[b.bond_class]) {
            class_strengths_[b.bond_class] = b.coefficient;
            assigned[b.bond_class] = true;
        } else if (class_strengths_[b.bond_class] != b.coefficient) {
            uniform_classes_ = false;
        }
    }
    if (!uniform_classes_) {
        class_strengths_.clear();
    }
}

namespace {

std::size_t ipow(std::size_t base, int exp) {
    std::size_t r = 1;
    for (int k = 0; k < exp; ++k) r *= base;
    return r;
}

}  // namespace

LatticeModel build_model(ModelKind kind, int L, const ModelParameters& parameters) {
    LatticeModel m;
    m.kind_ = kind;
    m.linear_size_ = L;
    m.parameters_ = parameters;

    auto require_periodic_size = [&] {
        if (L < 3) {
            throw std::invalid_argument("linear size must be at least 3 for periodic lattices (got " +
                                        std::to_string(L) + ")");
        }
    };
    auto sq = [&](int x, int y) {
        return static_cast<std::uint32_t>(((x % L + L) % L) + L * ((y % L + L) % L));
    };

    switch (kind) {
        case ModelKind::ising_ferro_1d: {
            require_periodic_size();
            m.geometry_ = Geometry::chain;
            m.sites_ = static_cast<std::size_t>(L);
            for (int x = 0; x < L; ++x) {
                m.bonds_.push_back({static_cast<std::uint32_t>(x), static_cast<std::uint32_t>((x + 1) % L), -1.0, 0});
            }
            break;
        }
        case ModelKind::ising_ferro_2d:
        case ModelKind::triangular_afm:
        case ModelKind::j1j2: {
            require_periodic_size();
            double nn = kind == ModelKind::triangular_afm ? 1.0 : -1.0;
            m.geometry_ = kind == ModelKind::triangular_afm ? Geometry::triangular : Geometry::square;
            m.sites_ = ipow(L, 2);
            if (kind == ModelKind::triangular_afm && L % 3 != 0) {
                throw std::invalid_argument("triangular lattice needs L divisible by 3");
            }
            double g = 0.0;
            if (kind == ModelKind::j1j2) {
                if (!parameters.g) {
                    throw std::invalid_argument("j1j2 requires parameter g = J2/J1");
                }
                g = *parameters.g;
                if (!(g > 0.0)) {
                    throw std::invalid_argument("j1j2 requires g > 0");
                }
            }
            for (int y = 0; y < L; ++y) {
                for (int x = 0; x < L; ++x) {
                    m.bonds_.push_back({sq(x, y), sq(x + 1, y), nn, 0});
                    m.bonds_.push_back({sq(x, y), sq(x, y + 1), nn, 0});
                }
            }
            if (kind == ModelKind::triangular_afm) {
                for (int y = 0; y < L; ++y) {
                    for (int x = 0; x < L; ++x) {
                        m.bonds_.push_back({sq(x, y), sq(x + 1, y + 1), 1.0, 0});
                    }
                }
                m.sublattice_.resize(m.sites_);
                for (int y = 0; y < L; ++y) {
                    for (int x = 0; x < L; ++x) m.sublattice_[sq(x, y)] = (x + y) % 3;
                }
            }
            if (kind == ModelKind::j1j2) {
                for (int y = 0; y < L; ++y) {
                    for (int x = 0; x < L; ++x) {
                        m.bonds_.push_back({sq(x, y), sq(x + 1, y + 1), g, 1});
                        m.bonds_.push_back({sq(x + 1, y), sq(x, y + 1), g, 1});
                    }
                }
            }
            break;
        }
        case ModelKind::ising_ferro_3d:
        case ModelKind::edwards_anderson: {
            require_periodic_size();
            m.geometry_ = Geometry::cubic;
            m.sites_ = ipow(L, 3);
            std::uint64_t key = 0;
            if (kind == ModelKind::edwards_anderson) {
                if (!parameters.disorder_seed) {
                    throw std::invalid_argument("edwards_anderson requires a disorder seed");
                }
                key = hash_combine(*parameters.disorder_seed, 0xEA);
            }
            auto cube = [&](int x, int y, int z) {
                return static_cast<std::uint32_t>((x % L) + L * ((y % L) + L * (z % L)));
            };
            std::uint64_t bond_index = 0;
            for (int z = 0; z < L; ++z) {
                for (int y = 0; y < L; ++y) {
                    for (int x = 0; x < L; ++x) {
                        std::uint32_t i = cube(x, y, z);
                        std::uint32_t nbrs[3] = {cube(x + 1, y, z), cube(x, y + 1, z), cube(x, y, z + 1)};
                        for (auto j : nbrs) {
                            double c = -1.0;
                            if (kind == ModelKind::edwards_anderson) {
                                c = -counter_normal(key, bond_index);
                            }
                            m.bonds_.push_back({i, j, c, 0});
                            ++bond_index;
                        }
                    }
                }
            }
            break;
        }
        case ModelKind::infinite_range: {
            if (L < 2) {
                throw std::invalid_argument("infinite-range model needs at least 2 sites");
            }
            m.geometry_ = Geometry::complete;
            m.sites_ = static_cast<std::size_t>(L);
            break;
        }
        default:
            throw std::invalid_argument("unknown model kind");
    }
    m.finalize();
    return m;
}

LatticeModel induced_cluster(const LatticeModel& model, std::span<const std::size_t> sites) {
    if (model.geometry() == Geometry::complete) {
        return build_model(ModelKind::infinite_range, static_cast<int>(sites.size()));
    }
    std::vector<long> relabel(model.site_count(), -1);
    for (std::size_t k = 0; k < sites.size(); ++k) {
        if (sites[k] >= model.site_count() || relabel[sites[k]] != -1) {
            throw std::invalid_argument("cluster sites must be distinct and in range");
        }
        relabel[sites[k]] = static_cast<long>(k);
    }
    LatticeModel m;
    m.kind_ = model.kind_;
    m.geometry_ = Geometry::cluster;
    m.linear_size_ = model.linear_size_;
    m.sites_ = sites.size();
    m.parameters_ = model.parameters_;
    for (const auto& b : model.bonds_) {
        if (relabel[b.i] >= 0 && relabel[b.j] >= 0) {
            m.bonds_.push_back({static_cast<std::uint32_t>(relabel[b.i]), static_cast<std::uint32_t>(relabel[b.j]),
                                b.coefficient, b.bond_class});
        }
    }
    if (!model.sublattice_.empty()) {
        m.sublattice_.resize(sites.size());
        for (std::size_t k = 0; k < sites.size(); ++k) m.sublattice_[k] = model.sublattice_[sites[k]];
    }
    m.finalize();
    return m;
}

void dump_couplings(const LatticeModel& model, std::ostream& out) {
    out << "# sites " << model.site_count() << "\n";
    out << "# kind " << to_string(model.kind()) << "\n";
    out << "# geometry " << to_string(model.geometry()) << "\n";
    out << "# L " << model.linear_size() << "\n";
    out.precision(17);
    for (const auto& b : model.bonds()) {
        out << b.i << ' ' << b.j << ' ' << -b.coefficient << "\n";
    }
}

LatticeModel load_couplings(std::istream& in, ModelKind kind) {
    LatticeModel m;
    m.kind_ = kind;
    m.geometry_ = Geometry::cluster;
    std::string line;
    bool have_sites = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        if (line[0] == '#') {
            std::string hash, key, value;
            ls >> hash >> key >> value;
            if (key == "sites") {
                m.sites_ = std::stoul(value);
                have_sites = true;
            } else if (key == "kind") {
                m.kind_ = parse_model_kind(value);
            } else if (key == "L") {
                m.linear_size_ = std::stoi(value);
            } else if (key == "geometry") {
                for (auto g : {Geometry::chain, Geometry::square, Geometry::cubic, Geometry::triangular,
                               Geometry::cluster}) {
                    if (to_string(g) == value) m.geometry_ = g;
                }
            }
            continue;
        }
        long i, j;
        double J;
        if (!(ls >> i >> j >> J) || i < 0 || j < 0) {
            throw std::invalid_argument("malformed bond line " + std::to_string(lineno) + ": '" + line + "'");
        }
        m.bonds_.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), -J, 0});
    }
    if (!have_sites) {
        throw std::invalid_argument("coupling file lacks a '# sites N' header");
    }
    if (m.geometry_ == Geometry::triangular) {
        int L = m.linear_size_;
        m.sublattice_.resize(m.sites_);
        for (std::size_t i = 0; i < m.sites_; ++i) m.sublattice_[i] = static_cast<int>((i % L + i / L) % 3);
    }
    m.finalize();
    return m;
}

// ---------------------------------------------------------------------------
// Reference states

std::vector<GroundStateRecord> read_ground_states(std::istream& in) {
    std::vector<GroundStateRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        GroundStateRecord r;
        if (!(ls >> r.site_count >> r.energy)) {
            throw std::invalid_argument("malformed ground-state line " + std::to_string(lineno));
        }
        std::string bits;
        if (ls >> bits) {
            if (bits.size() != r.site_count) {
                throw std::invalid_argument("ground-state configuration length mismatch on line " +
                                            std::to_string(lineno));
            }
            SpinConfiguration c(r.site_count);
            for (std::size_t i = 0; i < bits.size(); ++i) {
                if (bits[i] == '1') c.flip(i);
                else if (bits[i] != '0') throw std::invalid_argument("ground-state bits must be 0/1");
            }
            r.configuration = std::move(c);
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<GroundStateRecord> read_ground_states_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open ground-state file '" + path + "'");
    }
    return read_ground_states(in);
}

void write_ground_state(std::ostream& out, const GroundStateRecord& record) {
    auto old = out.precision(17);
    out << record.site_count << ' ' << record.energy;
    if (record.configuration) out << ' ' << record.configuration->to_string();
    out << "\n";
    out.precision(old);
}

SpinConfiguration clock_configuration(const LatticeModel& model, int plus, int minus, std::uint64_t free_bits) {
    if (model.sublattice(0) < 0) {
        throw std::invalid_argument("clock configurations need a triangular sublattice structure");
    }
    if (plus == minus || plus < 0 || plus > 2 || minus < 0 || minus > 2) {
        throw std::invalid_argument("invalid clock sublattice choice");
    }
    SpinConfiguration c(model.site_count());
    int k = 0;
    for (std::size_t i = 0; i < model.site_count(); ++i) {
        int sl = model.sublattice(i);
        if (sl == minus) {
            c.flip(i);
        } else if (sl != plus) {
            if (k < 64 && ((free_bits >> k) & 1u)) c.flip(i);
            ++k;
        }
    }
    return c;
}

ReferenceKind default_reference(ModelKind kind) {
    switch (kind) {
        case ModelKind::j1j2: return ReferenceKind::stripe;
        case ModelKind::triangular_afm: return ReferenceKind::clock_sector;
        case ModelKind::edwards_anderson: return ReferenceKind::ground_state_file;
        default: return ReferenceKind::ghz_zz;
    }
}

ReferenceState make_reference(const LatticeModel& model, ReferenceKind kind, const GroundStateRecord* gs) {
    const std::size_t N = model.site_count();
    ReferenceState ref;
    ref.kind = kind;
    auto reject = [&] {
        throw std::invalid_argument(std::string("reference ") + std::string(to_string(kind)) +
                                    " is incompatible with model " + std::string(to_string(model.kind())));
    };
    switch (kind) {
        case ReferenceKind::plus_x:
            ref.log_degeneracy = static_cast<double>(N) * std::numbers::ln2;
            break;
        case ReferenceKind::ghz_zz: {
            if (model.kind() != ModelKind::ising_ferro_1d && model.kind() != ModelKind::ising_ferro_2d &&
                model.kind() != ModelKind::ising_ferro_3d && model.kind() != ModelKind::infinite_range) {
                reject();
            }
            SpinConfiguration up(N);
            SpinConfiguration down = up;
            down.negate();
            ref.reference_energy = model.energy(up);
            ref.log_degeneracy = std::numbers::ln2;
            ref.configurations = {up, down};
            break;
        }
        case ReferenceKind::stripe: {
            if (model.kind() != ModelKind::j1j2 || model.geometry() != Geometry::square) reject();
            int L = model.linear_size();
            if (L % 2 != 0) {
                throw std::invalid_argument("stripe reference needs even L");
            }
            SpinConfiguration rows(N), cols(N);
            for (int y = 0; y < L; ++y) {
                for (int x = 0; x < L; ++x) {
                    std::size_t i = static_cast<std::size_t>(x + L * y);
                    if (y % 2) rows.flip(i);
                    if (x % 2) cols.flip(i);
                }
            }
            SpinConfiguration rows_neg = rows, cols_neg = cols;
            rows_neg.negate();
            cols_neg.negate();
            ref.reference_energy = model.energy(rows);
            ref.log_degeneracy = std::log(4.0);
            ref.configurations = {rows, rows_neg, cols, cols_neg};
            break;
        }
        case ReferenceKind::clock_sector: {
            if (model.kind() != ModelKind::triangular_afm || model.sublattice(0) < 0) reject();
            std::size_t free_sites = 0;
            for (std::size_t i = 0; i < N; ++i) free_sites += model.sublattice(i) == 2;
            ref.reference_energy = model.energy(clock_configuration(model, 0, 1, 0));
            ref.log_degeneracy = static_cast<double>(free_sites) * std::numbers::ln2;
            if (free_sites <= 20) {
                for (std::uint64_t b = 0; b < (std::uint64_t{1} << free_sites); ++b) {
                    ref.configurations.push_back(clock_configuration(model, 0, 1, b));
                }
            }
            break;
        }
        case ReferenceKind::ground_state_file: {
            if (model.kind() != ModelKind::edwards_anderson) reject();
            if (gs == nullptr) {
                throw std::invalid_argument("ground_state_file reference needs a ground-state record");
            }
            if (gs->site_count != N) {
                throw std::invalid_argument("ground-state record site count does not match the model");
            }
            ref.reference_energy = gs->energy;
            ref.log_degeneracy = std::numbers::ln2;
            if (gs->configuration) {
                SpinConfiguration flipped = *gs->configuration;
                flipped.negate();
                ref.configurations = {*gs->configuration, flipped};
            }
            break;
        }
    }
    return ref;
}

}  // namespace smfmagic
