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

#include "smfmagic/exact.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "smfmagic/numeric.hpp"

namespace smfmagic {

namespace {

constexpr double kNormTolerance = 1e-12;

void require_sites(std::size_t sites, std::size_t cap, const char* what) {
    if (sites > cap) {
        throw std::invalid_argument(std::string(what) + ": at most " + std::to_string(cap) + " sites supported, got " +
                                    std::to_string(sites));
    }
}

std::size_t site_count_of(const ExactWavefunction& psi) {
    if (psi.amplitudes.size() != (std::size_t{1} << psi.sites)) {
        throw std::invalid_argument("wavefunction amplitude count is not 2^N");
    }
    return psi.sites;
}

}  // namespace

std::vector<double> energy_table(const LatticeModel& model) {
    const std::size_t N = model.site_count();
    require_sites(N, 20, "energy_table");
    std::vector<double> table(std::size_t{1} << N);
    SpinConfiguration s(N);
    double e = model.energy(s);
    table[0] = e;
    // Gray-code walk, re-anchored periodically against accumulated rounding.
    std::uint64_t gray = 0;
    for (std::uint64_t k = 1; k < table.size(); ++k) {
        int bit = std::countr_zero(k);
        e += model.delta_energy(s, static_cast<std::size_t>(bit));
        s.flip(static_cast<std::size_t>(bit));
        gray ^= std::uint64_t{1} << bit;
        if ((k & 0xFFF) == 0) e = model.energy(s);
        table[gray] = e;
    }
    return table;
}

ExactWavefunction ExactWavefunction::from_model(const LatticeModel& model, double beta) {
    auto e = energy_table(model);
    double emin = *std::min_element(e.begin(), e.end());
    ExactWavefunction psi;
    psi.sites = model.site_count();
    psi.amplitudes.resize(e.size());
    CompensatedSum norm;
    for (std::size_t k = 0; k < e.size(); ++k) {
        double w = std::exp(-beta * (e[k] - emin));
        psi.amplitudes[k] = w;
        norm += w;
    }
    double scale = 1.0 / std::sqrt(static_cast<double>(norm.value()));
    for (auto& a : psi.amplitudes) a = std::sqrt(a) * scale;
    return psi;
}

ExactWavefunction ExactWavefunction::from_amplitudes(std::vector<double> amplitudes) {
    if (amplitudes.empty() || !std::has_single_bit(amplitudes.size())) {
        throw std::invalid_argument("amplitude count must be a power of two");
    }
    CompensatedSum norm;
    for (double a : amplitudes) {
        if (!std::isfinite(a)) throw std::invalid_argument("non-finite amplitude");
        norm += static_cast<long double>(a) * a;
    }
    if (std::abs(static_cast<double>(norm.value()) - 1.0) > kNormTolerance) {
        throw std::invalid_argument("amplitudes are not normalised");
    }
    ExactWavefunction psi;
    psi.sites = static_cast<std::size_t>(std::countr_zero(amplitudes.size()));
    psi.amplitudes = std::move(amplitudes);
    return psi;
}

ExactWavefunction ExactWavefunction::from_complex(std::span<const std::complex<double>> amplitudes) {
    std::vector<double> re(amplitudes.size());
    for (std::size_t k = 0; k < amplitudes.size(); ++k) {
        if (amplitudes[k].imag() != 0.0) {
            throw std::invalid_argument("only real amplitudes are supported");
        }
        re[k] = amplitudes[k].real();
    }
    return from_amplitudes(std::move(re));
}

PartitionSums enumerate_partitions(const LatticeModel& model, double beta, int n) {
    const std::size_t N = model.site_count();
    auto e = energy_table(model);
    const double emin = *std::min_element(e.begin(), e.end());
    PartitionSums out;
    {
        CompensatedSum z, ze, ze2;
        for (double ek : e) {
            long double w = std::exp(-static_cast<long double>(beta) * (ek - emin));
            z += w;
            ze += w * ek;
            ze2 += w * ek * ek;
        }
        long double zv = z.value();
        out.log_z = static_cast<double>(std::log(zv) - static_cast<long double>(beta) * emin);
        out.mean_energy = static_cast<double>(ze.value() / zv);
        out.var_energy = static_cast<double>(ze2.value() / zv - (ze.value() / zv) * (ze.value() / zv));
    }
    if (n == 0) {
        out.log_zm = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    if (n < 2) throw std::invalid_argument("Renyi index n must be 0 (skip) or >= 2");
    const std::size_t layers = 2 * static_cast<std::size_t>(n);
    if (layers * N > 24) {
        throw std::invalid_argument("enumerate_partitions: 2^(2nN) exceeds 2^24 (n=" + std::to_string(n) +
                                    ", N=" + std::to_string(N) + ")");
    }
    const std::uint64_t mask = (std::uint64_t{1} << N) - 1;
    const std::uint64_t total = std::uint64_t{1} << (layers * N);
    const long double half_beta = 0.5L * beta;
    const double shift = static_cast<double>(2 * layers) * emin;
    CompensatedSum z, ze, ze2;
    std::vector<std::uint64_t> x(layers);
    for (std::uint64_t idx = 0; idx < total; ++idx) {
        std::uint64_t all = 0;
        for (std::size_t a = 0; a < layers; ++a) {
            x[a] = (idx >> (a * N)) & mask;
            all ^= x[a];
        }
        double em = 0.0;
        for (std::size_t a = 0; a < layers; ++a) em += e[x[a]] + e[all ^ x[a]];
        long double w = std::exp(-half_beta * (em - shift));
        z += w;
        ze += w * em;
        ze2 += w * em * em;
    }
    long double zv = z.value();
    out.log_zm = static_cast<double>(std::log(zv) - half_beta * shift);
    out.mean_coupled_energy = static_cast<double>(ze.value() / zv);
    out.var_coupled_energy = static_cast<double>(ze2.value() / zv - (ze.value() / zv) * (ze.value() / zv));
    return out;
}

std::vector<double> boltzmann_distribution(const LatticeModel& model, double beta) {
    auto e = energy_table(model);
    double emin = *std::min_element(e.begin(), e.end());
    CompensatedSum z;
    std::vector<double> p(e.size());
    for (std::size_t k = 0; k < e.size(); ++k) {
        p[k] = std::exp(-beta * (e[k] - emin));
        z += p[k];
    }
    double zv = static_cast<double>(z.value());
    for (auto& v : p) v /= zv;
    return p;
}

std::vector<double> coupled_distribution(const LatticeModel& model, double beta, int n) {
    const std::size_t N = model.site_count();
    const std::size_t layers = 2 * static_cast<std::size_t>(n);
    if (n < 2 || layers * N > 20) {
        throw std::invalid_argument("coupled_distribution: need n >= 2 and 2nN <= 20");
    }
    auto e = energy_table(model);
    const std::uint64_t mask = (std::uint64_t{1} << N) - 1;
    std::vector<double> p(std::size_t{1} << (layers * N));
    std::vector<double> em(p.size());
    double emmin = std::numeric_limits<double>::infinity();
    for (std::uint64_t idx = 0; idx < p.size(); ++idx) {
        std::uint64_t all = 0;
        for (std::size_t a = 0; a < layers; ++a) all ^= (idx >> (a * N)) & mask;
        double v = 0.0;
        for (std::size_t a = 0; a < layers; ++a) {
            std::uint64_t xa = (idx >> (a * N)) & mask;
            v += e[xa] + e[all ^ xa];
        }
        em[idx] = v;
        emmin = std::min(emmin, v);
    }
    CompensatedSum z;
    for (std::size_t k = 0; k < p.size(); ++k) {
        p[k] = std::exp(-0.5 * beta * (em[k] - emmin));
        z += p[k];
    }
    double zv = static_cast<double>(z.value());
    for (auto& v : p) v /= zv;
    return p;
}

double sre_four_copy(const ExactWavefunction& psi, int n) {
    if (n != 2) throw std::invalid_argument("sre_four_copy implements n = 2 only");
    const std::size_t N = site_count_of(psi);
    require_sites(N, 9, "sre_four_copy");
    const std::size_t dim = std::size_t{1} << N;
    const auto& c = psi.amplitudes;
    std::vector<long double> f(dim);
    CompensatedSum total;
    for (std::size_t s = 0; s < dim; ++s) {
        for (std::size_t x = 0; x < dim; ++x) f[x] = static_cast<long double>(c[x]) * c[x ^ s];
        for (std::size_t t = 0; t < dim; ++t) {
            long double a = 0.0L;
            for (std::size_t x = 0; x < dim; ++x) a += f[x] * f[x ^ t];
            total += a * a;
        }
    }
    return -static_cast<double>(std::log(total.value()));
}

double sre_four_copy_symmetric(const ExactWavefunction& psi) {
    const std::size_t N = site_count_of(psi);
    require_sites(N, 5, "sre_four_copy_symmetric");
    const std::size_t dim = std::size_t{1} << N;
    const auto& c = psi.amplitudes;
    CompensatedSum total;
    for (std::size_t x1 = 0; x1 < dim; ++x1) {
        for (std::size_t x2 = 0; x2 < dim; ++x2) {
            for (std::size_t x3 = 0; x3 < dim; ++x3) {
                long double partial = 0.0L;
                for (std::size_t x4 = 0; x4 < dim; ++x4) {
                    std::size_t all = x1 ^ x2 ^ x3 ^ x4;
                    long double w = static_cast<long double>(c[x1]) * c[x2] * c[x3] * c[x4];
                    w *= static_cast<long double>(c[all ^ x1]) * c[all ^ x2] * c[all ^ x3] * c[all ^ x4];
                    partial += w;
                }
                total += partial;
            }
        }
    }
    return -static_cast<double>(std::log(total.value()));
}

PauliSpectrum sre_pauli_spectrum(const ExactWavefunction& psi, int n, bool check_odd_y) {
    if (n < 2) throw std::invalid_argument("Renyi index n must be at least 2");
    const std::size_t N = site_count_of(psi);
    require_sites(N, 8, "sre_pauli");
    const std::size_t dim = std::size_t{1} << N;
    const auto& c = psi.amplitudes;
    PauliSpectrum out;
    CompensatedSum total;
    std::vector<long double> g(dim);
    for (std::size_t a = 0; a < dim; ++a) {
        for (std::size_t x = 0; x < dim; ++x) g[x] = static_cast<long double>(c[x]) * c[x ^ a];
        for (std::size_t ap = 0; ap < dim; ++ap) {
            bool odd_y = std::popcount(a & ap) % 2 == 1;
            if (odd_y && !check_odd_y) continue;
            long double s = 0.0L;
            for (std::size_t x = 0; x < dim; ++x) s += (std::popcount(x & ap) % 2) ? -g[x] : g[x];
            if (odd_y) {
                out.max_odd_y = std::max(out.max_odd_y, static_cast<double>(std::fabs(s)));
                continue;
            }
            long double p2 = s * s;
            long double term = 1.0L;
            for (int k = 0; k < n; ++k) term *= p2;
            total += term;
        }
    }
    long double xi = total.value() / static_cast<long double>(dim);
    out.m_n = static_cast<double>(std::log(xi)) / (1.0 - n);
    return out;
}

double sre_pauli(const ExactWavefunction& psi, int n) { return sre_pauli_spectrum(psi, n).m_n; }

double exact_bounds(const ExactWavefunction& psi, const ReferenceState& reference) {
    const std::size_t N = site_count_of(psi);
    require_sites(N, 20, "exact_bounds");
    CompensatedSum overlap;
    long double count = 0.0L;
    if (reference.kind == ReferenceKind::plus_x) {
        for (double a : psi.amplitudes) overlap += a;
        count = static_cast<long double>(psi.amplitudes.size());
    } else {
        if (reference.configurations.empty()) {
            throw std::invalid_argument("reference state has no supporting configurations");
        }
        for (const auto& cfg : reference.configurations) {
            if (cfg.size() != N) throw std::invalid_argument("reference configuration size mismatch");
            overlap += psi.amplitudes[cfg.index()];
        }
        count = static_cast<long double>(reference.configurations.size());
    }
    long double ov = overlap.value();
    return -static_cast<double>(std::log(ov * ov / count));
}

GroundStateRecord exhaustive_ground_state(const LatticeModel& model) {
    const std::size_t N = model.site_count();
    require_sites(N, 27, "exhaustive_ground_state");
    SpinConfiguration s(N);
    double e = model.energy(s);
    double best = e;
    SpinConfiguration best_cfg = s;
    const std::uint64_t total = std::uint64_t{1} << N;
    // The last site is pinned to +1: the energy is invariant under global flip.
    for (std::uint64_t k = 1; k < total / 2; ++k) {
        int bit = std::countr_zero(k);
        e += model.delta_energy(s, static_cast<std::size_t>(bit));
        s.flip(static_cast<std::size_t>(bit));
        if (e < best - 1e-9 * std::max(1.0, std::abs(best))) {
            best = e;
            best_cfg = s;
        }
    }
    GroundStateRecord r;
    r.site_count = N;
    r.energy = model.energy(best_cfg);
    r.configuration = best_cfg;
    return r;
}

}  // namespace smfmagic
