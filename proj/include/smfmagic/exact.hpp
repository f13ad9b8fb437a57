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

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "smfmagic/lattice.hpp"

namespace smfmagic {

/// Real positive amplitudes c_sigma = exp(-beta E_sigma / 2) / sqrt(Z),
/// indexed by basis pattern with site i <-> bit i and spin -1 <-> bit 1.
struct ExactWavefunction {
    std::size_t sites = 0;
    std::vector<double> amplitudes;

    static ExactWavefunction from_model(const LatticeModel& model, double beta);
    /// Validates finiteness and normalisation (to 1e-12) of raw amplitudes.
    static ExactWavefunction from_amplitudes(std::vector<double> amplitudes);
    /// Rejects amplitudes with a non-zero imaginary part.
    static ExactWavefunction from_complex(std::span<const std::complex<double>> amplitudes);
};

/// E_sigma for all 2^N patterns (N <= 20).
std::vector<double> energy_table(const LatticeModel& model);

struct PartitionSums {
    double log_z = 0.0;
    double log_zm = 0.0;
    double mean_energy = 0.0;
    double mean_coupled_energy = 0.0;
    double var_energy = 0.0;
    double var_coupled_energy = 0.0;
};

/// Exact log Z and log Z_{M,n} (weight exp(-(beta/2) E_M)) by enumeration.
/// Caps: 2^N <= 2^20 and 2^(2nN) <= 2^24. Pass n = 0 to skip Z_M.
PartitionSums enumerate_partitions(const LatticeModel& model, double beta, int n);

/// Boltzmann probabilities e^{-beta E}/Z over all 2^N patterns.
std::vector<double> boltzmann_distribution(const LatticeModel& model, double beta);

/// Coupled-system probabilities over 2^(2nN) states (<= 2^20), state index
/// sum_a x_a << (a N).
std::vector<double> coupled_distribution(const LatticeModel& model, double beta, int n);

/// Stabilizer Renyi entropy M_2 via the four-copy sum, O(2^(3N)), N <= 9.
double sre_four_copy(const ExactWavefunction& psi, int n = 2);

/// The same sum with all four labels free, O(2^(4N)), N <= 5.
double sre_four_copy_symmetric(const ExactWavefunction& psi);

struct PauliSpectrum {
    double m_n = 0.0;
    /// Largest |<P>| found among strings with an odd number of Y factors
    /// (only evaluated when requested).
    double max_odd_y = 0.0;
};

/// M_n = log(sum_P <P>^(2n) / 2^N) / (1 - n) over all 4^N Pauli strings,
/// N <= 8.
PauliSpectrum sre_pauli_spectrum(const ExactWavefunction& psi, int n, bool check_odd_y = false);
double sre_pauli(const ExactWavefunction& psi, int n);

/// -log |<phi|psi>|^2 for the reference stabilizer state phi, the uniform
/// superposition over the reference configurations (all 2^N for plus_x).
double exact_bounds(const ExactWavefunction& psi, const ReferenceState& reference);

/// Lowest-energy configuration by Gray-code enumeration (N <= 27).
GroundStateRecord exhaustive_ground_state(const LatticeModel& model);

}  // namespace smfmagic
