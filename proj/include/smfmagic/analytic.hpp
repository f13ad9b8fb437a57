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

#include <Eigen/Dense>
#include <vector>

namespace smfmagic {

/// Transfer matrices of the ferromagnetic chain: V with entries e^{beta eta eta'}
/// and the coupled V_Mn on 2n-bit labels with entries
/// exp[(beta/2) (sum_a eta_a eta'_a + sum_a prod_{b != a} eta_b eta'_b)].
struct TransferMatrixPair {
    int n = 2;
    double beta = 0.0;
    Eigen::Matrix2d base;
    Eigen::MatrixXd coupled;
};

TransferMatrixPair build_transfer_matrices(int n, double beta);

/// [2^{2n} + (2 cosh beta)^{2n} + (2 sinh beta)^{2n}] / 2.
double coupled_top_eigenvalue(int n, double beta);
/// Largest eigenvalue of V_Mn from a dense symmetric eigensolver.
double numerical_top_eigenvalue(int n, double beta);

struct ChainFinite {
    double log_z = 0.0;
    double log_zm = 0.0;
    double m_n = 0.0;
};

/// Exact periodic chain of L sites: Z = Tr V^L, Z_M = Tr V_Mn^L, in log form.
ChainFinite chain_finite(int L, int n, double beta);

/// M_n / N of the infinite chain.
double chain_sre(int n, double beta);

struct ChainBounds {
    double dx = 0.0;
    double dzz = 0.0;
};

/// D_x / N and D_zz / N of the infinite chain.
ChainBounds chain_bounds(double beta);
/// The same for a periodic chain of L sites.
ChainBounds chain_bounds_finite(int L, double beta);

enum class SaddleBranch { paramagnetic, ordered };

struct SaddleSolution {
    int n = 2;
    double beta = 0.0;
    double m = 0.0;
    SaddleBranch branch = SaddleBranch::paramagnetic;
    /// beta F / N of the uncoupled model at its own minimising magnetisation.
    double beta_f = 0.0;
    double base_m = 0.0;
    /// beta F_M / N at the selected symmetric root.
    double beta_fm = 0.0;
    /// All roots of the symmetric self-consistency equation found in [0, 1].
    std::vector<double> roots;
    double residual = 0.0;
};

/// beta F_M / N = n beta m^2 - log S(m) under the symmetric ansatz.
double mean_field_coupled_free_energy(int n, double beta, double m);
/// m - RHS(m) of the symmetric self-consistency equation.
double mean_field_residual(int n, double beta, double m);

SaddleSolution mean_field_solve(int n, double beta);

struct MeanFieldSre {
    SaddleSolution saddle;
    double log_z = 0.0;
    double log_zm = 0.0;
    double m_n = 0.0;
    double dx = 0.0;
    double dzz = 0.0;
};

MeanFieldSre mean_field_sre(int n, double beta);

/// Temperature of the first-order switch between the paramagnetic and the
/// ordered coupled saddle.
double mean_field_cusp_temperature(int n);

/// Largest violation of the unsymmetrised stationarity conditions
/// m_a = <eta_a>, q_a = <prod_{b != a} eta_b> at the given fields.
double full_saddle_residual(int n, double beta, const std::vector<double>& m, const std::vector<double>& q);

}  // namespace smfmagic
