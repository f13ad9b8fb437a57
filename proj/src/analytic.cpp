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

#include "smfmagic/analytic.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace smfmagic {

namespace {

constexpr double kLn2 = std::numbers::ln2;

double log_cosh(double x) {
    x = std::abs(x);
    return x + std::log1p(std::exp(-2.0 * x)) - kLn2;
}

void check_index(int n, int max_n) {
    if (n < 2 || n > max_n) {
        throw std::invalid_argument("Renyi index n must be in [2, " + std::to_string(max_n) + "], got " +
                                    std::to_string(n));
    }
}

// Sum of the layer and leave-one-out product bond terms for label difference x.
int coupled_bond_sum(unsigned x, int layers) {
    int total = 0;
    for (int a = 0; a < layers; ++a) {
        total += ((x >> a) & 1u) ? -1 : 1;
        unsigned rest = x & ~(1u << a);
        total += (std::popcount(rest) % 2) ? -1 : 1;
    }
    return total;
}

// log(lambda_max^L * sum_k (lambda_k/lambda_max)^L) for a symmetric matrix.
double log_trace_power(const Eigen::MatrixXd& m, int L) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
    const auto& ev = solver.eigenvalues();
    double top = ev.cwiseAbs().maxCoeff();
    double rest = 0.0;
    for (Eigen::Index k = 0; k < ev.size(); ++k) rest += std::pow(ev[k] / top, L);
    return L * std::log(top) + std::log(rest);
}

double chain_log_z(int L, double beta) {
    return L * (kLn2 + log_cosh(beta)) + std::log1p(std::pow(std::tanh(beta), L));
}

double base_magnetisation(double beta) {
    if (beta <= 1.0) return 0.0;
    double lo = 1e-300, hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid - std::tanh(beta * mid) < 0.0) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

double base_free_energy(double beta, double m) {
    return 0.5 * beta * m * m - kLn2 - log_cosh(beta * m);
}

double mean_field_log_z(double beta) { return -base_free_energy(beta, base_magnetisation(beta)); }

}  // namespace

TransferMatrixPair build_transfer_matrices(int n, double beta) {
    check_index(n, 4);
    TransferMatrixPair t;
    t.n = n;
    t.beta = beta;
    t.base << std::exp(beta), std::exp(-beta), std::exp(-beta), std::exp(beta);
    const int layers = 2 * n;
    const int dim = 1 << layers;
    t.coupled.resize(dim, dim);
    for (int u = 0; u < dim; ++u) {
        for (int v = 0; v < dim; ++v) {
            t.coupled(u, v) = std::exp(0.5 * beta * coupled_bond_sum(static_cast<unsigned>(u ^ v), layers));
        }
    }
    return t;
}

double coupled_top_eigenvalue(int n, double beta) {
    double k = 2.0 * n;
    return 0.5 * (std::pow(2.0, k) + std::pow(2.0 * std::cosh(beta), k) + std::pow(2.0 * std::sinh(beta), k));
}

double numerical_top_eigenvalue(int n, double beta) {
    auto t = build_transfer_matrices(n, beta);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(t.coupled, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().maxCoeff();
}

ChainFinite chain_finite(int L, int n, double beta) {
    if (L < 2) throw std::invalid_argument("chain_finite needs L >= 2");
    if (beta < 0.0) throw std::invalid_argument("beta must be non-negative");
    auto t = build_transfer_matrices(n, beta);
    ChainFinite out;
    out.log_z = chain_log_z(L, beta);
    out.log_zm = log_trace_power(t.coupled, L);
    out.m_n = (out.log_zm - 2.0 * n * out.log_z) / (1.0 - n);
    return out;
}

double chain_sre(int n, double beta) {
    if (n < 2) throw std::invalid_argument("Renyi index n must be at least 2");
    if (beta < 0.0) throw std::invalid_argument("beta must be non-negative");
    double k = 2.0 * n;
    double sech_minus_one = std::expm1(-k * log_cosh(beta));
    double tanh_pow = std::pow(std::tanh(beta), k);
    return std::log1p(0.5 * sech_minus_one + 0.5 * tanh_pow) / (1.0 - n);
}

ChainBounds chain_bounds(double beta) {
    double lz = kLn2 + log_cosh(beta);
    double lz_half = kLn2 + log_cosh(0.5 * beta);
    return {-2.0 * lz_half + lz + kLn2, -beta + lz};
}

ChainBounds chain_bounds_finite(int L, double beta) {
    if (L < 2) throw std::invalid_argument("chain_bounds_finite needs L >= 2");
    double lz = chain_log_z(L, beta);
    double lz_half = chain_log_z(L, 0.5 * beta);
    return {(-2.0 * lz_half + lz + L * kLn2) / L, (-beta * L + lz - kLn2) / L};
}

double mean_field_coupled_free_energy(int n, double beta, double m) {
    double k = 2.0 * n;
    double x = beta * m;
    double t = std::tanh(x);
    double log_s = -kLn2 + k * (kLn2 + log_cosh(x)) + std::log(std::exp(-k * log_cosh(x)) + 1.0 + std::pow(t, k));
    return n * beta * m * m - log_s;
}

double mean_field_residual(int n, double beta, double m) {
    double k = 2.0 * n;
    double x = beta * m;
    double t = std::tanh(x);
    double rhs = (t + std::pow(t, k - 1.0)) / (1.0 + std::pow(t, k) + std::exp(-k * log_cosh(x)));
    return m - rhs;
}

SaddleSolution mean_field_solve(int n, double beta) {
    if (n < 2) throw std::invalid_argument("Renyi index n must be at least 2");
    if (!(beta > 0.0)) throw std::invalid_argument("mean_field_solve needs beta > 0");
    SaddleSolution s;
    s.n = n;
    s.beta = beta;
    s.roots.push_back(0.0);
    constexpr int kSeeds = 1000;
    double prev_m = 1.0 / kSeeds;
    double prev_h = mean_field_residual(n, beta, prev_m);
    if (prev_h == 0.0) s.roots.push_back(prev_m);
    for (int k = 2; k <= kSeeds; ++k) {
        double m = static_cast<double>(k) / kSeeds;
        double h = mean_field_residual(n, beta, m);
        if (h == 0.0) {
            s.roots.push_back(m);
        } else if (prev_h != 0.0 && (h < 0.0) != (prev_h < 0.0)) {
            double lo = prev_m, hi = m, hlo = prev_h;
            while (hi - lo > 1e-13) {
                double mid = 0.5 * (lo + hi);
                double hm = mean_field_residual(n, beta, mid);
                if ((hm < 0.0) == (hlo < 0.0)) {
                    lo = mid;
                    hlo = hm;
                } else {
                    hi = mid;
                }
            }
            double lo_r = std::abs(mean_field_residual(n, beta, lo));
            double hi_r = std::abs(mean_field_residual(n, beta, hi));
            s.roots.push_back(lo_r <= hi_r ? lo : hi);
        }
        prev_m = m;
        prev_h = h;
    }
    double f0 = mean_field_coupled_free_energy(n, beta, 0.0);
    double best_f = f0;
    double best_m = 0.0;
    for (double r : s.roots) {
        double f = mean_field_coupled_free_energy(n, beta, r);
        if (f < best_f - 1e-12) {
            best_f = f;
            best_m = r;
        }
    }
    s.m = best_m;
    s.beta_fm = best_f;
    s.branch = best_m == 0.0 ? SaddleBranch::paramagnetic : SaddleBranch::ordered;
    s.residual = std::abs(mean_field_residual(n, beta, best_m));
    s.base_m = base_magnetisation(beta);
    s.beta_f = base_free_energy(beta, s.base_m);
    return s;
}

MeanFieldSre mean_field_sre(int n, double beta) {
    MeanFieldSre out;
    out.saddle = mean_field_solve(n, beta);
    out.log_z = -out.saddle.beta_f;
    out.log_zm = -out.saddle.beta_fm;
    out.m_n = (out.log_zm - 2.0 * n * out.log_z) / (1.0 - n);
    out.dx = -2.0 * mean_field_log_z(0.5 * beta) + out.log_z + kLn2;
    out.dzz = -0.5 * beta + out.log_z;
    return out;
}

double mean_field_cusp_temperature(int n) {
    auto ordered_gap = [n](double beta) {
        auto s = mean_field_solve(n, beta);
        double f0 = mean_field_coupled_free_energy(n, beta, 0.0);
        double best = std::numeric_limits<double>::infinity();
        for (double r : s.roots) {
            if (r > 0.0) best = std::min(best, mean_field_coupled_free_energy(n, beta, r) - f0);
        }
        return best;
    };
    double lo = 1.0, hi = 2.0;
    if (!(ordered_gap(hi) < 0.0)) {
        throw std::runtime_error("mean-field cusp not bracketed in T in [0.5, 1]");
    }
    while (hi - lo > 1e-12) {
        double mid = 0.5 * (lo + hi);
        if (ordered_gap(mid) < 0.0) hi = mid;
        else lo = mid;
    }
    return 2.0 / (lo + hi);
}

double full_saddle_residual(int n, double beta, const std::vector<double>& m, const std::vector<double>& q) {
    const int layers = 2 * n;
    if (static_cast<int>(m.size()) != layers || static_cast<int>(q.size()) != layers) {
        throw std::invalid_argument("full_saddle_residual needs 2n fields of each kind");
    }
    std::vector<double> exponent(1u << layers);
    double top = -std::numeric_limits<double>::infinity();
    for (unsigned x = 0; x < exponent.size(); ++x) {
        int parity = std::popcount(x) % 2 ? -1 : 1;
        double e = 0.0;
        for (int a = 0; a < layers; ++a) {
            int eta = ((x >> a) & 1u) ? -1 : 1;
            e += m[a] * eta + q[a] * parity * eta;
        }
        exponent[x] = 0.5 * beta * e;
        top = std::max(top, exponent[x]);
    }
    std::vector<double> avg_eta(layers, 0.0), avg_prod(layers, 0.0);
    double z = 0.0;
    for (unsigned x = 0; x < exponent.size(); ++x) {
        double w = std::exp(exponent[x] - top);
        int parity = std::popcount(x) % 2 ? -1 : 1;
        z += w;
        for (int a = 0; a < layers; ++a) {
            int eta = ((x >> a) & 1u) ? -1 : 1;
            avg_eta[a] += w * eta;
            avg_prod[a] += w * parity * eta;
        }
    }
    double worst = 0.0;
    for (int a = 0; a < layers; ++a) {
        worst = std::max(worst, std::abs(m[a] - avg_eta[a] / z));
        worst = std::max(worst, std::abs(q[a] - avg_prod[a] / z));
    }
    return worst;
}

}  // namespace smfmagic
