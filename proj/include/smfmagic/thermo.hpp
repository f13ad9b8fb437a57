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

#include <optional>
#include <string>
#include <vector>

#include "smfmagic/lattice.hpp"
#include "smfmagic/mc.hpp"
#include "smfmagic/stats.hpp"

namespace smfmagic {

/// Known zero-temperature data used to anchor the low-temperature branch:
/// log Z ~ -beta E_min + S(0), log Z_M ~ -(beta/2) E_M,min + S_M(0).
struct LowTemperatureAnchor {
    double e_min = 0.0;
    double s0 = 0.0;
    double em_min = 0.0;
    double sm0 = 0.0;
};

/// Ferromagnet anchor: two ground states, 2^{2n} coupled ground states.
LowTemperatureAnchor ferromagnet_anchor(const LatticeModel& model, int n);

enum class CuspKind { none, smooth_maximum, cusp };

std::string_view to_string(CuspKind k);

struct CuspLocation {
    CuspKind kind = CuspKind::none;
    double t_star = 0.0;
    double t_low = 0.0;
    double t_high = 0.0;
    /// The coupled histograms at the bracket are bimodal.
    bool coexistence = false;
    /// Crossing temperature of the high- and low-temperature branches.
    std::optional<double> t_branch;
};

struct CurveOptions {
    /// Insert the exact infinite-temperature point when beta = 0 is missing.
    bool extrapolate = false;
    /// Uniform average of E_sigma (0 for bond models, -1/2 for the
    /// infinite-range model); used by the inserted point.
    double infinite_temperature_energy = 0.0;
    /// Uniform-average variance of E_sigma (the sum of squared bond
    /// coefficients for bond models, (N-1)/(2N) for the infinite-range model).
    double infinite_temperature_variance = 0.0;
    std::optional<ReferenceState> reference;
    std::optional<LowTemperatureAnchor> anchor;
    /// Slope jump across the crossing, relative to neighbouring changes,
    /// that classifies a crossing as a cusp.
    double cusp_jump_factor = 4.0;
};

/// Thermodynamic-integration results on the coupled-series grid, all per site.
struct MagicCurve {
    int n = 2;
    std::size_t sites = 0;
    std::vector<double> beta;
    std::vector<Estimate> m_n;
    std::vector<Estimate> log_z;
    std::vector<Estimate> log_zm;
    std::vector<Estimate> dx;
    std::vector<Estimate> dref;
    std::vector<Estimate> d2m_dt2;
    std::vector<Estimate> energy;
    std::vector<Estimate> coupled_energy;
    std::vector<Estimate> overlap;
    /// M_n - (2n/(n-1)) D for each bound, with correlated errors.
    std::vector<Estimate> excess_dx;
    std::vector<Estimate> excess_dref;
    std::vector<Estimate> m_n_low;
    std::string reference_label;
    bool exact = false;
    bool has_dx = false;
    bool has_dref = false;
    bool has_overlap = false;
    bool has_low_branch = false;
    std::vector<bool> nonequilibrated;
    std::vector<bool> bimodal;
    CuspLocation cusp;

    std::size_t size() const { return beta.size(); }
    double temperature(std::size_t k) const;
};

/// Cumulative trapezoid M_n(beta)/N from dM_n/dbeta = ((1/2)<E_M> - 2n<E>)/(n-1),
/// anchored at M_n(0) = 0. Adds bounds and the low-T branch per options.
MagicCurve integrate_m2(const ObservableSeries& base, const ObservableSeries& coupled, const CurveOptions& options = {});

/// log Z(beta)/N = ln 2 - (1/N) int_0^beta <E>.
Estimate log_partition(const ObservableSeries& base, double beta, bool extrapolate = false,
                       double infinite_temperature_energy = 0.0, double infinite_temperature_variance = 0.0);

/// D_x/N from per-site log Z at beta/2 and beta.
double bound_dx(double log_z_half, double log_z);

/// D_ref/N = beta E_ref/N + log Z/N - log_degeneracy/N.
double bound_dref(double log_z, double beta, const ReferenceState& reference, std::size_t sites);

/// Sign change of 2n<E> - (1/2)<E_M> next to the maximum of M_n.
/// Recomputes curve.cusp from the stored energies, histogram flags and the
/// low-temperature branch.
void attach_cusp(MagicCurve& curve, double jump_factor = 4.0);

CuspLocation locate_cusp(const ObservableSeries& base, const ObservableSeries& coupled, double jump_factor = 4.0);

/// Classifies the crossing of h(T) = 2n<E> - (1/2)<E_M> (per site) on a grid.
CuspLocation locate_crossing(const std::vector<double>& temperature, const std::vector<double>& h,
                             const std::vector<double>& m, double jump_factor = 4.0);

struct SecondDerivative {
    std::vector<double> t;
    std::vector<Estimate> d2;
    double positive_peak_t = 0.0;
    double positive_peak = 0.0;
    double negative_peak_t = 0.0;
    double negative_peak = 0.0;
};

/// Central finite differences in T of M(T) on a non-uniform grid; errors are
/// propagated assuming independent input errors. Throws when any beta
/// spacing exceeds `max_beta_step`.
SecondDerivative second_derivative(const std::vector<double>& beta, const std::vector<Estimate>& m,
                                   double max_beta_step = 0.01);

/// Peaks of a d2M/dT2 column restricted to a temperature window.
SecondDerivative peaks_of(const MagicCurve& curve, double t_min = 0.0, double t_max = 1e300);

struct ZeroPointEntropies {
    Estimate s0;
    Estimate sm0;
    /// M_n at the largest beta of the curve.
    Estimate m_n_at_beta_max;
};

/// S(0)/N and S_M(0)/N from the high-temperature integration extended to the
/// largest beta, given the ground-state energies.
ZeroPointEntropies zero_point_entropies(const ObservableSeries& base, const ObservableSeries& coupled, double e_min,
                                        double em_min, const CurveOptions& options = {});

/// Mean over disorder realizations with between-realization standard errors.
MagicCurve average_curves(const std::vector<MagicCurve>& curves);

/// Exact curves of the chain (L = 0 for the infinite chain) and of the
/// infinite-range saddle point; D_ref is D_zz.
MagicCurve analytic_chain_curve(int n, const std::vector<double>& beta, int L = 0);
MagicCurve mean_field_curve(int n, const std::vector<double>& beta);

struct InequalityAudit {
    std::string bound;
    double max_excess = 0.0;
    double sigma_at_max = 0.0;
    double beta_at_max = 0.0;
    /// Largest excess in units of its error (0 when exact and non-positive).
    double worst_sigma = 0.0;
    bool pass = true;
};

/// max over the grid of M_n - (2n/(n-1)) D, passing when it is <= `sigmas`
/// errors (or <= `exact_tol` for exact curves).
std::vector<InequalityAudit> audit_inequalities(const MagicCurve& curve, double sigmas = 3.0, double exact_tol = 1e-9);

}  // namespace smfmagic
