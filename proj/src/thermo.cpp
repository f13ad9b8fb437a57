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

#include "smfmagic/thermo.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "smfmagic/analytic.hpp"

namespace smfmagic {

namespace {

constexpr double kLn2 = std::numbers::ln2;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Series with the optional analytic beta = 0 point and a common bin count.
struct PreparedSeries {
    ObservableSeries series;
    int bins = 0;
};

PointSeries infinite_temperature_point(Target target, int n, double e0, double v0) {
    PointSeries p;
    p.beta = 0.0;
    p.target = target;
    p.analytic = true;
    double scale = target == Target::base_z ? 1.0 : 4.0 * n;
    double e = scale * e0;
    p.bin_e = {e};
    p.bin_e2 = {e * e + scale * v0};
    return p;
}

int series_bins(const ObservableSeries& s) {
    int bins = -1;
    for (const auto& p : s.points) {
        if (p.analytic) continue;
        int b = static_cast<int>(p.bin_e.size());
        if (b < 2) throw std::invalid_argument("series point has fewer than two bins");
        if (bins >= 0 && b != bins) throw std::invalid_argument("series points differ in bin count");
        bins = b;
    }
    return bins;
}

PreparedSeries prepare(const ObservableSeries& s, bool extrapolate, double e0, double v0) {
    if (s.points.empty()) throw std::invalid_argument("empty observable series");
    PreparedSeries out{s, 0};
    std::stable_sort(out.series.points.begin(), out.series.points.end(),
                     [](const PointSeries& a, const PointSeries& b) { return a.beta < b.beta; });
    if (out.series.points.front().beta != 0.0) {
        if (!extrapolate) {
            throw std::invalid_argument("series lacks the beta = 0 anchor and extrapolation is disabled");
        }
        out.series.points.insert(out.series.points.begin(), infinite_temperature_point(s.target, s.n, e0, v0));
    }
    out.bins = series_bins(out.series);
    return out;
}

// Replica k = -1 uses all bins; otherwise bin k is left out.
double replica_mean(const std::vector<double>& bins, int k) {
    if (bins.size() == 1) return bins[0];
    double total = 0.0;
    for (double v : bins) total += v;
    if (k < 0) return total / static_cast<double>(bins.size());
    return (total - bins[static_cast<std::size_t>(k)]) / static_cast<double>(bins.size() - 1);
}

// Trapezoid rule with the endpoint-derivative (Hermite) correction; exact for cubics.
std::vector<double> cumulative_hermite(const std::vector<double>& x, const std::vector<double>& y,
                                       const std::vector<double>& dy) {
    std::vector<double> out(x.size(), 0.0);
    for (std::size_t k = 1; k < x.size(); ++k) {
        double h = x[k] - x[k - 1];
        out[k] = out[k - 1] + 0.5 * h * (y[k] + y[k - 1]) + h * h / 12.0 * (dy[k - 1] - dy[k]);
    }
    return out;
}

std::size_t find_beta(const std::vector<double>& grid, double beta) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (std::abs(grid[k] - beta) <= 1e-12 * std::max(1.0, beta)) return k;
    }
    return grid.size();
}

Estimate combine(const std::vector<std::vector<double>>& replicas, std::size_t idx, int bins) {
    double full = replicas[0][idx];
    if (bins < 2 || std::isnan(full)) return {full, 0.0};
    std::vector<double> loo(static_cast<std::size_t>(bins));
    for (int k = 0; k < bins; ++k) loo[static_cast<std::size_t>(k)] = replicas[static_cast<std::size_t>(k) + 1][idx];
    return jackknife(loo, full);
}

struct RawCurve {
    std::vector<double> m, lz, lzm, dx, dref, d2, e, em, q, xdx, xdref, mlow;
};

struct Evaluator {
    const PreparedSeries& base;
    const PreparedSeries& coupled;
    const CurveOptions& options;
    int n;
    double sites;
    std::vector<double> base_beta;
    std::vector<double> coupled_beta;
    std::vector<std::size_t> coupled_in_base;
    std::vector<std::size_t> half_in_base;

    Evaluator(const PreparedSeries& b, const PreparedSeries& c, const CurveOptions& o)
        : base(b), coupled(c), options(o), n(c.series.n), sites(static_cast<double>(c.series.sites)) {
        base_beta = b.series.betas();
        coupled_beta = c.series.betas();
        for (double beta : coupled_beta) {
            std::size_t k = find_beta(base_beta, beta);
            if (k == base_beta.size()) {
                throw std::invalid_argument("coupled beta " + std::to_string(beta) + " is missing from the base grid");
            }
            coupled_in_base.push_back(k);
            half_in_base.push_back(find_beta(base_beta, 0.5 * beta));
        }
    }

    RawCurve operator()(int k) const {
        RawCurve r;
        const auto& bp = base.series.points;
        const auto& cp = coupled.series.points;
        std::vector<double> e(bp.size()), var(bp.size());
        for (std::size_t j = 0; j < bp.size(); ++j) {
            double m1 = replica_mean(bp[j].bin_e, k);
            double m2 = replica_mean(bp[j].bin_e2, k);
            e[j] = m1 / sites;
            var[j] = (m2 - m1 * m1) / sites;
        }
        std::vector<double> em(cp.size()), varm(cp.size()), q(cp.size(), kNaN);
        for (std::size_t i = 0; i < cp.size(); ++i) {
            double m1 = replica_mean(cp[i].bin_e, k);
            double m2 = replica_mean(cp[i].bin_e2, k);
            em[i] = m1 / sites;
            varm[i] = (m2 - m1 * m1) / sites;
            if (!cp[i].bin_q.empty()) q[i] = replica_mean(cp[i].bin_q, k);
        }
        std::vector<double> de(bp.size()), dem(cp.size());
        for (std::size_t j = 0; j < bp.size(); ++j) de[j] = -var[j];
        for (std::size_t i = 0; i < cp.size(); ++i) dem[i] = -0.5 * varm[i];
        auto int_e = cumulative_hermite(base_beta, e, de);
        auto int_em = cumulative_hermite(coupled_beta, em, dem);
        std::vector<double> lz(bp.size());
        for (std::size_t j = 0; j < bp.size(); ++j) lz[j] = kLn2 - int_e[j];
        const double two_n = 2.0 * n;
        const double bound_factor = two_n / (n - 1.0);
        for (std::size_t i = 0; i < cp.size(); ++i) {
            double beta = coupled_beta[i];
            std::size_t jb = coupled_in_base[i];
            double lzi = lz[jb];
            double lzmi = two_n * kLn2 - 0.5 * int_em[i];
            double m = (lzmi - two_n * lzi) / (1.0 - n);
            r.m.push_back(m);
            r.lz.push_back(lzi);
            r.lzm.push_back(lzmi);
            double dx = half_in_base[i] < bp.size() ? bound_dx(lz[half_in_base[i]], lzi) : kNaN;
            r.dx.push_back(dx);
            r.xdx.push_back(m - bound_factor * dx);
            double dref = options.reference ? bound_dref(lzi, beta, *options.reference,
                                                         static_cast<std::size_t>(sites))
                                            : kNaN;
            r.dref.push_back(dref);
            r.xdref.push_back(m - bound_factor * dref);
            double g = (0.5 * em[i] - two_n * e[jb]) / (n - 1.0);
            double gp = (two_n * var[jb] - 0.25 * varm[i]) / (n - 1.0);
            r.d2.push_back(2.0 * beta * beta * beta * g + beta * beta * beta * beta * gp);
            r.e.push_back(e[jb]);
            r.em.push_back(em[i]);
            r.q.push_back(q[i]);
        }
        if (options.anchor) {
            const auto& a = *options.anchor;
            double bmax = base_beta.back();
            double lz_top = -bmax * a.e_min / sites + a.s0 / sites;
            double lzm_top = -0.5 * coupled_beta.back() * a.em_min / sites + a.sm0 / sites;
            for (std::size_t i = 0; i < cp.size(); ++i) {
                double lzl = lz_top + (int_e.back() - int_e[coupled_in_base[i]]);
                double lzml = lzm_top + 0.5 * (int_em.back() - int_em[i]);
                r.mlow.push_back((lzml - two_n * lzl) / (1.0 - n));
            }
        }
        return r;
    }
};

std::vector<Estimate> assemble(const std::vector<RawCurve>& replicas, std::vector<double> RawCurve::*field, int bins) {
    std::vector<std::vector<double>> cols;
    cols.reserve(replicas.size());
    for (const auto& r : replicas) cols.push_back(r.*field);
    std::vector<Estimate> out;
    for (std::size_t i = 0; i < cols[0].size(); ++i) out.push_back(combine(cols, i, bins));
    return out;
}

bool any_finite(const std::vector<Estimate>& v) {
    return std::any_of(v.begin(), v.end(), [](const Estimate& e) { return std::isfinite(e.value); });
}

std::vector<double> values_of(const std::vector<Estimate>& v) {
    std::vector<double> out;
    for (const auto& e : v) out.push_back(e.value);
    return out;
}

}  // namespace

void attach_cusp(MagicCurve& c, double jump_factor) {
    std::vector<double> t, h;
    for (std::size_t i = 0; i < c.size(); ++i) {
        t.push_back(c.temperature(i));
        h.push_back(2.0 * c.n * c.energy[i].value - 0.5 * c.coupled_energy[i].value);
    }
    bool coexistence_before = c.cusp.coexistence;
    c.cusp = locate_crossing(t, h, values_of(c.m_n), jump_factor);
    if (c.cusp.kind != CuspKind::none) {
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (i < c.bimodal.size() && c.bimodal[i] && t[i] >= c.cusp.t_low - 1e-12 && t[i] <= c.cusp.t_high + 1e-12) {
                c.cusp.coexistence = true;
            }
        }
        if (coexistence_before) c.cusp.coexistence = true;
        if (c.cusp.coexistence) c.cusp.kind = CuspKind::cusp;
    }
    if (c.has_low_branch) {
        for (std::size_t i = 1; i < c.size(); ++i) {
            double a = c.m_n[i - 1].value - c.m_n_low[i - 1].value;
            double b = c.m_n[i].value - c.m_n_low[i].value;
            if (std::isfinite(a) && std::isfinite(b) && (a < 0.0) != (b < 0.0) && c.beta[i - 1] > 0.0) {
                double t0 = c.temperature(i - 1), t1 = c.temperature(i);
                double tb = t0 + (0.0 - a) * (t1 - t0) / (b - a);
                if (!c.cusp.t_branch || std::abs(tb - c.cusp.t_star) < std::abs(*c.cusp.t_branch - c.cusp.t_star)) {
                    c.cusp.t_branch = tb;
                }
            }
        }
    }
}

std::string_view to_string(CuspKind k) {
    switch (k) {
        case CuspKind::none: return "none";
        case CuspKind::smooth_maximum: return "smooth_maximum";
        case CuspKind::cusp: return "cusp";
    }
    return "?";
}

double MagicCurve::temperature(std::size_t k) const {
    return beta[k] > 0.0 ? 1.0 / beta[k] : std::numeric_limits<double>::infinity();
}

LowTemperatureAnchor ferromagnet_anchor(const LatticeModel& model, int n) {
    SpinConfiguration up(model.site_count());
    double e = model.energy(up);
    return {e, kLn2, 4.0 * n * e, 2.0 * n * kLn2};
}

double bound_dx(double log_z_half, double log_z) { return -2.0 * log_z_half + log_z + kLn2; }

double bound_dref(double log_z, double beta, const ReferenceState& reference, std::size_t sites) {
    const double N = static_cast<double>(sites);
    return beta * reference.reference_energy / N + log_z - reference.log_degeneracy / N;
}

MagicCurve integrate_m2(const ObservableSeries& base, const ObservableSeries& coupled, const CurveOptions& options) {
    if (base.target != Target::base_z || coupled.target != Target::coupled_zm) {
        throw std::invalid_argument("integrate_m2 needs a base series and a coupled series");
    }
    if (base.sites != coupled.sites) throw std::invalid_argument("series sizes differ");
    auto pb = prepare(base, options.extrapolate, options.infinite_temperature_energy,
                      options.infinite_temperature_variance);
    auto pc = prepare(coupled, options.extrapolate, options.infinite_temperature_energy,
                      options.infinite_temperature_variance);
    int bins = std::max(pb.bins, pc.bins);
    if (pb.bins > 0 && pc.bins > 0 && pb.bins != pc.bins) {
        throw std::invalid_argument("base and coupled series differ in bin count");
    }
    Evaluator eval(pb, pc, options);
    std::vector<RawCurve> replicas;
    replicas.push_back(eval(-1));
    for (int k = 0; k < bins; ++k) replicas.push_back(eval(k));

    MagicCurve c;
    c.n = coupled.n;
    c.sites = coupled.sites;
    c.beta = eval.coupled_beta;
    c.m_n = assemble(replicas, &RawCurve::m, bins);
    c.log_z = assemble(replicas, &RawCurve::lz, bins);
    c.log_zm = assemble(replicas, &RawCurve::lzm, bins);
    c.dx = assemble(replicas, &RawCurve::dx, bins);
    c.dref = assemble(replicas, &RawCurve::dref, bins);
    c.d2m_dt2 = assemble(replicas, &RawCurve::d2, bins);
    c.energy = assemble(replicas, &RawCurve::e, bins);
    c.coupled_energy = assemble(replicas, &RawCurve::em, bins);
    c.overlap = assemble(replicas, &RawCurve::q, bins);
    c.excess_dx = assemble(replicas, &RawCurve::xdx, bins);
    c.excess_dref = assemble(replicas, &RawCurve::xdref, bins);
    c.has_dx = any_finite(c.dx);
    c.has_dref = options.reference.has_value();
    c.has_overlap = any_finite(c.overlap);
    if (options.reference) c.reference_label = std::string(to_string(options.reference->kind));
    if (options.anchor) {
        c.m_n_low = assemble(replicas, &RawCurve::mlow, bins);
        c.has_low_branch = true;
    }
    // M_n(0) = 0 and D_x(0) = 0 hold exactly.
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (c.beta[i] == 0.0) {
            c.m_n[i] = {0.0, 0.0};
            if (std::isfinite(c.dx[i].value)) c.dx[i] = {0.0, 0.0};
        }
    }
    const auto& bp = pb.series.points;
    for (std::size_t i = 0; i < pc.series.points.size(); ++i) {
        const auto& p = pc.series.points[i];
        bool noneq = p.nonequilibrated || bp[eval.coupled_in_base[i]].nonequilibrated;
        c.nonequilibrated.push_back(noneq);
        c.bimodal.push_back(p.histogram.size() > 0 && detect_bimodality(p.histogram).bimodal);
    }
    attach_cusp(c, options.cusp_jump_factor);
    return c;
}

Estimate log_partition(const ObservableSeries& base, double beta, bool extrapolate, double e0, double v0) {
    auto pb = prepare(base, extrapolate, e0, v0);
    auto grid = pb.series.betas();
    if (beta < 0.0 || beta > grid.back() + 1e-12) {
        throw std::invalid_argument("log_partition: beta outside the series coverage");
    }
    const double sites = static_cast<double>(base.sites);
    auto evaluate = [&](int k) {
        std::vector<double> e, de;
        for (const auto& p : pb.series.points) {
            double m1 = replica_mean(p.bin_e, k), m2 = replica_mean(p.bin_e2, k);
            e.push_back(m1 / sites);
            de.push_back(-(m2 - m1 * m1) / sites);
        }
        double total = 0.0;
        for (std::size_t j = 1; j < grid.size(); ++j) {
            double a = grid[j - 1], b = grid[j];
            if (a >= beta) break;
            double h = b - a;
            if (b <= beta + 1e-12) {
                total += 0.5 * h * (e[j - 1] + e[j]) + h * h / 12.0 * (de[j - 1] - de[j]);
                continue;
            }
            // Partial interval: integrate the cubic Hermite interpolant from a to beta.
            double t = (beta - a) / h;
            double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
            double i00 = t - t3 + t4 / 2.0, i10 = t2 / 2.0 - 2.0 * t3 / 3.0 + t4 / 4.0;
            double i01 = t3 - t4 / 2.0, i11 = -t3 / 3.0 + t4 / 4.0;
            total += h * (i00 * e[j - 1] + i10 * h * de[j - 1] + i01 * e[j] + i11 * h * de[j]);
            break;
        }
        return kLn2 - total;
    };
    double full = evaluate(-1);
    if (pb.bins < 2) return {full, 0.0};
    std::vector<double> loo;
    for (int k = 0; k < pb.bins; ++k) loo.push_back(evaluate(k));
    return jackknife(loo, full);
}

CuspLocation locate_crossing(const std::vector<double>& temperature, const std::vector<double>& h,
                             const std::vector<double>& m, double jump_factor) {
    CuspLocation out;
    const std::size_t K = temperature.size();
    // Order by decreasing temperature, skipping T = infinity where h = 0 exactly.
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < K; ++i) {
        if (std::isfinite(temperature[i]) && std::isfinite(h[i])) order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return temperature[a] > temperature[b]; });
    if (order.size() < 2) return out;
    std::size_t arg_max = order[0];
    for (std::size_t i : order) {
        if (m[i] > m[arg_max]) arg_max = i;
    }
    std::size_t pos_max = static_cast<std::size_t>(std::find(order.begin(), order.end(), arg_max) - order.begin());
    long best = -1;
    std::size_t best_dist = std::numeric_limits<std::size_t>::max();
    for (std::size_t j = 0; j + 1 < order.size(); ++j) {
        double a = h[order[j]], b = h[order[j + 1]];
        if (a < 0.0 && b >= 0.0) {
            std::size_t dist = pos_max >= j ? pos_max - j : j - pos_max;
            if (dist > 0 && pos_max == j + 1) dist = 0;
            if (dist < best_dist) {
                best_dist = dist;
                best = static_cast<long>(j);
            }
        }
    }
    if (best < 0) return out;
    std::size_t j = static_cast<std::size_t>(best);
    double ta = temperature[order[j]], tb = temperature[order[j + 1]];
    double ha = h[order[j]], hb = h[order[j + 1]];
    out.t_star = ta + (0.0 - ha) * (tb - ta) / (hb - ha);
    out.t_high = ta;
    out.t_low = tb;
    auto slope = [&](std::size_t q) {
        return std::abs((h[order[q + 1]] - h[order[q]]) / (temperature[order[q + 1]] - temperature[order[q]]));
    };
    double here = slope(j);
    double neighbour = 0.0;
    bool have_neighbour = false;
    if (j > 0) {
        neighbour = std::max(neighbour, slope(j - 1));
        have_neighbour = true;
    }
    if (j + 2 < order.size()) {
        neighbour = std::max(neighbour, slope(j + 1));
        have_neighbour = true;
    }
    out.kind = (have_neighbour && here > jump_factor * neighbour) ? CuspKind::cusp : CuspKind::smooth_maximum;
    return out;
}

CuspLocation locate_cusp(const ObservableSeries& base, const ObservableSeries& coupled, double jump_factor) {
    CurveOptions options;
    options.extrapolate = true;
    options.cusp_jump_factor = jump_factor;
    auto curve = integrate_m2(base, coupled, options);
    if (curve.cusp.kind == CuspKind::none) {
        throw std::runtime_error("locate_cusp: no sign change of 2n<E> - <E_M>/2 in range");
    }
    return curve.cusp;
}

SecondDerivative second_derivative(const std::vector<double>& beta, const std::vector<Estimate>& m,
                                   double max_beta_step) {
    if (beta.size() != m.size()) throw std::invalid_argument("second_derivative: size mismatch");
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < beta.size(); ++i) {
        if (beta[i] > 0.0) idx.push_back(i);
    }
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return beta[a] < beta[b]; });
    for (std::size_t k = 1; k < idx.size(); ++k) {
        if (beta[idx[k]] - beta[idx[k - 1]] > max_beta_step + 1e-12) {
            throw std::invalid_argument("second_derivative: beta spacing " +
                                        std::to_string(beta[idx[k]] - beta[idx[k - 1]]) + " exceeds " +
                                        std::to_string(max_beta_step));
        }
    }
    SecondDerivative out;
    out.positive_peak = -std::numeric_limits<double>::infinity();
    out.negative_peak = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
        double t0 = 1.0 / beta[idx[k + 1]], t1 = 1.0 / beta[idx[k]], t2 = 1.0 / beta[idx[k - 1]];
        const Estimate& f0 = m[idx[k + 1]];
        const Estimate& f1 = m[idx[k]];
        const Estimate& f2 = m[idx[k - 1]];
        double hl = t1 - t0, hr = t2 - t1;
        double c0 = 2.0 / (hl * (hl + hr)), c1 = -2.0 / (hl * hr), c2 = 2.0 / (hr * (hl + hr));
        double v = c0 * f0.value + c1 * f1.value + c2 * f2.value;
        double e = std::sqrt(c0 * c0 * f0.error * f0.error + c1 * c1 * f1.error * f1.error + c2 * c2 * f2.error * f2.error);
        out.t.push_back(t1);
        out.d2.push_back({v, e});
        if (v > out.positive_peak) {
            out.positive_peak = v;
            out.positive_peak_t = t1;
        }
        if (v < out.negative_peak) {
            out.negative_peak = v;
            out.negative_peak_t = t1;
        }
    }
    if (out.d2.empty()) throw std::invalid_argument("second_derivative needs at least three beta > 0 points");
    return out;
}

SecondDerivative peaks_of(const MagicCurve& curve, double t_min, double t_max) {
    SecondDerivative out;
    out.positive_peak = -std::numeric_limits<double>::infinity();
    out.negative_peak = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < curve.size(); ++i) {
        double t = curve.temperature(i);
        if (!std::isfinite(t) || t < t_min || t > t_max) continue;
        const auto& v = curve.d2m_dt2[i];
        if (!std::isfinite(v.value)) continue;
        out.t.push_back(t);
        out.d2.push_back(v);
        if (v.value > out.positive_peak) {
            out.positive_peak = v.value;
            out.positive_peak_t = t;
        }
        if (v.value < out.negative_peak) {
            out.negative_peak = v.value;
            out.negative_peak_t = t;
        }
    }
    return out;
}

ZeroPointEntropies zero_point_entropies(const ObservableSeries& base, const ObservableSeries& coupled, double e_min,
                                        double em_min, const CurveOptions& options) {
    CurveOptions o = options;
    o.anchor.reset();
    o.reference.reset();
    auto curve = integrate_m2(base, coupled, o);
    auto grid_base = base.betas();
    double bmax = curve.beta.back();
    if (std::abs(*std::max_element(grid_base.begin(), grid_base.end()) - bmax) > 1e-12) {
        throw std::invalid_argument("zero_point_entropies: base and coupled grids end at different beta");
    }
    const double N = static_cast<double>(curve.sites);
    const auto& lz = curve.log_z.back();
    const auto& lzm = curve.log_zm.back();
    ZeroPointEntropies out;
    out.s0 = {lz.value + bmax * e_min / N, lz.error};
    out.sm0 = {lzm.value + 0.5 * bmax * em_min / N, lzm.error};
    out.m_n_at_beta_max = curve.m_n.back();
    return out;
}

MagicCurve average_curves(const std::vector<MagicCurve>& curves) {
    if (curves.empty()) throw std::invalid_argument("average_curves: no curves");
    MagicCurve out = curves.front();
    const std::size_t R = curves.size();
    for (const auto& c : curves) {
        if (c.beta != out.beta || c.n != out.n) throw std::invalid_argument("average_curves: grids differ");
    }
    if (R == 1) return out;
    auto avg = [&](std::vector<Estimate> MagicCurve::*field) {
        std::vector<Estimate> res;
        const auto& first = out.*field;
        for (std::size_t i = 0; i < first.size(); ++i) {
            double s = 0.0;
            for (const auto& c : curves) s += (c.*field)[i].value;
            double mean = s / static_cast<double>(R);
            double ss = 0.0;
            for (const auto& c : curves) ss += ((c.*field)[i].value - mean) * ((c.*field)[i].value - mean);
            double se = std::sqrt(ss / static_cast<double>(R - 1) / static_cast<double>(R));
            res.push_back({mean, se});
        }
        out.*field = res;
    };
    avg(&MagicCurve::m_n);
    avg(&MagicCurve::log_z);
    avg(&MagicCurve::log_zm);
    avg(&MagicCurve::dx);
    avg(&MagicCurve::dref);
    avg(&MagicCurve::d2m_dt2);
    avg(&MagicCurve::energy);
    avg(&MagicCurve::coupled_energy);
    avg(&MagicCurve::overlap);
    avg(&MagicCurve::excess_dx);
    avg(&MagicCurve::excess_dref);
    if (out.has_low_branch) avg(&MagicCurve::m_n_low);
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (const auto& c : curves) {
            if (c.nonequilibrated[i]) out.nonequilibrated[i] = true;
            if (c.bimodal[i]) out.bimodal[i] = true;
        }
    }
    out.cusp = {};
    attach_cusp(out, 4.0);
    return out;
}

namespace {

MagicCurve analytic_curve(int n, const std::vector<double>& beta,
                          const std::function<void(double, double&, double&, double&, double&, double&)>& eval) {
    MagicCurve c;
    c.n = n;
    c.exact = true;
    c.has_dx = true;
    c.has_dref = true;
    c.reference_label = "ghz_zz";
    auto sorted = beta;
    std::sort(sorted.begin(), sorted.end());
    c.beta = sorted;
    auto m_of_t = [&](double t) {
        double lz, lzm, m, dx, dzz;
        eval(1.0 / t, lz, lzm, m, dx, dzz);
        return m;
    };
    for (double b : sorted) {
        double lz, lzm, m, dx, dzz;
        eval(b, lz, lzm, m, dx, dzz);
        c.m_n.push_back({m, 0.0});
        c.log_z.push_back({lz, 0.0});
        c.log_zm.push_back({lzm, 0.0});
        c.dx.push_back({dx, 0.0});
        c.dref.push_back({dzz, 0.0});
        const double bound_factor = 2.0 * n / (n - 1.0);
        c.excess_dx.push_back({m - bound_factor * dx, 0.0});
        c.excess_dref.push_back({m - bound_factor * dzz, 0.0});
        double h = 1e-5 * std::max(1.0, b);
        double lo = std::max(0.0, b - h), hi = b + h;
        double lz_lo, lzm_lo, lz_hi, lzm_hi, tmp;
        eval(lo, lz_lo, lzm_lo, tmp, tmp, tmp);
        eval(hi, lz_hi, lzm_hi, tmp, tmp, tmp);
        c.energy.push_back({-(lz_hi - lz_lo) / (hi - lo), 0.0});
        c.coupled_energy.push_back({-2.0 * (lzm_hi - lzm_lo) / (hi - lo), 0.0});
        double d2 = kNaN;
        if (b > 0.0) {
            double t = 1.0 / b, dt = 1e-3 * t;
            d2 = (m_of_t(t + dt) - 2.0 * m + m_of_t(t - dt)) / (dt * dt);
        }
        c.d2m_dt2.push_back({d2, 0.0});
        c.overlap.push_back({kNaN, 0.0});
        c.nonequilibrated.push_back(false);
        c.bimodal.push_back(false);
    }
    attach_cusp(c, 4.0);
    return c;
}

}  // namespace

MagicCurve analytic_chain_curve(int n, const std::vector<double>& beta, int L) {
    auto c = analytic_curve(n, beta, [n, L](double b, double& lz, double& lzm, double& m, double& dx, double& dzz) {
        if (L == 0) {
            lz = std::log(2.0 * std::cosh(b));
            lzm = std::log(coupled_top_eigenvalue(n, b));
            m = chain_sre(n, b);
            auto bounds = chain_bounds(b);
            dx = bounds.dx;
            dzz = bounds.dzz;
        } else {
            auto f = chain_finite(L, n, b);
            lz = f.log_z / L;
            lzm = f.log_zm / L;
            m = f.m_n / L;
            auto bounds = chain_bounds_finite(L, b);
            dx = bounds.dx;
            dzz = bounds.dzz;
        }
    });
    c.sites = static_cast<std::size_t>(L);
    return c;
}

MagicCurve mean_field_curve(int n, const std::vector<double>& beta) {
    return analytic_curve(n, beta, [n](double b, double& lz, double& lzm, double& m, double& dx, double& dzz) {
        if (b == 0.0) {
            lz = kLn2;
            lzm = 2.0 * n * kLn2;
            m = dx = 0.0;
            dzz = kLn2;
            return;
        }
        auto r = mean_field_sre(n, b);
        lz = r.log_z;
        lzm = r.log_zm;
        m = r.m_n;
        dx = r.dx;
        dzz = r.dzz;
    });
}

std::vector<InequalityAudit> audit_inequalities(const MagicCurve& curve, double sigmas, double exact_tol) {
    std::vector<InequalityAudit> out;
    auto run = [&](const std::string& name, const std::vector<Estimate>& excess) {
        InequalityAudit a;
        a.bound = name;
        a.max_excess = -std::numeric_limits<double>::infinity();
        a.worst_sigma = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (std::size_t i = 0; i < excess.size(); ++i) {
            const auto& e = excess[i];
            if (!std::isfinite(e.value)) continue;
            any = true;
            if (e.value > a.max_excess) {
                a.max_excess = e.value;
                a.sigma_at_max = e.error;
                a.beta_at_max = curve.beta[i];
            }
            double allowed = (curve.exact || e.error == 0.0) ? exact_tol : sigmas * e.error;
            if (e.value > allowed) a.pass = false;
            if (e.error > 0.0) a.worst_sigma = std::max(a.worst_sigma, e.value / e.error);
            else a.worst_sigma = std::max(a.worst_sigma, e.value > exact_tol ? std::numeric_limits<double>::infinity() : 0.0);
        }
        if (any) out.push_back(a);
    };
    if (curve.has_dx) run("D_x", curve.excess_dx);
    if (curve.has_dref) run(curve.reference_label.empty() ? "D_ref" : curve.reference_label, curve.excess_dref);
    return out;
}

}  // namespace smfmagic
