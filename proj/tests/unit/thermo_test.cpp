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


#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "smfmagic/analytic.hpp"
#include "smfmagic/exact.hpp"
#include "smfmagic/lattice.hpp"
#include "smfmagic/rng.hpp"
#include "smfmagic/thermo.hpp"

using namespace smfmagic;

namespace {

const double kLog2 = std::numbers::ln2;

std::vector<double> grid(double lo, double hi, double step) {
    std::vector<double> out;
    const int k = static_cast<int>(std::round((hi - lo) / step));
    for (int i = 0; i <= k; ++i) out.push_back(lo + step * i);
    return out;
}

// Series whose bins all carry the exact enumerated moments, optionally with
// Gaussian noise of width `noise` added to each bin mean.
ObservableSeries exact_series(const LatticeModel& model, const std::vector<double>& betas, Target target, int n,
                              int bins = 20, double noise = 0.0, std::uint64_t seed = 3) {
    ObservableSeries s;
    s.target = target;
    s.n = n;
    s.sites = model.site_count();
    RngStream rng(seed);
    for (double b : betas) {
        auto p = enumerate_partitions(model, b, target == Target::coupled_zm ? n : 0);
        double mean = target == Target::coupled_zm ? p.mean_coupled_energy : p.mean_energy;
        double var = target == Target::coupled_zm ? p.var_coupled_energy : p.var_energy;
        PointSeries pt;
        pt.beta = b;
        pt.target = target;
        for (int k = 0; k < bins; ++k) {
            double m = mean + noise * rng.normal();
            pt.bin_e.push_back(m);
            pt.bin_e2.push_back(var + m * m);
        }
        s.points.push_back(pt);
    }
    return s;
}

}  // namespace

TEST_CASE("integrated M2 matches enumeration on a small chain") {
    auto model = build_model(ModelKind::ising_ferro_1d, 4);
    auto bb = grid(0.0, 3.0, 0.025);
    auto bc = grid(0.0, 3.0, 0.05);
    auto base = exact_series(model, bb, Target::base_z, 2);
    auto coupled = exact_series(model, bc, Target::coupled_zm, 2);
    auto curve = integrate_m2(base, coupled);
    REQUIRE(curve.size() == bc.size());
    CHECK(curve.m_n[0].value == 0.0);
    CHECK(curve.log_z[0].value == doctest::Approx(kLog2).epsilon(1e-14));
    CHECK(curve.log_zm[0].value == doctest::Approx(4 * kLog2).epsilon(1e-14));
    CHECK(curve.dx[0].value == 0.0);
    double worst_m = 0.0, worst_dx = 0.0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        double b = curve.beta[i];
        auto p = enumerate_partitions(model, b, 2);
        auto half = enumerate_partitions(model, b / 2, 0);
        double m = -(p.log_zm - 4.0 * p.log_z) / 4.0;
        worst_m = std::max(worst_m, std::abs(curve.m_n[i].value - m));
        worst_dx = std::max(worst_dx, std::abs(curve.dx[i].value - bound_dx(half.log_z / 4.0, p.log_z / 4.0)));
        CHECK(curve.m_n[i].error == 0.0);
        CHECK(curve.energy[i].value == doctest::Approx(p.mean_energy / 4.0).epsilon(1e-12));
        CHECK(curve.coupled_energy[i].value == doctest::Approx(p.mean_coupled_energy / 4.0).epsilon(1e-12));
    }
    CHECK(worst_m < 1e-5);
    CHECK(worst_dx < 1e-6);
    for (const auto& a : audit_inequalities(curve)) CHECK_MESSAGE(a.pass, a.bound);
}

TEST_CASE("thermodynamic integration converges at fourth order") {
    auto model = build_model(ModelKind::ising_ferro_1d, 4);
    auto error_at = [&](double h) {
        auto b = grid(0.0, 2.0, h);
        auto curve = integrate_m2(exact_series(model, b, Target::base_z, 2, 2),
                                  exact_series(model, b, Target::coupled_zm, 2, 2));
        auto p = enumerate_partitions(model, 2.0, 2);
        return std::abs(curve.m_n.back().value + (p.log_zm - 4.0 * p.log_z) / 4.0);
    };
    double coarse = error_at(0.1), fine = error_at(0.05);
    CHECK(fine < 1e-5);
    CHECK(coarse / fine > 12.0);
}

TEST_CASE("Renyi index three uses the matching coupled replicas") {
    auto model = build_model(ModelKind::ising_ferro_1d, 4);
    auto b = grid(0.0, 2.0, 0.05);
    auto curve = integrate_m2(exact_series(model, b, Target::base_z, 3), exact_series(model, b, Target::coupled_zm, 3));
    auto p = enumerate_partitions(model, 2.0, 3);
    double m3 = (p.log_zm - 6.0 * p.log_z) / (1.0 - 3.0) / 4.0;
    CHECK(curve.n == 3);
    CHECK(curve.m_n.back().value == doctest::Approx(m3).epsilon(1e-5));
}

TEST_CASE("log partition function with partial intervals") {
    auto model = build_model(ModelKind::ising_ferro_2d, 3);
    auto base = exact_series(model, grid(0.0, 1.0, 0.02), Target::base_z, 2);
    for (double b : {0.0, 0.2, 0.37, 0.511, 1.0}) {
        auto lz = log_partition(base, b);
        CHECK(lz.value == doctest::Approx(enumerate_partitions(model, b, 0).log_z / 9.0).epsilon(1e-7));
    }
    CHECK_THROWS_AS(log_partition(base, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(log_partition(base, -0.1), std::invalid_argument);
}

TEST_CASE("infinite-chain energies integrate to log 2cosh") {
    ObservableSeries s;
    s.target = Target::base_z;
    s.sites = 1;
    for (double b : grid(0.0, 2.0, 0.01)) {
        PointSeries p;
        p.beta = b;
        double e = -std::tanh(b), var = 1.0 / (std::cosh(b) * std::cosh(b));
        p.bin_e = {e, e};
        p.bin_e2 = {var + e * e, var + e * e};
        s.points.push_back(p);
    }
    for (double b : {0.5, 1.0, 2.0}) {
        CHECK(log_partition(s, b).value == doctest::Approx(std::log(2.0 * std::cosh(b))).epsilon(1e-9));
    }
}

TEST_CASE("missing infinite-temperature point") {
    auto model = build_model(ModelKind::ising_ferro_1d, 4);
    auto b = grid(0.0, 1.5, 0.05);
    auto full = integrate_m2(exact_series(model, b, Target::base_z, 2), exact_series(model, b, Target::coupled_zm, 2));
    std::vector<double> tail(b.begin() + 1, b.end());
    auto base = exact_series(model, tail, Target::base_z, 2);
    auto coupled = exact_series(model, tail, Target::coupled_zm, 2);
    CHECK_THROWS_AS(integrate_m2(base, coupled), std::invalid_argument);
    CurveOptions o;
    o.extrapolate = true;
    o.infinite_temperature_energy = 0.0;
    o.infinite_temperature_variance = 4.0;
    auto ext = integrate_m2(base, coupled, o);
    REQUIRE(ext.size() == full.size());
    for (std::size_t i = 0; i < ext.size(); ++i) {
        CHECK(ext.beta[i] == doctest::Approx(full.beta[i]));
        CHECK(ext.m_n[i].value == doctest::Approx(full.m_n[i].value).epsilon(1e-12));
        CHECK(ext.log_z[i].value == doctest::Approx(full.log_z[i].value).epsilon(1e-12));
    }
}

TEST_CASE("inconsistent series are rejected") {
    auto model = build_model(ModelKind::ising_ferro_1d, 4);
    auto b = grid(0.0, 1.0, 0.1);
    auto base = exact_series(model, b, Target::base_z, 2);
    auto coupled = exact_series(model, b, Target::coupled_zm, 2);
    CHECK_THROWS_AS(integrate_m2(coupled, base), std::invalid_argument);
    auto shorter = exact_series(model, b, Target::coupled_zm, 2, 10);
    CHECK_THROWS_AS(integrate_m2(base, shorter), std::invalid_argument);
    auto offgrid = exact_series(model, {0.0, 0.15, 0.3}, Target::coupled_zm, 2);
    CHECK_THROWS(integrate_m2(base, offgrid));
    ObservableSeries empty;
    CHECK_THROWS_AS(log_partition(empty, 0.0), std::invalid_argument);
}

TEST_CASE("jackknife errors cover the exact values") {
    auto model = build_model(ModelKind::ising_ferro_1d, 4);
    auto b = grid(0.0, 1.5, 0.05);
    auto base = exact_series(model, b, Target::base_z, 2, 20, 0.05, 11);
    auto coupled = exact_series(model, b, Target::coupled_zm, 2, 20, 0.2, 12);
    auto curve = integrate_m2(base, coupled);
    int outside = 0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        auto p = enumerate_partitions(model, curve.beta[i], 2);
        double m = -(p.log_zm - 4.0 * p.log_z) / 4.0;
        CHECK(curve.m_n[i].error > 0.0);
        if (std::abs(curve.m_n[i].value - m) > 3.0 * curve.m_n[i].error) ++outside;
    }
    CHECK(outside <= 3);
}

TEST_CASE("low-temperature branch from the ferromagnet anchor") {
    auto model = build_model(ModelKind::ising_ferro_1d, 4);
    auto anchor = ferromagnet_anchor(model, 2);
    CHECK(anchor.e_min == -4.0);
    CHECK(anchor.em_min == -32.0);
    CHECK(anchor.s0 == doctest::Approx(kLog2));
    CHECK(anchor.sm0 == doctest::Approx(4 * kLog2));
    auto b = grid(0.0, 6.0, 0.05);
    CurveOptions o;
    o.anchor = anchor;
    auto curve = integrate_m2(exact_series(model, b, Target::base_z, 2), exact_series(model, b, Target::coupled_zm, 2), o);
    REQUIRE(curve.has_low_branch);
    for (std::size_t i = 0; i < curve.size(); ++i) {
        if (curve.beta[i] < 3.0) continue;
        CHECK(curve.m_n_low[i].value == doctest::Approx(curve.m_n[i].value).epsilon(1e-4).scale(1.0));
    }
}

TEST_CASE("zero-point entropies of the ferromagnetic chain") {
    auto model = build_model(ModelKind::ising_ferro_1d, 4);
    auto b = grid(0.0, 8.0, 0.05);
    auto z = zero_point_entropies(exact_series(model, b, Target::base_z, 2), exact_series(model, b, Target::coupled_zm, 2),
                                  -4.0, -32.0);
    CHECK(z.s0.value == doctest::Approx(kLog2 / 4.0).epsilon(1e-6).scale(1.0));
    CHECK(z.sm0.value == doctest::Approx(kLog2).epsilon(1e-6).scale(1.0));
    CHECK(z.m_n_at_beta_max.value == doctest::Approx(0.0).epsilon(1e-6).scale(1.0));
}

TEST_CASE("inequality bounds") {
    CHECK(bound_dx(kLog2, kLog2) == doctest::Approx(0.0));
    ReferenceState r;
    r.reference_energy = -8.0;
    r.log_degeneracy = kLog2;
    CHECK(bound_dref(1.5, 0.5, r, 4) == doctest::Approx(0.5 * -2.0 + 1.5 - kLog2 / 4.0));
}

TEST_CASE("second derivative on non-uniform temperature grids") {
    std::vector<double> beta = grid(0.1, 2.0, 0.01);
    beta.insert(beta.begin(), 0.0);
    std::vector<Estimate> m;
    for (double b : beta) m.push_back({b > 0 ? 0.7 / (b * b) : 0.0, 0.01});
    auto d = second_derivative(beta, m);
    REQUIRE(d.t.size() == beta.size() - 3);
    for (std::size_t i = 0; i < d.t.size(); ++i) {
        CHECK(d.d2[i].value == doctest::Approx(1.4).epsilon(1e-8));
        CHECK(d.d2[i].error > 0.0);
    }
    auto coarse = grid(0.1, 1.0, 0.05);
    std::vector<Estimate> mc(coarse.size(), {0.0, 0.0});
    CHECK_THROWS_AS(second_derivative(coarse, mc), std::invalid_argument);
    CHECK_NOTHROW(second_derivative(coarse, mc, 0.05));
    CHECK_THROWS_AS(second_derivative({0.1, 0.11}, {{0, 0}, {0, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(second_derivative({0.1, 0.11}, {{0, 0}}), std::invalid_argument);

    std::vector<double> b2 = grid(0.2, 2.0, 0.01);
    std::vector<Estimate> bump;
    for (double b : b2) {
        double t = 1.0 / b;
        bump.push_back({std::exp(-(t - 1.0) * (t - 1.0) / 0.02), 0.0});
    }
    auto pk = second_derivative(b2, bump);
    CHECK(pk.negative_peak_t == doctest::Approx(1.0).epsilon(0.02));
    CHECK(pk.negative_peak < 0.0);
    CHECK(pk.positive_peak > 0.0);
}

TEST_CASE("crossing classification") {
    std::vector<double> t, smooth, kink, none, m;
    for (double x = 3.0; x > 0.2; x -= 0.05) {
        t.push_back(x);
        smooth.push_back(1.0 - x);
        kink.push_back(x > 1.001 ? -0.1 - 0.01 * (x - 1.0) : 0.1 + 0.01 * (1.0 - x));
        none.push_back(-1.0 - x);
        m.push_back(-(x - 1.0) * (x - 1.0));
    }
    auto s = locate_crossing(t, smooth, m);
    CHECK(s.kind == CuspKind::smooth_maximum);
    CHECK(s.t_star == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(s.t_low <= s.t_star);
    CHECK(s.t_high >= s.t_star);
    auto k = locate_crossing(t, kink, m);
    CHECK(k.kind == CuspKind::cusp);
    CHECK(k.t_star > 0.95);
    CHECK(k.t_star < 1.05);
    CHECK(locate_crossing(t, none, m).kind == CuspKind::none);
    std::vector<double> inf_t = {std::numeric_limits<double>::infinity(), 1.0};
    CHECK(locate_crossing(inf_t, {0.0, 1.0}, {0.0, 0.0}).kind == CuspKind::none);
    CHECK(to_string(CuspKind::cusp) == "cusp");
}

TEST_CASE("exact chain curve has a smooth maximum only") {
    auto c = analytic_chain_curve(2, grid(0.0, 3.0, 0.01));
    CHECK(c.exact);
    CHECK(c.cusp.kind == CuspKind::smooth_maximum);
    std::size_t arg = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (c.m_n[i].value > c.m_n[arg].value) arg = i;
    }
    CHECK(std::abs(c.cusp.t_star - c.temperature(arg)) < 0.1);
    for (const auto& a : audit_inequalities(c)) CHECK_MESSAGE(a.pass, a.bound);
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(c.m_n[i].value == doctest::Approx(chain_sre(2, c.beta[i])).epsilon(1e-12));
    }
    auto fin = analytic_chain_curve(2, grid(0.0, 1.0, 0.1), 6);
    CHECK(fin.sites == 6);
    CHECK(fin.m_n.back().value == doctest::Approx(chain_finite(6, 2, 1.0).m_n / 6.0).epsilon(1e-12));
}

TEST_CASE("mean-field curve shows a cusp") {
    std::vector<double> beta;
    for (double t = 2.0; t > 0.3; t -= 0.005) beta.push_back(1.0 / t);
    beta.push_back(0.0);
    auto c = mean_field_curve(2, beta);
    CHECK(c.cusp.kind == CuspKind::cusp);
    double tc = mean_field_cusp_temperature(2);
    CHECK(c.cusp.t_star == doctest::Approx(tc).epsilon(0.01));
    for (const auto& a : audit_inequalities(c)) CHECK_MESSAGE(a.pass, a.bound);
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (c.temperature(i) >= 1.0) CHECK(std::abs(c.m_n[i].value) <= 1e-10);
    }
}

TEST_CASE("audit flags a violated bound") {
    auto c = analytic_chain_curve(2, grid(0.0, 1.0, 0.1));
    c.excess_dx[4].value = 1e-3;
    auto audits = audit_inequalities(c);
    REQUIRE(!audits.empty());
    CHECK(audits[0].bound == "D_x");
    CHECK_FALSE(audits[0].pass);
    CHECK(audits[0].beta_at_max == doctest::Approx(0.4));
    c.exact = false;
    c.excess_dx[4] = {1e-3, 1e-3};
    CHECK(audit_inequalities(c)[0].pass);
}

TEST_CASE("disorder average") {
    auto model = build_model(ModelKind::ising_ferro_1d, 4);
    auto b = grid(0.0, 1.0, 0.05);
    auto c1 = integrate_m2(exact_series(model, b, Target::base_z, 2, 20, 0.05, 1),
                           exact_series(model, b, Target::coupled_zm, 2, 20, 0.1, 2));
    auto c2 = integrate_m2(exact_series(model, b, Target::base_z, 2, 20, 0.05, 3),
                           exact_series(model, b, Target::coupled_zm, 2, 20, 0.1, 4));
    auto avg = average_curves({c1, c2});
    for (std::size_t i = 0; i < avg.size(); ++i) {
        double a = c1.m_n[i].value, bb = c2.m_n[i].value;
        CHECK(avg.m_n[i].value == doctest::Approx(0.5 * (a + bb)));
        CHECK(avg.m_n[i].error == doctest::Approx(0.5 * std::abs(a - bb)).epsilon(1e-9).scale(1.0));
    }
    CHECK(average_curves({c1}).m_n[3].value == c1.m_n[3].value);
    auto c3 = c1;
    c3.beta.back() += 0.01;
    CHECK_THROWS_AS(average_curves({c1, c3}), std::invalid_argument);
    CHECK_THROWS_AS(average_curves({}), std::invalid_argument);
}

TEST_CASE("bimodal histograms inside the bracket mark coexistence") {
    auto c = analytic_chain_curve(2, grid(0.0, 3.0, 0.05));
    REQUIRE(c.cusp.kind == CuspKind::smooth_maximum);
    for (std::size_t i = 0; i < c.size(); ++i) {
        double t = c.temperature(i);
        if (t >= c.cusp.t_low - 1e-9 && t <= c.cusp.t_high + 1e-9) c.bimodal[i] = true;
    }
    attach_cusp(c);
    CHECK(c.cusp.coexistence);
    CHECK(c.cusp.kind == CuspKind::cusp);
}
