# Copyright 2026 The smfmagic Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math

import numpy as np
import pytest

import smfmagic as sm


def test_model_energies():
    chain = sm.build_model(sm.ModelKind.ising_ferro_1d, 8)
    assert chain.site_count == 8
    assert chain.energy([1] * 8) == -8.0
    assert chain.energy([1, -1] * 4) == 8.0
    assert chain.coupled_energy([[1] * 8] * 4) == -64.0
    with pytest.raises(ValueError):
        sm.build_model(sm.ModelKind.j1j2, 4)
    table = sm.energy_table(sm.build_model(sm.ModelKind.ising_ferro_1d, 4))
    assert table.shape == (16,)
    assert table.min() == -4.0


def test_oracles_agree():
    model = sm.build_model(sm.ModelKind.ising_ferro_1d, 5)
    for beta in (0.0, 0.3, 1.0):
        psi = sm.ExactWavefunction.from_model(model, beta)
        pauli = sm.sre_pauli(psi, 2)
        assert abs(pauli - sm.sre_four_copy(psi, 2)) < 1e-10
        assert abs(pauli - sm.magic_from_partitions(model, beta)) < 1e-10


def test_renyi_magic_of_ghz_is_zero():
    model = sm.build_model(sm.ModelKind.ising_ferro_1d, 4)
    psi = sm.ExactWavefunction.from_model(model, 40.0)
    assert abs(sm.sre_pauli(psi, 2)) < 1e-9
    assert sm.exact_bound(psi, model, sm.ReferenceKind.ghz_zz) < 1e-9


def test_chain_closed_forms():
    for n in (2, 3, 4):
        for beta in (0.2, 1.0, 2.5):
            closed = (2 ** (2 * n) + (2 * math.cosh(beta)) ** (2 * n) + (2 * math.sinh(beta)) ** (2 * n)) / 2
            assert sm.coupled_top_eigenvalue(n, beta) == pytest.approx(closed, rel=1e-12)
            assert sm.numerical_top_eigenvalue(n, beta) == pytest.approx(closed, rel=1e-12)
    assert sm.chain_finite(256, 2, 0.5)["m_n"] / 256 == pytest.approx(sm.chain_sre(2, 0.5), abs=1e-9)


def test_analytic_curves():
    beta = np.linspace(0.0, 3.0, 301)
    curve = sm.analytic_chain_curve(2, list(beta))
    assert len(curve) == 301
    assert curve.cusp.kind == sm.CuspKind.smooth_maximum
    assert all(a["pass"] for a in sm.audit_inequalities(curve))
    assert curve.m_n["value"][0] == 0.0
    mf = sm.mean_field_curve(2, [0.0] + [1.0 / t for t in np.arange(1.2, 0.3, -0.005)])
    assert mf.cusp.kind == sm.CuspKind.cusp
    assert mf.cusp.t_star == pytest.approx(sm.mean_field_cusp_temperature(2), rel=0.01)
    assert "beta" in curve.to_csv()


def test_config_errors():
    with pytest.raises(sm.ConfigError, match="line 4"):
        sm.parse_config_text("[model]\nkind = ising_ferro_1d\nL = 8\nbogus = 1\n[grid]\nbeta = 0\n")
    cfg = sm.parse_config_text("[model]\nkind = ising_ferro_1d\nL = 8\n[grid]\nbeta = 0, 0.4\n")
    assert cfg.base_grid == [0.0, 0.2, 0.4]


def test_small_campaign(tmp_path):
    text = (
        "[model]\nkind = ising_ferro_1d\nL = 8\n[grid]\nbeta_min = 0\nbeta_max = 1\nbeta_step = 0.1\n"
        "[protocol]\nequilibration = 200\nmeasurement = 4000\nbin_size = 100\n[analysis]\nrefine = false\n"
    )
    cfg = sm.parse_config_text(text)
    cfg.output = str(tmp_path / "run")
    report = sm.run_campaign(cfg)
    assert report.complete
    curve = report.curve
    exact = [sm.chain_finite(8, 2, b)["m_n"] / 8 for b in curve.beta]
    dev = np.abs(curve.m_n["value"] - exact)
    assert np.all(dev <= 5 * curve.m_n["error"] + 1e-12)
    again = sm.read_curve_file(str(tmp_path / "run" / "curve.csv"))
    assert np.allclose(again.m_n["value"], curve.m_n["value"])
    assert "status: complete" in report.summary()
