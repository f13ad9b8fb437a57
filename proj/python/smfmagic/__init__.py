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

"""Stabilizer Renyi entropy of stochastic-matrix-form ground states."""

from ._core import (
    CampaignConfig,
    CampaignReport,
    CheckpointError,
    ConfigError,
    CuspKind,
    CuspLocation,
    ExactWavefunction,
    LatticeModel,
    MagicCurve,
    ModelKind,
    PartitionSums,
    ReferenceKind,
    __version__,
    analytic_chain_curve,
    audit_inequalities,
    build_model,
    chain_finite,
    chain_sre,
    coupled_top_eigenvalue,
    energy_table,
    enumerate_partitions,
    exact_bound,
    mean_field_cusp_temperature,
    mean_field_curve,
    mean_field_sre,
    numerical_top_eigenvalue,
    parse_config,
    parse_config_text,
    read_curve_file,
    resume_campaign,
    run_campaign,
    sre_four_copy,
    sre_pauli,
)


def magic_from_partitions(model, beta, n=2):
    """M_n from exact log Z and log Z_M of a small model."""
    sums = enumerate_partitions(model, beta, n)
    return (sums.log_zm - 2 * n * sums.log_z) / (1 - n)
