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

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "smfmagic/lattice.hpp"
#include "smfmagic/mc.hpp"
#include "smfmagic/thermo.hpp"

namespace smfmagic {

inline constexpr const char* kVersion = "0.3.0";

/// Config or invariant violation; the message carries the source line.
struct ConfigError : std::runtime_error {
    ConfigError(const std::string& what, int line)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line(line) {}
    int line;
};

/// Resume refused because the stored checkpoint is incompatible.
struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class TargetSet { base, coupled, both };

std::string_view to_string(TargetSet t);

/// Fully validated campaign description with every default materialized.
struct CampaignConfig {
    // [run]
    std::string name = "campaign";
    std::string output = "smfmagic-out";
    std::uint64_t master_seed = 1;
    TargetSet targets = TargetSet::both;
    int n = 2;
    long checkpoint_interval = 10000;

    // [model]
    ModelKind kind = ModelKind::ising_ferro_1d;
    int L = 0;
    std::optional<double> g;
    int realizations = 1;
    std::vector<std::uint64_t> disorder_seeds;
    std::string ground_states;

    // [grid]
    std::vector<double> beta_list;
    std::optional<double> beta_min, beta_max, beta_step;
    bool auto_half = true;
    bool extrapolate = false;

    // [protocol]
    Protocol protocol;
    /// Every coupled slot starts from the quenched best base configuration.
    bool cold_start_from_base = false;

    // [analysis]
    bool bound_dx = true;
    bool bound_ref = true;
    std::optional<ReferenceKind> reference;
    bool cusp = true;
    bool second_derivative = true;
    bool histograms = true;
    bool overlap = false;
    bool refine = true;
    int refine_points = 8;
    int refine_multiplier = 2;
    bool zero_point = false;
    double cusp_jump_factor = 4.0;

    /// Grid of the coupled ladder (the requested betas).
    std::vector<double> coupled_grid;
    /// Grid of the base ladder: the coupled grid plus beta/2 partners.
    std::vector<double> base_grid;
    /// One disorder seed per realization.
    std::vector<std::uint64_t> realization_seeds;

    /// Replaces the master seed and rederives seeds that depend on it.
    void set_master_seed(std::uint64_t seed);

    ReferenceKind reference_kind() const { return reference.value_or(default_reference(kind)); }
    int sites() const;
    /// INI text with all defaults; parses back to an identical config.
    std::string resolved_text() const;
    /// Hash of the resolved text without the output location.
    std::uint64_t hash() const;
    /// Hash of the [model] block alone.
    std::uint64_t model_hash() const;
};

CampaignConfig parse_config_text(const std::string& text);
CampaignConfig parse_config(const std::string& path);

/// Generates the model of one disorder realization.
LatticeModel build_realization(const CampaignConfig& config, int realization);

/// Literature critical temperatures used as markers in the report.
std::optional<double> critical_temperature(ModelKind kind, std::optional<double> g);

struct GroundStateInfo {
    double energy = 0.0;
    /// "file", "exhaustive", "quench" or "analytic".
    std::string source;
};

struct RealizationResult {
    int index = 0;
    std::uint64_t disorder_seed = 0;
    std::uint64_t model_hash = 0;
    std::optional<MagicCurve> curve;
    ObservableSeries base;
    ObservableSeries coupled;
    std::optional<GroundStateInfo> ground_state;
};

struct CampaignReport {
    std::string name;
    ModelKind kind = ModelKind::ising_ferro_1d;
    int L = 0;
    int n = 2;
    std::size_t sites = 0;
    bool complete = false;
    long sweeps_done = 0;
    std::vector<RealizationResult> realizations;
    /// Disorder average (or the single realization).
    std::optional<MagicCurve> curve;
    std::optional<double> t_c;
    std::vector<InequalityAudit> audits;
    std::optional<SecondDerivative> d2_peaks;
    std::optional<ZeroPointEntropies> zero_point;
    /// Realization-pooled overlap over T >= 2 T*, and at the lowest T.
    std::optional<Estimate> overlap_high_t;
    std::optional<Estimate> overlap_lowest_t;
    std::vector<std::string> warnings;
    std::vector<double> refinement_betas;
};

struct RunOptions {
    int workers = 1;
    /// Halt (with a checkpoint) once this many ladder sweeps have run in total.
    std::optional<long> halt_after_sweeps;
    /// Progress lines go to stderr.
    bool verbose = false;
};

/// Runs everything in `config` and writes all outputs into config.output.
CampaignReport run_campaign(const CampaignConfig& config, const RunOptions& options = {});

/// Continues a halted campaign from `dir`. The directory's config.resolved.ini is
/// reread, so a longer measurement length may be set there before resuming.
CampaignReport resume_campaign(const std::string& dir, const RunOptions& options = {});

/// Rebuilds summary.json and summary.txt for curves (one per label) and
/// writes them into `out_dir` when it is non-empty. `config` supplies the
/// name, model, size and T_c marker when known.
CampaignReport report_summary(const std::vector<MagicCurve>& curves, const std::string& out_dir = "",
                              const CampaignConfig* config = nullptr);

/// Curve CSV in the schema written by campaigns and the analytic command.
void write_curve_csv(std::ostream& out, const MagicCurve& curve, const std::string& header_comment);
MagicCurve read_curve_csv(std::istream& in);
MagicCurve read_curve_file(const std::string& path);

/// Human-readable summary table.
std::string format_summary(const CampaignReport& report);

}  // namespace smfmagic
