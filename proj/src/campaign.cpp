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

#include "smfmagic/campaign.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "smfmagic/exact.hpp"
#include "smfmagic/rng.hpp"

namespace smfmagic {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'S', 'M', 'F', 'M', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::string num(double x) { return fmt::format("{:.17g}", x); }

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        auto t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

double round_beta(double b) { return std::round(b * 1e12) / 1e12; }

// ---------------------------------------------------------------------------
// INI reader

struct Entry {
    std::string value;
    int line = 0;
};

struct IniFile {
    std::map<std::string, std::map<std::string, Entry>> sections;
    std::map<std::string, int> section_line;

    const Entry* find(const std::string& section, const std::string& key) const {
        auto s = sections.find(section);
        if (s == sections.end()) return nullptr;
        auto k = s->second.find(key);
        return k == s->second.end() ? nullptr : &k->second;
    }
};

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> keys = {
        {"run", {"name", "output", "master_seed", "targets", "n", "checkpoint_interval"}},
        {"model", {"kind", "L", "g", "realizations", "disorder_seeds", "ground_states"}},
        {"grid", {"beta", "beta_min", "beta_max", "beta_step", "auto_half", "extrapolate"}},
        {"protocol",
         {"equilibration", "measurement", "bin_size", "sampler", "wolff_per_sweep", "parallel_tempering",
          "sweeps_per_exchange", "recompute_interval", "hot_start_fraction", "histogram_bins", "cold_start"}},
        {"analysis",
         {"bounds", "reference", "cusp", "second_derivative", "histograms", "overlap", "refine", "refine_points",
          "refine_multiplier", "zero_point", "cusp_jump_factor"}},
    };
    return keys;
}

IniFile read_ini(const std::string& text) {
    IniFile ini;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        auto hash = raw.find(" #");
        if (hash != std::string::npos) raw.erase(hash);
        auto t = trim(raw);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError("malformed section header '" + t + "'", line);
            section = trim(t.substr(1, t.size() - 2));
            if (!known_keys().count(section)) throw ConfigError("unknown section [" + section + "]", line);
            if (ini.section_line.count(section)) throw ConfigError("duplicate section [" + section + "]", line);
            ini.section_line[section] = line;
            ini.sections[section];
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("expected 'key = value', got '" + t + "'", line);
        if (section.empty()) throw ConfigError("key outside of any section", line);
        auto key = trim(t.substr(0, eq));
        auto value = trim(t.substr(eq + 1));
        if (!known_keys().at(section).count(key)) {
            throw ConfigError("unknown key '" + key + "' in [" + section + "]", line);
        }
        auto& sec = ini.sections[section];
        if (sec.count(key)) throw ConfigError("duplicate key '" + key + "'", line);
        sec[key] = {value, line};
    }
    return ini;
}

template <typename T>
T parse_number(const Entry& e, const std::string& key) {
    T value{};
    const char* first = e.value.data();
    const char* last = first + e.value.size();
    std::from_chars_result r;
    if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (e.value.size() > 2 && e.value[0] == '0' && (e.value[1] == 'x' || e.value[1] == 'X')) {
            r = std::from_chars(first + 2, last, value, 16);
        } else {
            r = std::from_chars(first, last, value);
        }
    } else {
        r = std::from_chars(first, last, value);
    }
    if (r.ec != std::errc() || r.ptr != last) {
        throw ConfigError("invalid value '" + e.value + "' for " + key, e.line);
    }
    return value;
}

bool parse_bool(const Entry& e, const std::string& key) {
    std::string v = e.value;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    throw ConfigError("invalid boolean '" + e.value + "' for " + key, e.line);
}

TargetSet parse_target_set(const Entry& e) {
    if (e.value == "both") return TargetSet::both;
    if (e.value == "base_Z" || e.value == "base") return TargetSet::base;
    if (e.value == "coupled_ZM" || e.value == "coupled") return TargetSet::coupled;
    throw ConfigError("targets must be base_Z, coupled_ZM or both", e.line);
}

std::string join_numbers(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt::format("{}", v[i]);
    return out;
}

}  // namespace

std::string_view to_string(TargetSet t) {
    switch (t) {
        case TargetSet::base: return "base_Z";
        case TargetSet::coupled: return "coupled_ZM";
        case TargetSet::both: return "both";
    }
    return "?";
}

int CampaignConfig::sites() const {
    switch (kind) {
        case ModelKind::ising_ferro_1d:
        case ModelKind::infinite_range: return L;
        case ModelKind::ising_ferro_3d:
        case ModelKind::edwards_anderson: return L * L * L;
        default: return L * L;
    }
}

CampaignConfig parse_config_text(const std::string& text) {
    IniFile ini = read_ini(text);
    CampaignConfig c;
    auto get = [&](const char* s, const char* k) { return ini.find(s, k); };
    auto section_line = [&](const char* s) {
        auto it = ini.section_line.find(s);
        return it == ini.section_line.end() ? 0 : it->second;
    };

    if (auto e = get("run", "name")) c.name = e->value;
    if (auto e = get("run", "output")) c.output = e->value;
    if (auto e = get("run", "master_seed")) c.master_seed = parse_number<std::uint64_t>(*e, "master_seed");
    if (auto e = get("run", "targets")) c.targets = parse_target_set(*e);
    if (auto e = get("run", "n")) {
        c.n = parse_number<int>(*e, "n");
        if (c.n < 2 || c.n > 4) throw ConfigError("n must be 2, 3 or 4 for Monte Carlo campaigns", e->line);
    }
    if (auto e = get("run", "checkpoint_interval")) {
        c.checkpoint_interval = parse_number<long>(*e, "checkpoint_interval");
        if (c.checkpoint_interval <= 0) throw ConfigError("checkpoint_interval must be positive", e->line);
    }

    auto kind_entry = get("model", "kind");
    if (!kind_entry) throw ConfigError("[model] kind is required", section_line("model"));
    try {
        c.kind = parse_model_kind(kind_entry->value);
    } catch (const std::exception& ex) {
        throw ConfigError(ex.what(), kind_entry->line);
    }
    auto l_entry = get("model", "L");
    if (!l_entry) throw ConfigError("[model] L is required", section_line("model"));
    c.L = parse_number<int>(*l_entry, "L");
    if (auto e = get("model", "g")) c.g = parse_number<double>(*e, "g");
    if (c.kind == ModelKind::j1j2 && !c.g) throw ConfigError("j1j2 requires g = J2/J1", kind_entry->line);
    if (auto e = get("model", "realizations")) {
        c.realizations = parse_number<int>(*e, "realizations");
        if (c.realizations < 1) throw ConfigError("realizations must be >= 1", e->line);
        if (c.realizations > 1 && c.kind != ModelKind::edwards_anderson) {
            throw ConfigError("multiple realizations require a disordered model", e->line);
        }
    }
    if (auto e = get("model", "disorder_seeds")) {
        for (const auto& item : split_list(e->value)) {
            c.disorder_seeds.push_back(parse_number<std::uint64_t>(Entry{item, e->line}, "disorder_seeds"));
        }
        if (!get("model", "realizations")) c.realizations = static_cast<int>(c.disorder_seeds.size());
        if (static_cast<int>(c.disorder_seeds.size()) != c.realizations) {
            throw ConfigError(fmt::format("{} disorder seeds given for {} realizations", c.disorder_seeds.size(),
                                          c.realizations),
                              e->line);
        }
    }
    if (auto e = get("model", "ground_states")) c.ground_states = e->value;
    try {
        (void)build_realization(c, 0);
    } catch (const std::exception& ex) {
        throw ConfigError(ex.what(), l_entry->line);
    }

    auto list = get("grid", "beta");
    auto bmin = get("grid", "beta_min");
    auto bmax = get("grid", "beta_max");
    auto bstep = get("grid", "beta_step");
    int grid_line = list ? list->line : (bmin ? bmin->line : section_line("grid"));
    if (list && (bmin || bmax || bstep)) throw ConfigError("give either beta or a beta range, not both", list->line);
    if (list) {
        for (const auto& item : split_list(list->value)) {
            c.beta_list.push_back(parse_number<double>(Entry{item, list->line}, "beta"));
        }
        if (c.beta_list.empty()) throw ConfigError("empty beta list", list->line);
    } else {
        if (!bmin || !bmax || !bstep) {
            throw ConfigError("[grid] needs beta or all of beta_min, beta_max, beta_step", grid_line);
        }
        c.beta_min = parse_number<double>(*bmin, "beta_min");
        c.beta_max = parse_number<double>(*bmax, "beta_max");
        c.beta_step = parse_number<double>(*bstep, "beta_step");
        if (!(*c.beta_step > 0.0) || *c.beta_max < *c.beta_min) {
            throw ConfigError("beta range needs beta_step > 0 and beta_max >= beta_min", bstep->line);
        }
    }
    if (auto e = get("grid", "auto_half")) c.auto_half = parse_bool(*e, "auto_half");
    if (auto e = get("grid", "extrapolate")) c.extrapolate = parse_bool(*e, "extrapolate");

    if (auto e = get("protocol", "equilibration")) c.protocol.equilibration_sweeps = parse_number<long>(*e, "equilibration");
    if (auto e = get("protocol", "measurement")) c.protocol.measurement_sweeps = parse_number<long>(*e, "measurement");
    if (auto e = get("protocol", "bin_size")) c.protocol.bin_size = parse_number<long>(*e, "bin_size");
    if (auto e = get("protocol", "sampler")) {
        try {
            c.protocol.sampler = parse_sampler(e->value);
        } catch (const std::exception& ex) {
            throw ConfigError(ex.what(), e->line);
        }
    }
    if (auto e = get("protocol", "wolff_per_sweep")) c.protocol.wolff_per_sweep = parse_number<int>(*e, "wolff_per_sweep");
    if (auto e = get("protocol", "parallel_tempering")) c.protocol.parallel_tempering = parse_bool(*e, "parallel_tempering");
    if (auto e = get("protocol", "sweeps_per_exchange")) c.protocol.sweeps_per_exchange = parse_number<int>(*e, "sweeps_per_exchange");
    if (auto e = get("protocol", "recompute_interval")) c.protocol.recompute_interval = parse_number<long>(*e, "recompute_interval");
    if (auto e = get("protocol", "hot_start_fraction")) c.protocol.hot_start_fraction = parse_number<double>(*e, "hot_start_fraction");
    if (auto e = get("protocol", "histogram_bins")) c.protocol.histogram_bins = parse_number<std::size_t>(*e, "histogram_bins");
    c.cold_start_from_base = (c.kind == ModelKind::edwards_anderson || c.kind == ModelKind::j1j2 ||
                              c.kind == ModelKind::triangular_afm) &&
                             c.targets == TargetSet::both;
    if (auto e = get("protocol", "cold_start")) {
        if (e->value == "uniform") {
            c.cold_start_from_base = false;
        } else if (e->value == "base_best") {
            if (c.targets != TargetSet::both) {
                throw ConfigError("cold_start = base_best needs targets = both", e->line);
            }
            c.cold_start_from_base = true;
        } else {
            throw ConfigError("cold_start must be uniform or base_best, got '" + e->value + "'", e->line);
        }
    }
    try {
        c.protocol.validate();
    } catch (const std::exception& ex) {
        throw ConfigError(ex.what(), section_line("protocol"));
    }
    if (c.protocol.sampler == Sampler::wolff) {
        auto model = build_realization(c, 0);
        if (!model.is_uniform_ferromagnet() || c.targets != TargetSet::base) {
            throw ConfigError("sampler = wolff needs a uniform ferromagnet and targets = base_Z; use mixed",
                              get("protocol", "sampler")->line);
        }
    }

    if (auto e = get("analysis", "bounds")) {
        c.bound_dx = c.bound_ref = false;
        for (const auto& item : split_list(e->value)) {
            if (item == "dx" || item == "D_x") c.bound_dx = true;
            else if (item == "ref" || item == "D_ref") c.bound_ref = true;
            else if (item != "none") throw ConfigError("unknown bound '" + item + "' (use dx, ref or none)", e->line);
        }
    }
    if (auto e = get("analysis", "reference")) {
        try {
            c.reference = parse_reference_kind(e->value);
        } catch (const std::exception& ex) {
            throw ConfigError(ex.what(), e->line);
        }
    }
    if (auto e = get("analysis", "cusp")) c.cusp = parse_bool(*e, "cusp");
    if (auto e = get("analysis", "second_derivative")) c.second_derivative = parse_bool(*e, "second_derivative");
    if (auto e = get("analysis", "histograms")) c.histograms = parse_bool(*e, "histograms");
    c.overlap = c.kind == ModelKind::edwards_anderson;
    if (auto e = get("analysis", "overlap")) c.overlap = parse_bool(*e, "overlap");
    if (auto e = get("analysis", "refine")) c.refine = parse_bool(*e, "refine");
    if (auto e = get("analysis", "refine_points")) {
        c.refine_points = parse_number<int>(*e, "refine_points");
        if (c.refine_points < 1) throw ConfigError("refine_points must be >= 1", e->line);
    }
    if (auto e = get("analysis", "refine_multiplier")) {
        c.refine_multiplier = parse_number<int>(*e, "refine_multiplier");
        if (c.refine_multiplier < 1) throw ConfigError("refine_multiplier must be >= 1", e->line);
    }
    c.zero_point = c.kind == ModelKind::triangular_afm;
    if (auto e = get("analysis", "zero_point")) c.zero_point = parse_bool(*e, "zero_point");
    if (auto e = get("analysis", "cusp_jump_factor")) c.cusp_jump_factor = parse_number<double>(*e, "cusp_jump_factor");
    if (c.bound_ref) {
        try {
            auto model = build_realization(c, 0);
            if (c.reference_kind() != ReferenceKind::ground_state_file) (void)make_reference(model, c.reference_kind());
        } catch (const std::exception& ex) {
            auto e = get("analysis", "reference");
            throw ConfigError(ex.what(), e ? e->line : kind_entry->line);
        }
    }

    // Grids.
    std::vector<double> grid;
    if (!c.beta_list.empty()) {
        for (double b : c.beta_list) grid.push_back(round_beta(b));
    } else {
        long count = static_cast<long>(std::floor((*c.beta_max - *c.beta_min) / *c.beta_step + 1e-9));
        for (long k = 0; k <= count; ++k) grid.push_back(round_beta(*c.beta_min + k * *c.beta_step));
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    if (grid.front() < 0.0) throw ConfigError("beta must be >= 0", grid_line);
    if (grid.front() != 0.0 && !c.extrapolate) {
        throw ConfigError("beta grid lacks beta = 0; add it or set extrapolate = true", grid_line);
    }
    c.coupled_grid = grid;
    std::set<double> base(grid.begin(), grid.end());
    auto has = [&](double b) {
        for (double x : base) {
            if (std::abs(x - b) <= 1e-12) return true;
        }
        return false;
    };
    if (c.bound_dx && c.targets != TargetSet::coupled) {
        std::vector<double> missing;
        for (double b : grid) {
            double h = round_beta(0.5 * b);
            if (!has(h)) missing.push_back(h);
        }
        if (!missing.empty()) {
            if (!c.auto_half) {
                throw ConfigError("D_x needs beta/2 partners missing from the grid: " + join_numbers(missing), grid_line);
            }
            for (double h : missing) base.insert(h);
        }
    }
    c.base_grid.assign(base.begin(), base.end());

    if (c.kind == ModelKind::edwards_anderson) {
        if (!c.disorder_seeds.empty()) {
            c.realization_seeds = c.disorder_seeds;
        } else {
            for (int r = 0; r < c.realizations; ++r) {
                c.realization_seeds.push_back(hash_combine(mix64(c.master_seed), 0xD150ull + static_cast<std::uint64_t>(r)));
            }
        }
    } else {
        c.realization_seeds = {0};
    }
    return c;
}

void CampaignConfig::set_master_seed(std::uint64_t seed) {
    master_seed = seed;
    if (kind == ModelKind::edwards_anderson && disorder_seeds.empty()) {
        realization_seeds.clear();
        for (int r = 0; r < realizations; ++r) {
            realization_seeds.push_back(hash_combine(mix64(seed), 0xD150ull + static_cast<std::uint64_t>(r)));
        }
    }
}

CampaignConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path, 0);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

namespace {

std::string model_block(const CampaignConfig& c) {
    std::string s = "[model]\n";
    s += fmt::format("kind = {}\n", to_string(c.kind));
    s += fmt::format("L = {}\n", c.L);
    if (c.g) s += fmt::format("g = {}\n", *c.g);
    s += fmt::format("realizations = {}\n", c.realizations);
    if (c.kind == ModelKind::edwards_anderson) {
        std::string seeds;
        for (std::size_t i = 0; i < c.realization_seeds.size(); ++i) {
            seeds += (i ? ", " : "") + fmt::format("{:#x}", c.realization_seeds[i]);
        }
        s += "disorder_seeds = " + seeds + "\n";
    }
    if (!c.ground_states.empty()) s += "ground_states = " + c.ground_states + "\n";
    return s;
}

std::string resolved_text_impl(const CampaignConfig& c, bool with_output) {
    std::string s = "[run]\n";
    s += "name = " + c.name + "\n";
    if (with_output) s += "output = " + c.output + "\n";
    s += fmt::format("master_seed = {}\n", c.master_seed);
    s += fmt::format("targets = {}\n", to_string(c.targets));
    s += fmt::format("n = {}\n", c.n);
    s += fmt::format("checkpoint_interval = {}\n\n", c.checkpoint_interval);
    s += model_block(c) + "\n[grid]\n";
    if (!c.beta_list.empty()) {
        s += "beta = " + join_numbers(c.beta_list) + "\n";
    } else {
        s += fmt::format("beta_min = {}\nbeta_max = {}\nbeta_step = {}\n", *c.beta_min, *c.beta_max, *c.beta_step);
    }
    s += fmt::format("auto_half = {}\nextrapolate = {}\n\n", c.auto_half, c.extrapolate);
    const auto& p = c.protocol;
    s += "[protocol]\n";
    s += fmt::format("equilibration = {}\nmeasurement = {}\nbin_size = {}\n", p.equilibration_sweeps,
                     p.measurement_sweeps, p.bin_size);
    s += fmt::format("sampler = {}\nwolff_per_sweep = {}\nparallel_tempering = {}\n", to_string(p.sampler),
                     p.wolff_per_sweep, p.parallel_tempering);
    s += fmt::format("sweeps_per_exchange = {}\nrecompute_interval = {}\nhot_start_fraction = {}\n",
                     p.sweeps_per_exchange, p.recompute_interval, p.hot_start_fraction);
    s += fmt::format("histogram_bins = {}\ncold_start = {}\n\n", p.histogram_bins,
                     c.cold_start_from_base ? "base_best" : "uniform");
    s += "[analysis]\n";
    std::string bounds;
    if (c.bound_dx) bounds = "dx";
    if (c.bound_ref) bounds += bounds.empty() ? "ref" : ", ref";
    s += "bounds = " + (bounds.empty() ? std::string("none") : bounds) + "\n";
    s += fmt::format("reference = {}\n", to_string(c.reference_kind()));
    s += fmt::format("cusp = {}\nsecond_derivative = {}\nhistograms = {}\noverlap = {}\n", c.cusp,
                     c.second_derivative, c.histograms, c.overlap);
    s += fmt::format("refine = {}\nrefine_points = {}\nrefine_multiplier = {}\n", c.refine, c.refine_points,
                     c.refine_multiplier);
    s += fmt::format("zero_point = {}\ncusp_jump_factor = {}\n", c.zero_point, c.cusp_jump_factor);
    return s;
}

}  // namespace

std::string CampaignConfig::resolved_text() const { return resolved_text_impl(*this, true); }

std::uint64_t CampaignConfig::hash() const { return hash_string(resolved_text_impl(*this, false)); }

std::uint64_t CampaignConfig::model_hash() const { return hash_string(model_block(*this)); }

LatticeModel build_realization(const CampaignConfig& config, int realization) {
    ModelParameters params;
    params.g = config.g;
    if (config.kind == ModelKind::edwards_anderson) {
        if (!config.realization_seeds.empty()) {
            params.disorder_seed = config.realization_seeds.at(static_cast<std::size_t>(realization));
        } else {
            params.disorder_seed = hash_combine(mix64(config.master_seed), 0xD150ull + static_cast<std::uint64_t>(realization));
        }
    }
    return build_model(config.kind, config.L, params);
}

std::optional<double> critical_temperature(ModelKind kind, std::optional<double> g) {
    switch (kind) {
        case ModelKind::ising_ferro_2d: return 2.0 / std::log(1.0 + std::numbers::sqrt2);
        case ModelKind::ising_ferro_3d: return 4.5115;
        case ModelKind::infinite_range: return 1.0;
        case ModelKind::j1j2:
            if (g && std::abs(*g - 0.55) < 1e-12) return 0.772;
            return std::nullopt;
        case ModelKind::edwards_anderson: return 0.95;
        default: return std::nullopt;
    }
}

// ---------------------------------------------------------------------------
// Curve CSV

namespace {

const std::vector<std::string>& curve_columns() {
    static const std::vector<std::string> cols = {
        "beta",          "T",           "M2_per_N",     "M2_err",         "logZ_per_N",  "logZM_per_N",
        "D_x",           "D_x_err",     "D_ref",        "D_ref_err",      "d2M2_dT2",    "d2M2_dT2_err",
        "logZ_err",      "logZM_err",   "E_per_N",      "E_err",          "EM_per_N",    "EM_err",
        "q",             "q_err",       "M2_low",       "M2_low_err",     "excess_D_x",  "excess_D_x_err",
        "excess_D_ref",  "excess_D_ref_err", "nonequilibrated", "bimodal"};
    return cols;
}

Estimate at(const std::vector<Estimate>& v, std::size_t i) {
    return i < v.size() ? v[i] : Estimate{std::numeric_limits<double>::quiet_NaN(), 0.0};
}

}  // namespace

void write_curve_csv(std::ostream& out, const MagicCurve& c, const std::string& header_comment) {
    if (!header_comment.empty()) out << "# " << header_comment << "\n";
    out << fmt::format("# n={} sites={} reference={} exact={} has_dx={} has_dref={} has_overlap={} has_low_branch={}\n",
                       c.n, c.sites, c.reference_label.empty() ? "none" : c.reference_label, int(c.exact),
                       int(c.has_dx), int(c.has_dref), int(c.has_overlap), int(c.has_low_branch));
    const auto& cols = curve_columns();
    for (std::size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << cols[k];
    out << "\n";
    for (std::size_t i = 0; i < c.size(); ++i) {
        auto pair = [&](const std::vector<Estimate>& v) {
            auto e = at(v, i);
            return num(e.value) + "," + num(e.error);
        };
        auto m = at(c.m_n, i);
        auto lz = at(c.log_z, i);
        auto lzm = at(c.log_zm, i);
        out << num(c.beta[i]) << "," << num(c.temperature(i)) << "," << num(m.value) << "," << num(m.error) << ","
            << num(lz.value) << "," << num(lzm.value) << "," << pair(c.dx) << "," << pair(c.dref) << ","
            << pair(c.d2m_dt2) << "," << num(lz.error) << "," << num(lzm.error) << "," << pair(c.energy) << ","
            << pair(c.coupled_energy) << "," << pair(c.overlap) << "," << pair(c.m_n_low) << ","
            << pair(c.excess_dx) << "," << pair(c.excess_dref) << ","
            << int(i < c.nonequilibrated.size() && c.nonequilibrated[i]) << ","
            << int(i < c.bimodal.size() && c.bimodal[i]) << "\n";
    }
}

MagicCurve read_curve_csv(std::istream& in) {
    MagicCurve c;
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream tokens(line.substr(1));
            std::string tok;
            while (tokens >> tok) {
                auto eq = tok.find('=');
                if (eq == std::string::npos) continue;
                auto key = tok.substr(0, eq), value = tok.substr(eq + 1);
                if (key == "n") c.n = std::stoi(value);
                else if (key == "sites") c.sites = std::stoul(value);
                else if (key == "reference") c.reference_label = value == "none" ? "" : value;
                else if (key == "exact") c.exact = value == "1";
                else if (key == "has_dx") c.has_dx = value == "1";
                else if (key == "has_dref") c.has_dref = value == "1";
                else if (key == "has_overlap") c.has_overlap = value == "1";
                else if (key == "has_low_branch") c.has_low_branch = value == "1";
            }
            continue;
        }
        std::vector<std::string> fields;
        std::istringstream row(line);
        std::string f;
        while (std::getline(row, f, ',')) fields.push_back(f);
        if (header.empty()) {
            header = fields;
            continue;
        }
        if (fields.size() != header.size()) throw std::runtime_error("curve CSV: ragged row");
        auto col = [&](const std::string& name) {
            auto it = std::find(header.begin(), header.end(), name);
            if (it == header.end()) throw std::runtime_error("curve CSV lacks column " + name);
            return std::strtod(fields[static_cast<std::size_t>(it - header.begin())].c_str(), nullptr);
        };
        auto est = [&](const std::string& v, const std::string& e) { return Estimate{col(v), col(e)}; };
        c.beta.push_back(col("beta"));
        c.m_n.push_back(est("M2_per_N", "M2_err"));
        c.log_z.push_back(est("logZ_per_N", "logZ_err"));
        c.log_zm.push_back(est("logZM_per_N", "logZM_err"));
        c.dx.push_back(est("D_x", "D_x_err"));
        c.dref.push_back(est("D_ref", "D_ref_err"));
        c.d2m_dt2.push_back(est("d2M2_dT2", "d2M2_dT2_err"));
        c.energy.push_back(est("E_per_N", "E_err"));
        c.coupled_energy.push_back(est("EM_per_N", "EM_err"));
        c.overlap.push_back(est("q", "q_err"));
        c.m_n_low.push_back(est("M2_low", "M2_low_err"));
        c.excess_dx.push_back(est("excess_D_x", "excess_D_x_err"));
        c.excess_dref.push_back(est("excess_D_ref", "excess_D_ref_err"));
        c.nonequilibrated.push_back(col("nonequilibrated") != 0.0);
        c.bimodal.push_back(col("bimodal") != 0.0);
    }
    if (c.beta.empty()) throw std::runtime_error("curve CSV has no rows");
    if (!c.has_low_branch) c.m_n_low.clear();
    return c;
}

MagicCurve read_curve_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_curve_csv(in);
}

// ---------------------------------------------------------------------------
// Campaign state and checkpoints

namespace {

struct Unit {
    int realization = 0;
    Target target = Target::base_z;
    bool refinement = false;
    std::unique_ptr<Ladder> ladder;
};

struct CampaignState {
    CampaignConfig config;
    std::deque<LatticeModel> models;
    int stage = 0;
    std::vector<double> refine_coupled;
    std::vector<double> refine_base;
    std::vector<Unit> units;
    fs::path dir;
    std::ofstream provenance;

    void log(const std::string& line) {
        provenance << line << "\n";
        provenance.flush();
    }
    long total_sweeps() const {
        long s = 0;
        for (const auto& u : units) s += u.ladder->sweeps_done();
        return s;
    }
};

std::uint64_t unit_id(int realization, Target target, bool refinement) {
    return hash_combine(hash_combine(static_cast<std::uint64_t>(realization), static_cast<std::uint64_t>(target)),
                        refinement ? 1u : 0u);
}

Protocol unit_protocol(const CampaignConfig& c, Target target) {
    Protocol p = c.protocol;
    p.measure_overlap = target == Target::coupled_zm && c.overlap;
    return p;
}

void add_units(CampaignState& st, bool refinement) {
    const auto& c = st.config;
    const auto& cb = refinement ? st.refine_base : c.base_grid;
    const auto& cc = refinement ? st.refine_coupled : c.coupled_grid;
    int mult = refinement ? c.refine_multiplier : 1;
    for (int r = 0; r < c.realizations; ++r) {
        const auto& model = st.models[static_cast<std::size_t>(r)];
        if (c.targets != TargetSet::coupled && !cb.empty()) {
            st.units.push_back({r, Target::base_z, refinement,
                                std::make_unique<Ladder>(model, Target::base_z, 1, cb, unit_protocol(c, Target::base_z),
                                                         c.master_seed, unit_id(r, Target::base_z, refinement), mult)});
        }
        if (c.targets != TargetSet::base && !cc.empty()) {
            st.units.push_back({r, Target::coupled_zm, refinement,
                                std::make_unique<Ladder>(model, Target::coupled_zm, c.n, cc,
                                                         unit_protocol(c, Target::coupled_zm), c.master_seed,
                                                         unit_id(r, Target::coupled_zm, refinement), mult)});
        }
    }
}

// Hash of everything except the measurement length, which may grow on resume.
std::uint64_t compatibility_hash(const CampaignConfig& c) {
    CampaignConfig copy = c;
    copy.protocol.measurement_sweeps = 0;
    return hash_string(resolved_text_impl(copy, false));
}

void save_checkpoint(const CampaignState& st) {
    fs::path tmp = st.dir / "checkpoint.bin.tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write checkpoint in " + st.dir.string());
        BinaryWriter w(out);
        for (char ch : kMagic) w.put(ch);
        w.put(kCheckpointVersion);
        w.put(st.config.model_hash());
        w.put(compatibility_hash(st.config));
        w.put(st.config.protocol.measurement_sweeps);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(st.models.size()));
        for (const auto& m : st.models) w.put(m.hash());
        w.put(st.stage);
        w.put_vector(st.refine_coupled);
        w.put_vector(st.refine_base);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(st.units.size()));
        for (const auto& u : st.units) {
            w.put(u.realization);
            w.put(static_cast<int>(u.target));
            w.put<std::uint8_t>(u.refinement);
            u.ladder->save(w);
        }
        if (!out) throw std::runtime_error("checkpoint write failed");
    }
    fs::rename(tmp, st.dir / "checkpoint.bin");
}

void load_checkpoint(CampaignState& st) {
    std::ifstream in(st.dir / "checkpoint.bin", std::ios::binary);
    if (!in) throw CheckpointError("no checkpoint.bin in " + st.dir.string());
    BinaryReader r(in);
    for (char ch : kMagic) {
        if (r.get<char>() != ch) throw CheckpointError("not a smfmagic checkpoint");
    }
    auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw CheckpointError(fmt::format("unsupported checkpoint version {} (expected {})", version, kCheckpointVersion));
    }
    auto model_hash = r.get<std::uint64_t>();
    if (model_hash != st.config.model_hash()) {
        throw CheckpointError(fmt::format("model hash mismatch: checkpoint {:016x}, config {:016x}; refusing to resume",
                                          model_hash, st.config.model_hash()));
    }
    auto compat = r.get<std::uint64_t>();
    auto stored_measurement = r.get<long>();
    if (compat != compatibility_hash(st.config)) {
        throw CheckpointError("configuration changed beyond the measurement length; refusing to resume");
    }
    if (st.config.protocol.measurement_sweeps < stored_measurement) {
        throw CheckpointError("measurement length may only grow on resume");
    }
    auto count = r.get<std::uint32_t>();
    if (count != st.models.size()) throw CheckpointError("realization count mismatch");
    for (const auto& m : st.models) {
        if (r.get<std::uint64_t>() != m.hash()) throw CheckpointError("model hash mismatch for a disorder realization");
    }
    st.stage = r.get<int>();
    st.refine_coupled = r.get_vector<double>();
    st.refine_base = r.get_vector<double>();
    auto units = r.get<std::uint32_t>();
    for (std::uint32_t k = 0; k < units; ++k) {
        Unit u;
        u.realization = r.get<int>();
        u.target = static_cast<Target>(r.get<int>());
        u.refinement = r.get<std::uint8_t>() != 0;
        u.ladder = std::make_unique<Ladder>(Ladder::load(r, st.models.at(static_cast<std::size_t>(u.realization))));
        st.units.push_back(std::move(u));
    }
    if (st.config.protocol.measurement_sweeps > stored_measurement) {
        st.log(fmt::format("protocol extension: measurement sweeps {} -> {}", stored_measurement,
                           st.config.protocol.measurement_sweeps));
        for (auto& u : st.units) u.ladder->extend(unit_protocol(st.config, u.target));
    }
}

// ---------------------------------------------------------------------------
// Analysis

ObservableSeries collect(const CampaignState& st, int realization, Target target) {
    ObservableSeries out;
    bool first = true;
    for (const auto& u : st.units) {
        if (u.realization != realization || u.target != target) continue;
        auto s = u.ladder->series();
        out = first ? s : ObservableSeries::merge(out, s);
        first = false;
    }
    if (first) {
        out.target = target;
        out.n = target == Target::base_z ? 1 : st.config.n;
        out.sites = st.models[static_cast<std::size_t>(realization)].site_count();
    }
    return out;
}

GroundStateInfo ground_state_for(const CampaignState& st, int r, GroundStateRecord& record) {
    const auto& c = st.config;
    const auto& model = st.models[static_cast<std::size_t>(r)];
    if (!c.ground_states.empty()) {
        auto records = read_ground_states_file(c.ground_states);
        if (static_cast<std::size_t>(r) >= records.size()) {
            throw std::runtime_error(fmt::format("{} has no record for realization {}", c.ground_states, r));
        }
        record = records[static_cast<std::size_t>(r)];
        if (record.site_count != model.site_count()) {
            throw std::runtime_error(fmt::format("ground-state record {} is for {} sites, model has {}", r,
                                                 record.site_count, model.site_count()));
        }
        return {record.energy, "file"};
    }
    if (model.site_count() <= 27) {
        record = exhaustive_ground_state(model);
        return {record.energy, "exhaustive"};
    }
    const Ladder* best = nullptr;
    for (const auto& u : st.units) {
        if (u.realization == r && u.target == Target::base_z && (!best || u.ladder->best_energy() < best->best_energy())) {
            best = u.ladder.get();
        }
    }
    if (!best) throw std::runtime_error("ground-state estimate needs a base ladder");
    auto config = quench(model, best->best_configuration());
    record.site_count = model.site_count();
    record.energy = model.energy(config);
    record.configuration = config;
    return {record.energy, "quench"};
}

bool is_ferromagnet(ModelKind k) {
    return k == ModelKind::ising_ferro_1d || k == ModelKind::ising_ferro_2d || k == ModelKind::ising_ferro_3d ||
           k == ModelKind::infinite_range;
}

double infinite_temperature_variance(const LatticeModel& model) {
    if (model.kind() == ModelKind::infinite_range) {
        double N = static_cast<double>(model.site_count());
        return (N - 1.0) / (2.0 * N);
    }
    double v = 0.0;
    for (const auto& b : model.bonds()) v += b.coefficient * b.coefficient;
    return v;
}

struct Analysis {
    CampaignReport report;
    std::vector<std::optional<ReferenceState>> references;
};

Estimate mean_and_se(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    if (v.size() < 2) return {m, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()))};
}

Analysis analyse(const CampaignState& st) {
    const auto& c = st.config;
    Analysis a;
    auto& rep = a.report;
    rep.name = c.name;
    rep.kind = c.kind;
    rep.L = c.L;
    rep.n = c.n;
    rep.sites = st.models.front().site_count();
    rep.t_c = critical_temperature(c.kind, c.g);
    rep.refinement_betas = st.refine_coupled;
    std::vector<MagicCurve> curves;
    std::vector<ZeroPointEntropies> zeros;
    for (int r = 0; r < c.realizations; ++r) {
        const auto& model = st.models[static_cast<std::size_t>(r)];
        RealizationResult res;
        res.index = r;
        res.disorder_seed = c.realization_seeds[static_cast<std::size_t>(r)];
        res.model_hash = model.hash();
        res.base = collect(st, r, Target::base_z);
        res.coupled = collect(st, r, Target::coupled_zm);
        for (const auto* s : {&res.base, &res.coupled}) {
            for (const auto& p : s->points) {
                if (p.nonequilibrated) {
                    rep.warnings.push_back(fmt::format("realization {} {} beta={}: not equilibrated", r,
                                                       to_string(s->target), p.beta));
                }
                if (c.protocol.parallel_tempering && std::isfinite(p.swap_acceptance) && p.swap_acceptance < 0.02 &&
                    s->points.size() > 1) {
                    rep.warnings.push_back(fmt::format("realization {} {} beta={}: exchange acceptance {:.3g}", r,
                                                       to_string(s->target), p.beta, p.swap_acceptance));
                }
            }
        }
        std::optional<ReferenceState> reference;
        if (c.bound_ref || c.zero_point) {
            if (c.reference_kind() == ReferenceKind::ground_state_file) {
                GroundStateRecord record;
                res.ground_state = ground_state_for(st, r, record);
                reference = make_reference(model, ReferenceKind::ground_state_file, &record);
            } else {
                reference = make_reference(model, c.reference_kind());
                res.ground_state = GroundStateInfo{reference->reference_energy, "analytic"};
            }
        }
        if (c.targets == TargetSet::both) {
            CurveOptions options;
            options.extrapolate = c.extrapolate;
            options.infinite_temperature_energy = c.kind == ModelKind::infinite_range ? -0.5 : 0.0;
            options.infinite_temperature_variance = infinite_temperature_variance(model);
            if (c.bound_ref) options.reference = reference;
            if (is_ferromagnet(c.kind)) options.anchor = ferromagnet_anchor(model, c.n);
            options.cusp_jump_factor = c.cusp_jump_factor;
            res.curve = integrate_m2(res.base, res.coupled, options);
            if (!c.bound_dx) {
                for (auto& e : res.curve->dx) e = {std::numeric_limits<double>::quiet_NaN(), 0.0};
                for (auto& e : res.curve->excess_dx) e = {std::numeric_limits<double>::quiet_NaN(), 0.0};
                res.curve->has_dx = false;
            }
            curves.push_back(*res.curve);
            if (c.zero_point && reference && reference->kind != ReferenceKind::plus_x) {
                double e_min = reference->reference_energy;
                zeros.push_back(zero_point_entropies(res.base, res.coupled, e_min, 4.0 * c.n * e_min, options));
            }
        }
        a.references.push_back(reference);
        rep.realizations.push_back(std::move(res));
    }
    if (!curves.empty()) {
        rep.curve = average_curves(curves);
        if (!c.cusp) rep.curve->cusp = {};
        rep.audits = audit_inequalities(*rep.curve);
        for (const auto& au : rep.audits) {
            if (!au.pass) {
                rep.warnings.push_back(fmt::format("bound {} violated: max excess {:.6g} (sigma {:.3g}) at beta={}",
                                                   au.bound, au.max_excess, au.sigma_at_max, au.beta_at_max));
            }
        }
        if (c.second_derivative) rep.d2_peaks = peaks_of(*rep.curve, 0.0, std::numeric_limits<double>::infinity());
        if (rep.curve->has_overlap) {
            const auto& mc = *rep.curve;
            std::size_t lowest = 0;
            for (std::size_t i = 0; i < mc.size(); ++i) {
                if (mc.beta[i] > mc.beta[lowest]) lowest = i;
            }
            rep.overlap_lowest_t = mc.overlap[lowest];
            if (mc.cusp.kind != CuspKind::none) {
                std::vector<double> pooled;
                for (const auto& cv : curves) {
                    double s = 0.0;
                    int k = 0;
                    for (std::size_t i = 0; i < cv.size(); ++i) {
                        if (cv.beta[i] > 0.0 && cv.temperature(i) >= 2.0 * mc.cusp.t_star && std::isfinite(cv.overlap[i].value)) {
                            s += cv.overlap[i].value;
                            ++k;
                        }
                    }
                    if (k > 0) pooled.push_back(s / k);
                }
                if (!pooled.empty()) {
                    auto e = mean_and_se(pooled);
                    if (pooled.size() == 1) {
                        // A single realization falls back to the within-run errors.
                        std::vector<Estimate> pts;
                        for (std::size_t i = 0; i < mc.size(); ++i) {
                            if (mc.beta[i] > 0.0 && mc.temperature(i) >= 2.0 * mc.cusp.t_star) pts.push_back(mc.overlap[i]);
                        }
                        double v = 0.0;
                        for (const auto& p : pts) v += p.error * p.error;
                        e.error = std::sqrt(v) / static_cast<double>(pts.size());
                    }
                    rep.overlap_high_t = e;
                }
            }
        }
    }
    if (!zeros.empty()) {
        std::vector<double> s0, sm0, m;
        for (const auto& z : zeros) {
            s0.push_back(z.s0.value);
            sm0.push_back(z.sm0.value);
            m.push_back(z.m_n_at_beta_max.value);
        }
        if (zeros.size() == 1) rep.zero_point = zeros.front();
        else rep.zero_point = ZeroPointEntropies{mean_and_se(s0), mean_and_se(sm0), mean_and_se(m)};
    }
    return a;
}

// ---------------------------------------------------------------------------
// Outputs

std::string provenance_comment(const CampaignConfig& c) {
    return fmt::format("smfmagic {} config_hash={:016x} seed={}", kVersion, c.hash(), c.master_seed);
}

void write_series_csv(const fs::path& path, const CampaignConfig& c, const CampaignReport& rep) {
    std::ofstream out(path);
    out << "# " << provenance_comment(c) << "\n";
    out << "realization,target,beta,observable,value,error\n";
    for (const auto& res : rep.realizations) {
        for (const auto* s : {&res.base, &res.coupled}) {
            const double N = static_cast<double>(s->sites);
            for (const auto& p : s->points) {
                auto row = [&](const char* name, double v, double e) {
                    out << res.index << "," << to_string(s->target) << "," << num(p.beta) << "," << name << ","
                        << num(v) << "," << num(e) << "\n";
                };
                auto e = bin_mean(p.bin_e);
                row("E_per_N", e.value / N, e.error / N);
                const std::size_t B = p.bin_e.size();
                double s1 = 0.0, s2 = 0.0;
                for (std::size_t k = 0; k < B; ++k) {
                    s1 += p.bin_e[k];
                    s2 += p.bin_e2[k];
                }
                double var_full = s2 / B - (s1 / B) * (s1 / B);
                std::vector<double> loo;
                if (B > 1) {
                    for (std::size_t k = 0; k < B; ++k) {
                        double m1 = (s1 - p.bin_e[k]) / (B - 1), m2 = (s2 - p.bin_e2[k]) / (B - 1);
                        loo.push_back(m2 - m1 * m1);
                    }
                }
                auto var = B > 1 ? jackknife(loo, var_full) : Estimate{var_full, 0.0};
                row("var_E_per_N", var.value / N, var.error / N);
                if (!p.bin_q.empty()) {
                    auto q = bin_mean(p.bin_q);
                    row("q", q.value, q.error);
                }
                row("acceptance", p.acceptance, 0.0);
                row("swap_acceptance", p.swap_acceptance, 0.0);
                row("samples", static_cast<double>(p.samples), 0.0);
                row("bins", static_cast<double>(B), 0.0);
                row("sweep_multiplier", p.sweep_multiplier, 0.0);
                row("min_energy", p.min_energy, 0.0);
                row("nonequilibrated", p.nonequilibrated ? 1.0 : 0.0, 0.0);
            }
        }
    }
}

void write_histograms_csv(const fs::path& path, const CampaignConfig& c, const CampaignReport& rep) {
    std::ofstream out(path);
    out << "# " << provenance_comment(c) << "\n";
    out << "realization,target,beta,bin_center,bin_width,count\n";
    for (const auto& res : rep.realizations) {
        for (const auto* s : {&res.base, &res.coupled}) {
            for (const auto& p : s->points) {
                const auto& h = p.histogram;
                for (std::size_t k = 0; k < h.size(); ++k) {
                    if (h.counts()[k] == 0) continue;
                    out << res.index << "," << to_string(s->target) << "," << num(p.beta) << "," << num(h.center(k))
                        << "," << num(h.width()) << "," << h.counts()[k] << "\n";
                }
            }
        }
    }
}

void write_plot_scripts(const fs::path& dir, bool with_histograms, bool with_overlap) {
    fs::create_directories(dir / "plots");
    const std::string prelude =
        "import csv\nimport math\nimport os\nimport matplotlib\nmatplotlib.use(\"Agg\")\n"
        "import matplotlib.pyplot as plt\n\nHERE = os.path.dirname(os.path.abspath(__file__))\n\n\n"
        "def rows(name):\n    with open(os.path.join(HERE, \"..\", name)) as f:\n"
        "        return list(csv.DictReader(line for line in f if not line.startswith(\"#\")))\n\n\n"
        "def col(data, key):\n    return [float(r[key]) for r in data]\n\n\n";
    auto write = [&](const std::string& name, const std::string& body) {
        std::ofstream out(dir / "plots" / name);
        out << "# Generated by smfmagic; run with python3 from any directory.\n" << prelude << body;
    };
    const std::string finite = "data = [r for r in rows(\"curve.csv\") if math.isfinite(float(r[\"T\"]))]\n"
                               "T = col(data, \"T\")\n";
    write("magic.py", finite +
                          "plt.errorbar(T, col(data, \"M2_per_N\"), yerr=col(data, \"M2_err\"), fmt=\".-\", label=\"M2/N\")\n"
                          "plt.xlabel(\"T\")\nplt.ylabel(\"M2/N\")\nplt.legend()\n"
                          "plt.savefig(os.path.join(HERE, \"magic.png\"), dpi=150)\n");
    write("bounds.py", finite +
                           "plt.plot(T, col(data, \"M2_per_N\"), \".-\", label=\"M2/N\")\n"
                           "for key in (\"D_x\", \"D_ref\"):\n"
                           "    vals = [4 * v for v in col(data, key)]\n"
                           "    if any(math.isfinite(v) for v in vals):\n"
                           "        plt.plot(T, vals, \"--\", label=\"4 \" + key)\n"
                           "plt.xlabel(\"T\")\nplt.legend()\nplt.savefig(os.path.join(HERE, \"bounds.png\"), dpi=150)\n");
    write("second_derivative.py", finite +
                                      "plt.errorbar(T, col(data, \"d2M2_dT2\"), yerr=col(data, \"d2M2_dT2_err\"), fmt=\".-\")\n"
                                      "plt.xlabel(\"T\")\nplt.ylabel(\"d2(M2/N)/dT2\")\n"
                                      "plt.savefig(os.path.join(HERE, \"second_derivative.png\"), dpi=150)\n");
    write("energies.py", finite +
                             "plt.plot(T, col(data, \"E_per_N\"), \".-\", label=\"<E>/N\")\n"
                             "plt.plot(T, col(data, \"EM_per_N\"), \".-\", label=\"<E_M>/N\")\n"
                             "plt.xlabel(\"T\")\nplt.legend()\nplt.savefig(os.path.join(HERE, \"energies.png\"), dpi=150)\n");
    if (with_histograms) {
        write("histograms.py",
              "data = [r for r in rows(\"histograms.csv\") if r[\"target\"] == \"coupled_ZM\" and r[\"realization\"] == \"0\"]\n"
              "betas = sorted({float(r[\"beta\"]) for r in data})\n"
              "for b in betas[-6:]:\n"
              "    sel = [r for r in data if float(r[\"beta\"]) == b]\n"
              "    total = sum(float(r[\"count\"]) for r in sel)\n"
              "    plt.plot(col(sel, \"bin_center\"), [float(r[\"count\"]) / total for r in sel], label=\"beta=%g\" % b)\n"
              "plt.xlabel(\"E_M\")\nplt.ylabel(\"frequency\")\nplt.legend()\n"
              "plt.savefig(os.path.join(HERE, \"histograms.png\"), dpi=150)\n");
    }
    if (with_overlap) {
        write("overlap.py", finite +
                                "plt.errorbar(T, col(data, \"q\"), yerr=col(data, \"q_err\"), fmt=\".-\")\n"
                                "plt.xlabel(\"T\")\nplt.ylabel(\"<q>_M\")\n"
                                "plt.savefig(os.path.join(HERE, \"overlap.png\"), dpi=150)\n");
    }
}

nlohmann::json estimate_json(const Estimate& e) { return {{"value", e.value}, {"error", e.error}}; }

std::string cusp_status(const MagicCurve& c) {
    switch (c.cusp.kind) {
        case CuspKind::cusp: return "cusp located";
        case CuspKind::smooth_maximum: return "no cusp located (smooth maximum)";
        case CuspKind::none: return "no cusp located";
    }
    return "?";
}

std::size_t peak_index(const MagicCurve& c) {
    std::size_t best = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (c.m_n[i].value > c.m_n[best].value) best = i;
    }
    return best;
}

nlohmann::json report_json(const CampaignReport& rep) {
    nlohmann::json j;
    j["name"] = rep.name;
    j["model"] = std::string(to_string(rep.kind));
    j["L"] = rep.L;
    j["n"] = rep.n;
    j["sites"] = rep.sites;
    j["complete"] = rep.complete;
    j["version"] = kVersion;
    j["t_c"] = rep.t_c ? nlohmann::json(*rep.t_c) : nlohmann::json(nullptr);
    if (rep.curve) {
        const auto& c = *rep.curve;
        nlohmann::json cusp;
        cusp["kind"] = std::string(to_string(c.cusp.kind));
        cusp["status"] = cusp_status(c);
        if (c.cusp.kind != CuspKind::none) {
            cusp["t_star"] = c.cusp.t_star;
            cusp["bracket"] = {c.cusp.t_low, c.cusp.t_high};
            cusp["coexistence"] = c.cusp.coexistence;
            cusp["t_branch"] = c.cusp.t_branch ? nlohmann::json(*c.cusp.t_branch) : nlohmann::json(nullptr);
        }
        j["cusp"] = cusp;
        auto k = peak_index(c);
        j["peak"] = {{"M_n_per_N", estimate_json(c.m_n[k])}, {"T", c.temperature(k)}, {"beta", c.beta[k]}};
        j["exact"] = c.exact;
        j["reference"] = c.reference_label;
    }
    j["audits"] = nlohmann::json::array();
    for (const auto& a : rep.audits) {
        j["audits"].push_back({{"bound", a.bound},
                               {"max_excess", a.max_excess},
                               {"sigma_at_max", a.sigma_at_max},
                               {"beta_at_max", a.beta_at_max},
                               {"worst_sigma", a.worst_sigma},
                               {"pass", a.pass}});
    }
    if (rep.d2_peaks && !rep.d2_peaks->d2.empty()) {
        j["second_derivative"] = {{"positive_peak", rep.d2_peaks->positive_peak},
                                  {"positive_peak_T", rep.d2_peaks->positive_peak_t},
                                  {"negative_peak", rep.d2_peaks->negative_peak},
                                  {"negative_peak_T", rep.d2_peaks->negative_peak_t}};
    }
    if (rep.zero_point) {
        j["zero_point"] = {{"S0_per_N", estimate_json(rep.zero_point->s0)},
                           {"SM0_per_N", estimate_json(rep.zero_point->sm0)},
                           {"M_n_per_N_at_beta_max", estimate_json(rep.zero_point->m_n_at_beta_max)}};
    }
    if (rep.overlap_high_t) j["overlap_high_T"] = estimate_json(*rep.overlap_high_t);
    if (rep.overlap_lowest_t) j["overlap_lowest_T"] = estimate_json(*rep.overlap_lowest_t);
    j["realizations"] = nlohmann::json::array();
    for (const auto& r : rep.realizations) {
        nlohmann::json x = {{"index", r.index},
                            {"disorder_seed", fmt::format("{:#x}", r.disorder_seed)},
                            {"model_hash", fmt::format("{:016x}", r.model_hash)}};
        if (r.ground_state) x["reference_energy"] = {{"value", r.ground_state->energy}, {"source", r.ground_state->source}};
        if (r.curve && rep.realizations.size() > 1) {
            auto k = peak_index(*r.curve);
            x["peak"] = {{"M_n_per_N", estimate_json(r.curve->m_n[k])}, {"T", r.curve->temperature(k)}};
        }
        j["realizations"].push_back(x);
    }
    j["refinement_betas"] = rep.refinement_betas;
    j["warnings"] = rep.warnings;
    return j;
}

void write_report_files(const fs::path& dir, const CampaignReport& rep) {
    std::ofstream(dir / "summary.json") << report_json(rep).dump(2) << "\n";
    std::ofstream(dir / "summary.txt") << format_summary(rep);
}

void write_outputs(const CampaignState& st, const CampaignReport& rep) {
    const auto& c = st.config;
    write_series_csv(st.dir / "series.csv", c, rep);
    if (c.histograms) write_histograms_csv(st.dir / "histograms.csv", c, rep);
    if (rep.curve) {
        std::ofstream out(st.dir / "curve.csv");
        write_curve_csv(out, *rep.curve, provenance_comment(c));
        if (rep.realizations.size() > 1) {
            for (const auto& r : rep.realizations) {
                std::ofstream o(st.dir / fmt::format("curve_r{:03d}.csv", r.index));
                write_curve_csv(o, *r.curve, provenance_comment(c) + fmt::format(" realization={}", r.index));
            }
        }
        write_plot_scripts(st.dir, c.histograms, rep.curve->has_overlap);
    }
    write_report_files(st.dir, rep);
}

// ---------------------------------------------------------------------------
// Driver

std::vector<double> plan_refinement(const CampaignState& st, const MagicCurve& curve) {
    const auto& grid = st.config.coupled_grid;
    double b_hi = 1.0 / curve.cusp.t_low;
    double b_lo = 1.0 / curve.cusp.t_high;
    auto lo_it = std::lower_bound(grid.begin(), grid.end(), b_lo - 1e-12);
    auto hi_it = std::upper_bound(grid.begin(), grid.end(), b_hi + 1e-12);
    double a = lo_it == grid.begin() ? b_lo : *(lo_it - 1);
    double b = hi_it == grid.end() ? b_hi : *hi_it;
    std::vector<double> out;
    const int k = st.config.refine_points;
    for (int i = 1; i <= k; ++i) {
        double beta = round_beta(a + (b - a) * i / (k + 1));
        bool clash = std::any_of(grid.begin(), grid.end(), [&](double g) { return std::abs(g - beta) < 1e-9; });
        if (!clash && beta > 0.0) out.push_back(beta);
    }
    return out;
}

// The best configuration of the finished base ladder of the same
// realization, quenched to a local minimum.
void seed_from_base(CampaignState& st, Unit& u) {
    for (const auto& b : st.units) {
        if (b.realization == u.realization && b.target == Target::base_z && !b.refinement && b.ladder->finished()) {
            u.ladder->seed_slots(quench(b.ladder->model(), b.ladder->best_configuration()));
            return;
        }
    }
}

bool run_units(CampaignState& st, const RunOptions& opt, WorkerPool& pool, long& last_checkpoint) {
    for (std::size_t k = 0; k < st.units.size(); ++k) {
        auto& u = st.units[k];
        if (u.ladder->finished()) continue;
        long before = st.total_sweeps() - u.ladder->sweeps_done();
        if (opt.verbose) {
            std::cerr << fmt::format("[smfmagic] unit {}/{}: realization {} {}{} ({} betas)\n", k + 1,
                                     st.units.size(), u.realization, to_string(u.target),
                                     u.refinement ? " refinement" : "", u.ladder->size());
        }
        bool halted = false;
        auto hook = [&](long sweeps) {
            long total = before + sweeps;
            if (total - last_checkpoint >= st.config.checkpoint_interval) {
                save_checkpoint(st);
                last_checkpoint = total;
            }
            if (opt.halt_after_sweeps && total >= *opt.halt_after_sweeps) {
                halted = true;
                return false;
            }
            return true;
        };
        if (u.target == Target::coupled_zm && st.config.cold_start_from_base && u.ladder->sweeps_done() == 0) {
            seed_from_base(st, u);
        }
        bool done = u.ladder->run(&pool, hook, 1000);
        if (!done || halted) {
            save_checkpoint(st);
            st.log(fmt::format("halted after {} ladder sweeps", st.total_sweeps()));
            return false;
        }
        save_checkpoint(st);
        last_checkpoint = st.total_sweeps();
    }
    return true;
}

CampaignReport execute(CampaignState& st, const RunOptions& opt) {
    WorkerPool pool(std::max(1, opt.workers));
    long last_checkpoint = st.total_sweeps();
    auto halted_report = [&]() {
        CampaignReport rep;
        rep.name = st.config.name;
        rep.kind = st.config.kind;
        rep.L = st.config.L;
        rep.n = st.config.n;
        rep.sites = st.models.front().site_count();
        rep.complete = false;
        rep.sweeps_done = st.total_sweeps();
        return rep;
    };
    if (!run_units(st, opt, pool, last_checkpoint)) return halted_report();
    if (st.stage == 0) {
        st.stage = 1;
        const auto& c = st.config;
        if (c.refine && c.cusp && c.targets == TargetSet::both && c.realizations == 1) {
            auto primary = analyse(st).report;
            if (primary.curve && primary.curve->cusp.kind != CuspKind::none) {
                st.refine_coupled = plan_refinement(st, *primary.curve);
                std::set<double> base;
                for (double b : st.refine_coupled) {
                    base.insert(b);
                    if (c.bound_dx) {
                        double h = round_beta(0.5 * b);
                        bool have = std::any_of(c.base_grid.begin(), c.base_grid.end(),
                                                [&](double g) { return std::abs(g - h) < 1e-12; });
                        if (!have) base.insert(h);
                    }
                }
                st.refine_base.assign(base.begin(), base.end());
                if (!st.refine_coupled.empty()) {
                    add_units(st, true);
                    st.log(fmt::format("refinement around T*={:.6g}: {} coupled betas, sweep multiplier {}",
                                       primary.curve->cusp.t_star, st.refine_coupled.size(), c.refine_multiplier));
                }
            }
        }
        save_checkpoint(st);
        last_checkpoint = st.total_sweeps();
        if (!run_units(st, opt, pool, last_checkpoint)) return halted_report();
    }
    auto rep = analyse(st).report;
    rep.complete = true;
    rep.sweeps_done = st.total_sweeps();
    for (const auto& w : rep.warnings) st.log("warning: " + w);
    write_outputs(st, rep);
    st.log(fmt::format("complete after {} ladder sweeps", rep.sweeps_done));
    return rep;
}

void init_state(CampaignState& st, const CampaignConfig& config, const fs::path& dir) {
    st.config = config;
    st.config.output = dir.string();
    st.dir = dir;
    for (int r = 0; r < config.realizations; ++r) st.models.push_back(build_realization(config, r));
}

}  // namespace

CampaignReport run_campaign(const CampaignConfig& config, const RunOptions& options) {
    CampaignState st;
    fs::path dir(config.output);
    fs::create_directories(dir);
    init_state(st, config, dir);
    std::ofstream(dir / "config.resolved.ini") << st.config.resolved_text();
    st.provenance.open(dir / "provenance.log", std::ios::trunc);
    st.log(provenance_comment(st.config));
    st.log(fmt::format("model {} L={} sites={} realizations={}", to_string(config.kind), config.L,
                       st.models.front().site_count(), config.realizations));
    for (int r = 0; r < config.realizations; ++r) {
        st.log(fmt::format("realization {} disorder_seed={:#x} model_hash={:016x}", r,
                           st.config.realization_seeds[static_cast<std::size_t>(r)],
                           st.models[static_cast<std::size_t>(r)].hash()));
    }
    add_units(st, false);
    save_checkpoint(st);
    return execute(st, options);
}

CampaignReport resume_campaign(const std::string& dir_name, const RunOptions& options) {
    fs::path dir(dir_name);
    auto config = parse_config((dir / "config.resolved.ini").string());
    CampaignState st;
    init_state(st, config, dir);
    st.provenance.open(dir / "provenance.log", std::ios::app);
    load_checkpoint(st);
    st.log(fmt::format("resume at {} ladder sweeps ({})", st.total_sweeps(), provenance_comment(st.config)));
    std::ofstream(dir / "config.resolved.ini") << st.config.resolved_text();
    return execute(st, options);
}

CampaignReport report_summary(const std::vector<MagicCurve>& curves, const std::string& out_dir,
                              const CampaignConfig* config) {
    if (curves.empty()) throw std::invalid_argument("report_summary needs at least one curve");
    CampaignReport rep;
    rep.name = "report";
    rep.n = curves.front().n;
    rep.sites = curves.front().sites;
    rep.complete = true;
    if (config) {
        rep.name = config->name;
        rep.kind = config->kind;
        rep.L = config->L;
        rep.t_c = critical_temperature(config->kind, config->g);
    }
    for (const auto& c : curves) {
        if (c.beta != curves.front().beta || c.sites != curves.front().sites) {
            throw std::invalid_argument("report_summary merges curves on one grid and size only");
        }
    }
    MagicCurve merged = curves.size() == 1 ? curves.front() : average_curves(curves);
    attach_cusp(merged);
    rep.audits = audit_inequalities(merged);
    auto peaks = peaks_of(merged, 0.0, std::numeric_limits<double>::infinity());
    if (!peaks.d2.empty()) rep.d2_peaks = peaks;
    for (std::size_t i = 0; i < curves.size(); ++i) {
        RealizationResult r;
        r.index = static_cast<int>(i);
        r.curve = curves[i];
        rep.realizations.push_back(std::move(r));
    }
    if (merged.has_overlap) {
        std::size_t lowest = 0;
        for (std::size_t i = 0; i < merged.size(); ++i) {
            if (merged.beta[i] > merged.beta[lowest]) lowest = i;
        }
        rep.overlap_lowest_t = merged.overlap[lowest];
    }
    for (const auto& a : rep.audits) {
        if (!a.pass) rep.warnings.push_back(fmt::format("bound {} violated: max excess {:.6g}", a.bound, a.max_excess));
    }
    for (std::size_t i = 0; i < merged.size(); ++i) {
        if (merged.nonequilibrated[i]) rep.warnings.push_back(fmt::format("beta={}: not equilibrated", merged.beta[i]));
    }
    rep.curve = merged;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_report_files(out_dir, rep);
    }
    return rep;
}

std::string format_summary(const CampaignReport& rep) {
    std::string s;
    s += fmt::format("campaign {}: {} L={} N={} n={}", rep.name, to_string(rep.kind), rep.L, rep.sites, rep.n);
    if (rep.realizations.size() > 1) s += fmt::format(" ({} realizations)", rep.realizations.size());
    s += fmt::format("\nstatus: {}\n", rep.complete ? "complete" : "halted (resume to continue)");
    if (rep.t_c) s += fmt::format("T_c (literature marker): {:.6f}\n", *rep.t_c);
    if (rep.curve) {
        const auto& c = *rep.curve;
        const auto& k = c.cusp;
        s += "cusp: " + cusp_status(c);
        if (k.kind != CuspKind::none) {
            s += fmt::format(", T* = {:.5f} in [{:.5f}, {:.5f}], coexistence {}", k.t_star, k.t_low, k.t_high,
                             k.coexistence ? "yes" : "no");
            if (k.t_branch) s += fmt::format(", branch crossing T = {:.5f}", *k.t_branch);
        }
        s += "\n";
        auto p = peak_index(c);
        s += fmt::format("M{}/N peak: {:.6f} +- {:.2g} at T = {:.5f}{}\n", c.n, c.m_n[p].value, c.m_n[p].error,
                         c.temperature(p), c.exact ? " (exact)" : "");
    }
    if (rep.d2_peaks && !rep.d2_peaks->d2.empty()) {
        s += fmt::format("d2(M/N)/dT2: positive peak {:.4g} at T = {:.4f}, negative peak {:.4g} at T = {:.4f}\n",
                         rep.d2_peaks->positive_peak, rep.d2_peaks->positive_peak_t, rep.d2_peaks->negative_peak,
                         rep.d2_peaks->negative_peak_t);
    }
    if (!rep.audits.empty()) {
        s += "inequality audit (M - 2n/(n-1) D):\n";
        s += fmt::format("  {:<18} {:>14} {:>12} {:>10} {:>6}\n", "bound", "max excess", "sigma", "beta", "ok");
        for (const auto& a : rep.audits) {
            s += fmt::format("  {:<18} {:>14.6g} {:>12.3g} {:>10.4g} {:>6}\n", a.bound, a.max_excess, a.sigma_at_max,
                             a.beta_at_max, a.pass ? "yes" : "NO");
        }
    }
    if (rep.zero_point) {
        const auto& z = *rep.zero_point;
        s += fmt::format("zero point: S(0)/N = {:.5f} +- {:.2g}, S_M(0)/N = {:.5f} +- {:.2g}, M/N(beta_max) = {:.5f}\n",
                         z.s0.value, z.s0.error, z.sm0.value, z.sm0.error, z.m_n_at_beta_max.value);
    }
    if (rep.overlap_high_t) {
        s += fmt::format("overlap <q>_M for T >= 2T*: {:.4f} +- {:.2g}\n", rep.overlap_high_t->value,
                         rep.overlap_high_t->error);
    }
    if (rep.overlap_lowest_t) {
        s += fmt::format("overlap <q>_M at lowest T: {:.4f} +- {:.2g}\n", rep.overlap_lowest_t->value,
                         rep.overlap_lowest_t->error);
    }
    for (const auto& r : rep.realizations) {
        if (r.ground_state) {
            s += fmt::format("realization {} reference energy {:.6f} ({})\n", r.index, r.ground_state->energy,
                             r.ground_state->source);
        }
    }
    if (!rep.warnings.empty()) {
        s += fmt::format("warnings ({}):\n", rep.warnings.size());
        for (const auto& w : rep.warnings) s += "  " + w + "\n";
    }
    return s;
}

}  // namespace smfmagic
