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

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include "smfmagic/analytic.hpp"
#include "smfmagic/campaign.hpp"
#include "smfmagic/exact.hpp"
#include "smfmagic/lattice.hpp"
#include "smfmagic/thermo.hpp"

namespace fs = std::filesystem;
using namespace smfmagic;

namespace {

int default_workers() {
    if (const char* env = std::getenv("SMFMAGIC_WORKERS")) {
        int w = std::atoi(env);
        if (w > 0) return w;
    }
    return 1;
}

std::vector<double> beta_grid(double beta_min, double beta_max, double step) {
    std::vector<double> out;
    long count = static_cast<long>(std::floor((beta_max - beta_min) / step + 1e-9));
    for (long k = 0; k <= count; ++k) out.push_back(std::round((beta_min + k * step) * 1e12) / 1e12);
    return out;
}

void emit_curve(const MagicCurve& curve, const std::string& out, const std::string& comment) {
    if (out.empty()) {
        write_curve_csv(std::cout, curve, comment);
        return;
    }
    fs::create_directories(out);
    std::ofstream f(fs::path(out) / "curve.csv");
    write_curve_csv(f, curve, comment);
    auto rep = report_summary({curve}, out);
    std::cerr << format_summary(rep);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"smfmagic: stabilizer Renyi entropy of SMF ground states"};
    app.require_subcommand(1);
    int workers = default_workers();
    std::optional<std::uint64_t> seed;
    std::string out;
    app.add_option("--workers", workers, "worker threads (env SMFMAGIC_WORKERS)")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "override the master seed");
    app.add_option("--out", out, "output directory");

    auto* run = app.add_subcommand("run", "run a campaign from a config file");
    std::string config_path;
    std::optional<long> halt_after;
    bool quiet = false;
    run->add_option("config", config_path, "campaign config")->required()->check(CLI::ExistingFile);
    run->add_option("--halt-after-sweeps", halt_after, "checkpoint and stop after this many ladder sweeps");
    run->add_flag("--quiet", quiet, "no progress output");

    auto* resume = app.add_subcommand("resume", "continue a halted or extended campaign");
    std::string resume_dir;
    resume->add_option("dir", resume_dir, "campaign output directory")->required()->check(CLI::ExistingDirectory);
    resume->add_option("--halt-after-sweeps", halt_after, "checkpoint and stop after this many ladder sweeps");
    resume->add_flag("--quiet", quiet, "no progress output");

    auto* analytic = app.add_subcommand("analytic", "closed-form curves in the curve CSV schema");
    std::string analytic_model;
    int an_n = 2, an_L = 0;
    double beta_min = 0.0, beta_max = 3.0, beta_step = 0.05;
    analytic->add_option("model", analytic_model, "chain | mean_field | cusp")
        ->required()
        ->check(CLI::IsMember({"chain", "mean_field", "cusp"}));
    analytic->add_option("--n", an_n, "Renyi index")->check(CLI::Range(2, 8));
    analytic->add_option("--L", an_L, "chain length (0 = thermodynamic limit)");
    analytic->add_option("--beta-min", beta_min);
    analytic->add_option("--beta-max", beta_max);
    analytic->add_option("--beta-step", beta_step)->check(CLI::PositiveNumber);

    auto* oracle = app.add_subcommand("oracle", "exact enumeration of a small instance (JSON)");
    std::string oracle_model;
    int or_L = 3, or_n = 2, or_cluster = 0;
    double or_beta = 1.0;
    std::optional<double> or_g;
    std::uint64_t or_disorder = 1;
    std::string or_reference;
    oracle->add_option("model", oracle_model, "model kind")->required();
    oracle->add_option("--L", or_L, "linear size");
    oracle->add_option("--n", or_n, "Renyi index")->check(CLI::Range(2, 4));
    oracle->add_option("--beta", or_beta, "inverse temperature");
    oracle->add_option("--g", or_g, "J2/J1 for j1j2");
    oracle->add_option("--disorder-seed", or_disorder, "disorder seed for edwards_anderson");
    oracle->add_option("--cluster", or_cluster, "keep only the first k sites (induced subgraph)");
    oracle->add_option("--reference", or_reference, "reference state for the D_ref bound");

    auto* report = app.add_subcommand("report", "summarize curve.csv files of one or more campaign directories");
    std::vector<std::string> report_dirs;
    report->add_option("dirs", report_dirs, "campaign directories")->required()->check(CLI::ExistingDirectory);

    for (auto* sub : {run, resume, analytic, oracle, report}) sub->fallthrough();
    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto config = parse_config(config_path);
            if (seed) config.set_master_seed(*seed);
            if (!out.empty()) config.output = out;
            RunOptions opt{workers, halt_after, !quiet};
            auto rep = run_campaign(config, opt);
            std::cout << format_summary(rep);
            return rep.complete ? 0 : 3;
        }
        if (*resume) {
            RunOptions opt{workers, halt_after, !quiet};
            auto rep = resume_campaign(resume_dir, opt);
            std::cout << format_summary(rep);
            return rep.complete ? 0 : 3;
        }
        if (*analytic) {
            auto grid = beta_grid(beta_min, beta_max, beta_step);
            if (analytic_model == "cusp") {
                nlohmann::json j;
                for (int n = 2; n <= 8; ++n) j[std::to_string(n)] = mean_field_cusp_temperature(n);
                std::cout << j.dump(2) << "\n";
                return 0;
            }
            MagicCurve curve = analytic_model == "chain" ? analytic_chain_curve(an_n, grid, an_L)
                                                         : mean_field_curve(an_n, grid);
            std::string comment = fmt::format("smfmagic {} analytic {} n={} L={}", kVersion, analytic_model, an_n, an_L);
            emit_curve(curve, out, comment);
            return 0;
        }
        if (*oracle) {
            ModelParameters params;
            params.g = or_g;
            params.disorder_seed = or_disorder;
            auto model = build_model(parse_model_kind(oracle_model), or_L, params);
            if (or_cluster > 0) {
                std::vector<std::size_t> sites(static_cast<std::size_t>(or_cluster));
                std::iota(sites.begin(), sites.end(), std::size_t{0});
                model = induced_cluster(model, sites);
            }
            const std::size_t N = model.site_count();
            nlohmann::json j;
            j["model"] = oracle_model;
            j["sites"] = N;
            j["beta"] = or_beta;
            j["n"] = or_n;
            auto sums = enumerate_partitions(model, or_beta, or_n);
            j["log_Z"] = sums.log_z;
            j["log_ZM"] = sums.log_zm;
            j["mean_E"] = sums.mean_energy;
            j["mean_EM"] = sums.mean_coupled_energy;
            j["M_n_partition"] = (sums.log_zm - 2.0 * or_n * sums.log_z) / (1.0 - or_n);
            auto psi = ExactWavefunction::from_model(model, or_beta);
            if (N <= 8) j["M_n_pauli"] = sre_pauli(psi, or_n);
            if (or_n == 2 && N <= 9) j["M_2_four_copy"] = sre_four_copy(psi, 2);
            j["D_x"] = exact_bounds(psi, make_reference(model, ReferenceKind::plus_x));
            auto gs = exhaustive_ground_state(model);
            j["ground_state_energy"] = gs.energy;
            ReferenceKind ref = or_reference.empty() ? default_reference(model.kind()) : parse_reference_kind(or_reference);
            auto reference = ref == ReferenceKind::ground_state_file ? make_reference(model, ref, &gs)
                                                                    : make_reference(model, ref);
            j["reference"] = std::string(to_string(ref));
            j["D_ref"] = exact_bounds(psi, reference);
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        if (*report) {
            std::vector<MagicCurve> curves;
            std::vector<std::optional<CampaignConfig>> configs;
            for (const auto& d : report_dirs) {
                curves.push_back(read_curve_file((fs::path(d) / "curve.csv").string()));
                auto resolved = fs::path(d) / "config.resolved.ini";
                configs.push_back(fs::exists(resolved) ? std::optional(parse_config(resolved.string())) : std::nullopt);
            }
            auto config_of = [&](std::size_t i) { return configs[i] ? &*configs[i] : nullptr; };
            bool mergeable = true;
            for (const auto& c : curves) {
                if (c.beta != curves.front().beta || c.sites != curves.front().sites) mergeable = false;
            }
            if (mergeable) {
                std::cout << format_summary(report_summary(curves, out, config_of(0)));
            } else {
                for (std::size_t i = 0; i < curves.size(); ++i) {
                    auto dir = out.empty() ? std::string() : (fs::path(out) / fs::path(report_dirs[i]).filename()).string();
                    std::cout << report_dirs[i] << ":\n" << format_summary(report_summary({curves[i]}, dir, config_of(i)));
                }
            }
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const CheckpointError& e) {
        std::cerr << "resume refused: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
