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


#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "smfmagic/analytic.hpp"
#include "smfmagic/campaign.hpp"
#include "smfmagic/coupled.hpp"
#include "smfmagic/exact.hpp"
#include "smfmagic/lattice.hpp"
#include "smfmagic/mc.hpp"
#include "smfmagic/thermo.hpp"

namespace py = pybind11;
using namespace smfmagic;

namespace {

SpinConfiguration to_config(const LatticeModel& m, const std::vector<int>& spins) {
    if (spins.size() != m.site_count()) throw std::invalid_argument("spin list length differs from the site count");
    for (int s : spins) {
        if (s != 1 && s != -1) throw std::invalid_argument("spins must be +1 or -1");
    }
    return SpinConfiguration::from_spins(spins);
}

py::array_t<double> values(const std::vector<Estimate>& v) {
    py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
    auto r = out.mutable_unchecked<1>();
    for (std::size_t i = 0; i < v.size(); ++i) r(static_cast<py::ssize_t>(i)) = v[i].value;
    return out;
}

py::array_t<double> errors(const std::vector<Estimate>& v) {
    py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
    auto r = out.mutable_unchecked<1>();
    for (std::size_t i = 0; i < v.size(); ++i) r(static_cast<py::ssize_t>(i)) = v[i].error;
    return out;
}

template <auto Field>
py::dict column(const MagicCurve& c) {
    py::dict d;
    d["value"] = values(c.*Field);
    d["error"] = errors(c.*Field);
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Stabilizer Renyi entropy of stochastic-matrix-form ground states";
    m.attr("__version__") = kVersion;

    py::enum_<ModelKind>(m, "ModelKind")
        .value("ising_ferro_1d", ModelKind::ising_ferro_1d)
        .value("ising_ferro_2d", ModelKind::ising_ferro_2d)
        .value("ising_ferro_3d", ModelKind::ising_ferro_3d)
        .value("infinite_range", ModelKind::infinite_range)
        .value("j1j2", ModelKind::j1j2)
        .value("triangular_afm", ModelKind::triangular_afm)
        .value("edwards_anderson", ModelKind::edwards_anderson);

    py::enum_<ReferenceKind>(m, "ReferenceKind")
        .value("plus_x", ReferenceKind::plus_x)
        .value("ghz_zz", ReferenceKind::ghz_zz)
        .value("stripe", ReferenceKind::stripe)
        .value("clock_sector", ReferenceKind::clock_sector)
        .value("ground_state_file", ReferenceKind::ground_state_file);

    py::enum_<CuspKind>(m, "CuspKind")
        .value("none", CuspKind::none)
        .value("smooth_maximum", CuspKind::smooth_maximum)
        .value("cusp", CuspKind::cusp);

    py::class_<LatticeModel>(m, "LatticeModel")
        .def_property_readonly("kind", &LatticeModel::kind)
        .def_property_readonly("linear_size", &LatticeModel::linear_size)
        .def_property_readonly("site_count", &LatticeModel::site_count)
        .def_property_readonly("bonds",
                               [](const LatticeModel& lm) {
                                   std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> out;
                                   for (const auto& b : lm.bonds()) out.emplace_back(b.i, b.j, b.coefficient);
                                   return out;
                               })
        .def("energy", [](const LatticeModel& lm, const std::vector<int>& spins) { return lm.energy(to_config(lm, spins)); },
             py::arg("spins"))
        .def("coupled_energy",
             [](const LatticeModel& lm, const std::vector<std::vector<int>>& layers) {
                 std::vector<SpinConfiguration> cs;
                 for (const auto& l : layers) cs.push_back(to_config(lm, l));
                 return coupled_energy(lm, cs);
             },
             py::arg("layers"))
        .def("hash", &LatticeModel::hash)
        .def("__repr__", [](const LatticeModel& lm) {
            return "<LatticeModel " + std::string(to_string(lm.kind())) + " N=" + std::to_string(lm.site_count()) + ">";
        });

    m.def(
        "build_model",
        [](ModelKind kind, int L, std::optional<double> g, std::optional<std::uint64_t> disorder_seed) {
            return build_model(kind, L, ModelParameters{g, disorder_seed});
        },
        py::arg("kind"), py::arg("L"), py::arg("g") = py::none(), py::arg("disorder_seed") = py::none());

    m.def("energy_table", [](const LatticeModel& lm) {
        auto t = energy_table(lm);
        return py::array_t<double>(static_cast<py::ssize_t>(t.size()), t.data());
    });

    py::class_<PartitionSums>(m, "PartitionSums")
        .def_readonly("log_z", &PartitionSums::log_z)
        .def_readonly("log_zm", &PartitionSums::log_zm)
        .def_readonly("mean_energy", &PartitionSums::mean_energy)
        .def_readonly("mean_coupled_energy", &PartitionSums::mean_coupled_energy)
        .def_readonly("var_energy", &PartitionSums::var_energy)
        .def_readonly("var_coupled_energy", &PartitionSums::var_coupled_energy);
    m.def("enumerate_partitions", &enumerate_partitions, py::arg("model"), py::arg("beta"), py::arg("n") = 2);

    py::class_<ExactWavefunction>(m, "ExactWavefunction")
        .def_static("from_model", &ExactWavefunction::from_model, py::arg("model"), py::arg("beta"))
        .def_static("from_amplitudes", &ExactWavefunction::from_amplitudes, py::arg("amplitudes"))
        .def_readonly("sites", &ExactWavefunction::sites)
        .def_property_readonly("amplitudes", [](const ExactWavefunction& w) {
            return py::array_t<double>(static_cast<py::ssize_t>(w.amplitudes.size()), w.amplitudes.data());
        });
    m.def("sre_pauli", &sre_pauli, py::arg("psi"), py::arg("n") = 2);
    m.def("sre_four_copy", &sre_four_copy, py::arg("psi"), py::arg("n") = 2);
    m.def(
        "exact_bound",
        [](const ExactWavefunction& psi, const LatticeModel& lm, ReferenceKind kind) {
            return exact_bounds(psi, make_reference(lm, kind));
        },
        py::arg("psi"), py::arg("model"), py::arg("reference"));

    m.def("chain_sre", &chain_sre, py::arg("n"), py::arg("beta"));
    m.def(
        "chain_finite",
        [](int L, int n, double beta) {
            auto f = chain_finite(L, n, beta);
            return py::dict(py::arg("log_z") = f.log_z, py::arg("log_zm") = f.log_zm, py::arg("m_n") = f.m_n);
        },
        py::arg("L"), py::arg("n"), py::arg("beta"));
    m.def("coupled_top_eigenvalue", &coupled_top_eigenvalue, py::arg("n"), py::arg("beta"));
    m.def("numerical_top_eigenvalue", &numerical_top_eigenvalue, py::arg("n"), py::arg("beta"));
    m.def(
        "mean_field_sre",
        [](int n, double beta) {
            auto r = mean_field_sre(n, beta);
            return py::dict(py::arg("m_n") = r.m_n, py::arg("dx") = r.dx, py::arg("dzz") = r.dzz,
                            py::arg("log_z") = r.log_z, py::arg("log_zm") = r.log_zm,
                            py::arg("magnetization") = r.saddle.m,
                            py::arg("ordered") = r.saddle.branch == SaddleBranch::ordered);
        },
        py::arg("n"), py::arg("beta"));
    m.def("mean_field_cusp_temperature", &mean_field_cusp_temperature, py::arg("n"));

    py::class_<CuspLocation>(m, "CuspLocation")
        .def_readonly("kind", &CuspLocation::kind)
        .def_readonly("t_star", &CuspLocation::t_star)
        .def_readonly("t_low", &CuspLocation::t_low)
        .def_readonly("t_high", &CuspLocation::t_high)
        .def_readonly("coexistence", &CuspLocation::coexistence);

    py::class_<MagicCurve>(m, "MagicCurve")
        .def_readonly("n", &MagicCurve::n)
        .def_readonly("sites", &MagicCurve::sites)
        .def_readonly("exact", &MagicCurve::exact)
        .def_readonly("cusp", &MagicCurve::cusp)
        .def_property_readonly("beta",
                               [](const MagicCurve& c) {
                                   return py::array_t<double>(static_cast<py::ssize_t>(c.beta.size()), c.beta.data());
                               })
        .def_property_readonly("m_n", &column<&MagicCurve::m_n>)
        .def_property_readonly("log_z", &column<&MagicCurve::log_z>)
        .def_property_readonly("log_zm", &column<&MagicCurve::log_zm>)
        .def_property_readonly("dx", &column<&MagicCurve::dx>)
        .def_property_readonly("dref", &column<&MagicCurve::dref>)
        .def_property_readonly("energy", &column<&MagicCurve::energy>)
        .def_property_readonly("coupled_energy", &column<&MagicCurve::coupled_energy>)
        .def_property_readonly("overlap", &column<&MagicCurve::overlap>)
        .def("__len__", &MagicCurve::size)
        .def("to_csv", [](const MagicCurve& c) {
            std::ostringstream out;
            write_curve_csv(out, c, "python");
            return out.str();
        });

    m.def("analytic_chain_curve", &analytic_chain_curve, py::arg("n"), py::arg("beta"), py::arg("L") = 0);
    m.def("mean_field_curve", &mean_field_curve, py::arg("n"), py::arg("beta"));
    m.def("read_curve_file", &read_curve_file, py::arg("path"));
    m.def(
        "audit_inequalities",
        [](const MagicCurve& c, double sigmas) {
            py::list out;
            for (const auto& a : audit_inequalities(c, sigmas)) {
                out.append(py::dict(py::arg("bound") = a.bound, py::arg("max_excess") = a.max_excess,
                                    py::arg("sigma") = a.sigma_at_max, py::arg("beta") = a.beta_at_max,
                                    py::arg("pass") = a.pass));
            }
            return out;
        },
        py::arg("curve"), py::arg("sigmas") = 3.0);

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_RuntimeError);

    py::class_<CampaignConfig>(m, "CampaignConfig")
        .def_readwrite("output", &CampaignConfig::output)
        .def_readonly("name", &CampaignConfig::name)
        .def_readonly("n", &CampaignConfig::n)
        .def_readonly("coupled_grid", &CampaignConfig::coupled_grid)
        .def_readonly("base_grid", &CampaignConfig::base_grid)
        .def_readonly("realization_seeds", &CampaignConfig::realization_seeds)
        .def("resolved_text", &CampaignConfig::resolved_text)
        .def("hash", &CampaignConfig::hash);
    m.def("parse_config_text", &parse_config_text, py::arg("text"));
    m.def("parse_config", &parse_config, py::arg("path"));

    py::class_<CampaignReport>(m, "CampaignReport")
        .def_readonly("complete", &CampaignReport::complete)
        .def_readonly("sites", &CampaignReport::sites)
        .def_readonly("curve", &CampaignReport::curve)
        .def_readonly("warnings", &CampaignReport::warnings)
        .def("summary", [](const CampaignReport& r) { return format_summary(r); });

    m.def(
        "run_campaign",
        [](const CampaignConfig& config, int workers, std::optional<long> halt_after_sweeps) {
            RunOptions o;
            o.workers = workers;
            o.halt_after_sweeps = halt_after_sweeps;
            py::gil_scoped_release release;
            return run_campaign(config, o);
        },
        py::arg("config"), py::arg("workers") = 1, py::arg("halt_after_sweeps") = py::none());
    m.def(
        "resume_campaign",
        [](const std::string& dir, int workers) {
            RunOptions o;
            o.workers = workers;
            py::gil_scoped_release release;
            return resume_campaign(dir, o);
        },
        py::arg("directory"), py::arg("workers") = 1);
}
