// Copyright 2026 The sqfluor Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>

#include "sqfluor/core_model.hpp"
#include "sqfluor/error.hpp"
#include "sqfluor/fitting.hpp"
#include "sqfluor/io.hpp"
#include "sqfluor/oracle.hpp"
#include "sqfluor/spectra.hpp"

namespace py = pybind11;
using namespace sqfluor;

namespace {

py::dict estimates(const FitResult& r) {
  py::dict d;
  for (std::size_t i = 0; i < r.names.size(); ++i) {
    d[py::str(r.names[i])] = py::make_tuple(r.values[static_cast<Eigen::Index>(i)], r.sigma(r.names[i]));
  }
  for (const auto& [k, v] : r.derived) {
    const auto it = r.derived_sigma.find(k);
    d[py::str(k)] = py::make_tuple(v, it == r.derived_sigma.end() ? std::nan("") : it->second);
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_sqfluor, m) {
  m.doc() = "Resonance fluorescence and reflection spectra of a driven two-level atom in squeezed vacuum";

  py::register_exception<Error>(m, "Error");
  py::register_exception<PhysicalityError>(m, "PhysicalityError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);

  m.attr("__version__") = library_version();

  py::class_<SqueezedBath>(m, "SqueezedBath")
      .def(py::init<double, double, double>(), py::arg("n") = 0.0, py::arg("m") = 0.0, py::arg("phi") = 0.0)
      .def_property_readonly("n", &SqueezedBath::n)
      .def_property_readonly("m", &SqueezedBath::m)
      .def_property_readonly("phi", &SqueezedBath::phi)
      .def("with_phi", &SqueezedBath::with_phi)
      .def("__repr__", [](const SqueezedBath& b) {
        return "SqueezedBath(n=" + format_double(b.n()) + ", m=" + format_double(b.m()) + ", phi=" +
               format_double(b.phi()) + ")";
      });

  py::class_<AtomParams>(m, "AtomParams")
      .def(py::init<double, double, double>(), py::arg("gamma") = 1.0, py::arg("eta_c") = 1.0, py::arg("rabi") = 0.0)
      .def_property_readonly("gamma", &AtomParams::gamma)
      .def_property_readonly("eta_c", &AtomParams::eta_c)
      .def_property_readonly("rabi", &AtomParams::rabi);

  py::class_<RateSet>(m, "RateSet")
      .def_readonly("g_plus", &RateSet::g_plus)
      .def_readonly("g_minus", &RateSet::g_minus)
      .def_readonly("g_m", &RateSet::g_m)
      .def_readonly("g_n", &RateSet::g_n)
      .def_readonly("g_nm", &RateSet::g_nm)
      .def_readonly("g_x", &RateSet::g_x)
      .def_readonly("g_y", &RateSet::g_y);

  m.def("rates", &rates_from_params, py::arg("bath"), py::arg("atom"));
  m.def(
      "bath_from_gain", [](double gain_db, double efficiency) { return bath_from_gain({gain_db, efficiency}); },
      py::arg("gain_db"), py::arg("efficiency") = 1.0);
  m.def("squeezing_db", &squeezing_db, py::arg("bath"));
  m.def("m_minus_n_from_db", &m_minus_n_from_db, py::arg("db"));

  py::class_<BlochState>(m, "BlochState")
      .def_readonly("sx", &BlochState::sx)
      .def_readonly("sy", &BlochState::sy)
      .def_readonly("sz", &BlochState::sz);
  m.def("steady_state", &steady_state, py::arg("bath"), py::arg("atom"));
  m.def(
      "cubic_roots",
      [](const SqueezedBath& b, const AtomParams& a) {
        const Roots r = cubic_roots(b, a);
        return std::vector<Complex>(r.begin(), r.end());
      },
      py::arg("bath"), py::arg("atom"));
  m.def("default_grid", &default_grid, py::arg("bath"), py::arg("atom"));
  m.def("uniform_grid", &uniform_grid, py::arg("lo"), py::arg("hi"), py::arg("points"));

  py::class_<SpectrumTrace>(m, "SpectrumTrace")
      .def(py::init([](std::vector<double> offsets, std::vector<double> values, std::vector<double> sigmas) {
             return SpectrumTrace(std::move(offsets), std::move(values), {}, std::move(sigmas));
           }),
           py::arg("offsets"), py::arg("values"), py::arg("sigmas") = std::vector<double>{})
      .def_property_readonly("offsets", &SpectrumTrace::offsets)
      .def_property_readonly("values", &SpectrumTrace::values)
      .def_property_readonly("sigmas", &SpectrumTrace::sigmas)
      .def_property_readonly("mask", [](const SpectrumTrace& t) { return t.metadata().mask; })
      .def("__len__", &SpectrumTrace::size)
      .def("__eq__", [](const SpectrumTrace& a, const SpectrumTrace& b) { return a == b; })
      .def("to_text", &format_trace);

  m.def(
      "fluorescence_spectrum",
      [](const SqueezedBath& b, const AtomParams& a, const std::vector<double>& grid) {
        return fluorescence_spectrum(b, a, grid).trace.values();
      },
      py::arg("bath"), py::arg("atom"), py::arg("grid"));
  m.def(
      "reflection_spectrum",
      [](const SqueezedBath& b, const AtomParams& a, const std::vector<double>& grid) {
        return reflection_spectrum(b, a, grid).values();
      },
      py::arg("bath"), py::arg("atom"), py::arg("grid"));
  m.def(
      "weak_drive_reflection",
      [](const SqueezedBath& b, const AtomParams& a, const std::vector<double>& grid) {
        return weak_drive_reflection(b, a, grid).values();
      },
      py::arg("bath"), py::arg("atom"), py::arg("grid"));
  m.def(
      "strong_drive_reflection",
      [](const SqueezedBath& b, const AtomParams& a, const std::vector<double>& grid) {
        return strong_drive_reflection(b, a, grid).values();
      },
      py::arg("bath"), py::arg("atom"), py::arg("grid"));
  m.def(
      "oracle_spectrum",
      [](const SqueezedBath& b, const AtomParams& a, const std::vector<double>& grid) {
        return spectrum_numeric(b, a, grid).values();
      },
      py::arg("bath"), py::arg("atom"), py::arg("grid"));
  m.def("relative_linf", [](const std::vector<double>& a, const std::vector<double>& b) { return relative_linf(a, b); });

  m.def(
      "synthesize",
      [](const std::string& kind, const SqueezedBath& b, const AtomParams& a, const std::vector<double>& grid,
         double noise, std::uint64_t seed, double offset) {
        SynthesisSpec s;
        s.kind = fit_kind_from_string(kind);
        s.bath = b;
        s.atom = a;
        s.offset = offset;
        return synthesize_trace(s, {noise, seed}, grid);
      },
      py::arg("kind"), py::arg("bath"), py::arg("atom"), py::arg("grid"), py::arg("noise") = 0.0,
      py::arg("seed") = 0, py::arg("offset") = 0.0);

  py::class_<FitResult>(m, "FitResult")
      .def_property_readonly("kind", [](const FitResult& r) { return to_string(r.kind); })
      .def_readonly("names", &FitResult::names)
      .def_readonly("covariance", &FitResult::covariance)
      .def_readonly("residual_norm", &FitResult::residual_norm)
      .def_readonly("chi2_per_dof", &FitResult::chi2_per_dof)
      .def_readonly("iterations", &FitResult::iterations)
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("warnings", &FitResult::warnings)
      .def("value", &FitResult::value)
      .def("sigma", &FitResult::sigma)
      .def("estimates", &estimates, "name -> (value, sigma), derived quantities included");

  m.def(
      "fit_no_drive",
      [](const SpectrumTrace& t, const AtomParams& fixed, std::optional<double> fixed_scale, int background_degree) {
        FitOptions o;
        o.fixed_scale = fixed_scale;
        o.background_degree = background_degree;
        return fit_no_drive(t, fixed, o);
      },
      py::arg("trace"), py::arg("fixed"), py::arg("fixed_scale") = py::none(), py::arg("background_degree") = 2);
  m.def(
      "fit_three_lorentzian", [](const SpectrumTrace& t) { return fit_three_lorentzian(t); }, py::arg("trace"));
  m.def(
      "fit_full_joint",
      [](const std::vector<SpectrumTrace>& traces, const AtomParams& fixed, const std::vector<double>& offsets) {
        return fit_full_joint(traces, fixed, offsets);
      },
      py::arg("traces"), py::arg("fixed"), py::arg("phase_offsets"));
  m.def(
      "fit_efficiency",
      [](const std::vector<double>& gains, const std::vector<double>& m_minus_n, const std::vector<double>& sigmas) {
        if (gains.size() != m_minus_n.size() || (!sigmas.empty() && sigmas.size() != gains.size())) {
          throw Error("gains, m_minus_n and sigmas must have equal lengths");
        }
        std::vector<GainSample> s;
        for (std::size_t i = 0; i < gains.size(); ++i) s.push_back({gains[i], m_minus_n[i], sigmas.empty() ? 0.0 : sigmas[i]});
        return fit_efficiency(s);
      },
      py::arg("gains"), py::arg("m_minus_n"), py::arg("sigmas") = std::vector<double>{});

  m.def("read_trace", &read_trace, py::arg("path"));
  m.def("write_trace", &write_trace, py::arg("trace"), py::arg("path"));
  m.def("parse_trace", &parse_trace, py::arg("text"));
}
