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

#pragma once
// Text serialization: columnar trace files, JSON job configs and JSON fit reports.
// Exact header keys and layouts are documented in docs/FORMATS.md.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqfluor/fitting.hpp"
#include "sqfluor/oracle.hpp"
#include "sqfluor/spectra.hpp"
#include "sqfluor/trace.hpp"

namespace sqfluor {

inline constexpr const char* kTraceMagic = "sqfluor-trace 1";

/// 17 significant digits; parses back to the identical double.
std::string format_double(double x);

std::string format_trace(const SpectrumTrace& trace);
/// Throws ParseError (with a 1-based line number when one applies).
SpectrumTrace parse_trace(const std::string& text);

void write_trace(const SpectrumTrace& trace, const std::filesystem::path& path);
SpectrumTrace read_trace(const std::filesystem::path& path);

struct GridSpec {
  double min = -10.0;
  double max = 10.0;
  std::size_t points = 2001;
  FrequencyUnit units = FrequencyUnit::gamma;
};

struct OracleJob {
  std::size_t sets = 50;
  std::uint64_t seed = 1;
  double tolerance = 1e-3;
  Quadrature quadrature = Quadrature::trapezoid_with_tail;
  double step = 0.0;
  double horizon = 0.0;
};

struct FitJob {
  FitKind kind = FitKind::no_drive;
  Coordinates coordinates = Coordinates::n_r;
  int background_degree = 2;
  std::optional<double> fixed_scale;
  std::optional<double> known_offset;  // floor subtracted before fitting (calibrated traces)
  std::vector<double> phase_offsets;  // joint fits; defaults to zeros
};

/// A fully validated job. Every field has a default, so `{}` is a valid job.
struct JobConfig {
  std::string model = "reflection";  // reflection | fluorescence | no-drive | strong-drive | oracle
  // Bath: either explicit (n, m) or a gain point diluted by `efficiency`.
  std::optional<double> n;
  std::optional<double> m;
  std::optional<double> gain_db;
  double efficiency = 1.0;
  double phi = 0.0;
  // Atom.
  double gamma_hz = 304e3;
  double eta_c = 1.0;
  double rabi = 0.0;  // units of gamma
  std::optional<GridSpec> grid;  // absent: the model's default grid
  BackgroundModel background;
  NoiseSpec noise;
  double scale = 1.0;
  double offset = 0.0;
  double linear = 0.0;
  double quadratic = 0.0;
  FitJob fit;
  OracleJob oracle;
  std::vector<double> phis;   // sweep-phase
  std::vector<double> gains;  // sweep-gain, dB
  std::vector<std::string> inputs;
  std::string out_dir;

  SqueezedBath bath() const;
  AtomParams atom() const;
  /// Grid in units of gamma.
  std::vector<double> grid_gamma() const;
};

/// Throws SchemaError listing every problem found (unknown keys, bad types, bounds).
JobConfig parse_job(const nlohmann::json& doc);
JobConfig read_job(const std::filesystem::path& path);
nlohmann::json job_to_json(const JobConfig& job);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

struct InputDigest {
  std::string path;
  std::string sha256;
};

struct Provenance {
  std::string command;
  std::vector<InputDigest> inputs;
  std::optional<std::uint64_t> seed;
  std::string version;  // defaults to the library version when empty
};

const char* library_version();

nlohmann::json report_to_json(const FitResult& result, const Provenance& provenance);
void write_report(const FitResult& result, const Provenance& provenance, const std::filesystem::path& path);

/// Canonical JSON text: sorted keys, two-space indent, trailing newline.
std::string canonical_json(const nlohmann::json& doc);
void write_json(const nlohmann::json& doc, const std::filesystem::path& path);
void write_text(const std::string& text, const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

}  // namespace sqfluor
