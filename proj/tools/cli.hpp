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
// Command-line front end. The pipelines are exposed so the acceptance
// harness can drive them without spawning processes.

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqfluor/error.hpp"
#include "sqfluor/fitting.hpp"
#include "sqfluor/io.hpp"

namespace sqfluor::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitUsage = 2;

/// Bad flags, bad environment, unreadable inputs. Maps to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Runs one command line (without the program name) and returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// SQFLUOR_WORKERS, or the hardware concurrency when unset.
std::size_t worker_count();

std::vector<std::string> preset_names();
/// Base job document of a named preset. Throws UsageError for unknown names.
nlohmann::json preset_document(const std::string& name);
/// Human-readable notes on where a preset's constants come from; empty for generic presets.
std::vector<std::string> preset_notes(const std::string& name);

/// One simulated trace per entry of job.phis (or one at job.phi).
struct SimOutput {
  std::vector<SpectrumTrace> traces;
  std::vector<std::string> warnings;
};
SimOutput simulate(const JobConfig& job);

struct OracleSetResult {
  std::size_t index = 0;
  double n = 0.0;
  double m = 0.0;
  double phi = 0.0;
  double rabi = 0.0;
  double eta_c = 1.0;
  double spectrum_error = 0.0;  // relative L-inf, analytic vs master equation
  double sum_rule_error = 0.0;  // |K0 + K1 + K2 + K - (1 + sz) / 2|
  double steady_error = 0.0;    // max Bloch-component difference
  bool perturbed = false;
  bool pass = false;
  std::string error;  // integrator invariant violation or other failure
};

struct OracleCheckResult {
  std::vector<OracleSetResult> sets;
  double worst_spectrum = 0.0;
  double worst_sum_rule = 0.0;
  double worst_steady = 0.0;
  double spectrum_tolerance = 0.0;
  double sum_rule_tolerance = 0.0;
  double steady_tolerance = 0.0;
  bool pass = false;
  std::vector<std::string> warnings;
};

/// Random seeded grid when the job leaves the bath unspecified, else the job's single set.
/// `corrupt_rate_sign` flips the sign of M on the analytic side (harness self-test).
OracleCheckResult oracle_check(const JobConfig& job, bool corrupt_rate_sign, std::size_t workers);

struct FitOutcome {
  std::string source;
  std::optional<FitResult> result;
  std::string error;
};

/// Fits each trace separately (no-drive, three-lorentzian) or all jointly (full-analytic).
std::vector<FitOutcome> fit_traces(const JobConfig& job, const std::vector<SpectrumTrace>& traces,
                                   const std::vector<std::string>& sources, std::size_t workers);

struct GainSweepRow {
  std::string source;
  double gain_db = 0.0;
  double m_minus_n = 0.0;
  double sigma = 0.0;
  double squeezing_db = 0.0;
  bool converged = false;
  std::string error;
};

struct GainSweepResult {
  std::vector<SpectrumTrace> traces;  // synthesized chain when no inputs were given
  std::vector<FitOutcome> fits;
  std::vector<GainSweepRow> rows;
  std::optional<FitResult> efficiency;
  std::string efficiency_error;
  std::vector<std::string> warnings;
};

/// Empty `inputs` synthesizes no-drive traces at job.gains.
GainSweepResult sweep_gain(const JobConfig& job, const std::vector<SpectrumTrace>& inputs,
                           const std::vector<std::string>& sources, std::size_t workers);

struct PhaseSweepRow {
  std::string source;
  double phi = 0.0;
  double center = 0.0;
  double center_sigma = 0.0;
  double sideband = 0.0;
  double sideband_sigma = 0.0;
  double predicted_center = 0.0;    // NaN without a known bath
  double predicted_sideband = 0.0;  // NaN without a known bath
  bool converged = false;
  std::string error;
};

struct PhaseSweepResult {
  std::vector<SpectrumTrace> traces;
  std::vector<FitOutcome> fits;
  std::vector<PhaseSweepRow> rows;
  SinusoidFit center_fit;
  SinusoidFit sideband_fit;
  double center_r2 = 0.0;     // fitted sinusoid vs measured widths
  double sideband_r2 = 0.0;
  std::optional<double> center_r2_predicted;    // measured vs strong-drive widths
  std::optional<double> sideband_r2_predicted;
  double phase_offset = 0.0;  // sideband phase minus center phase, wrapped to [0, pi)
  std::vector<std::string> warnings;
};

/// Empty `inputs` synthesizes driven traces at job.phis.
PhaseSweepResult sweep_phase(const JobConfig& job, const std::vector<SpectrumTrace>& inputs,
                             const std::vector<std::string>& sources, std::size_t workers);

}  // namespace sqfluor::cli
