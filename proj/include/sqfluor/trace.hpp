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

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sqfluor {

enum class FrequencyUnit { gamma, hertz };

std::string to_string(FrequencyUnit u);
FrequencyUnit frequency_unit_from_string(const std::string& s);

/// Acquisition fields carried alongside a sampled spectrum.
struct TraceMetadata {
  FrequencyUnit units = FrequencyUnit::gamma;
  std::optional<double> gamma_hz;  // linewidth gamma / 2pi in Hz
  std::optional<double> eta_c;
  std::optional<double> gain_db;
  std::optional<double> phi_rad;
  std::optional<double> rabi_hz;  // Omega / 2pi in Hz
  std::optional<std::uint64_t> seed;
  std::string normalization;
  std::vector<std::size_t> mask;  // excluded sample indices, sorted and unique
  std::map<std::string, std::string> extra;

  bool operator==(const TraceMetadata&) const = default;
};

/// A sampled spectrum: strictly increasing frequency offsets from the atomic
/// resonance and the corresponding power values. Optional per-point
/// uncertainties switch fits to weighted least squares.
class SpectrumTrace {
 public:
  SpectrumTrace() = default;
  SpectrumTrace(std::vector<double> offsets, std::vector<double> values, TraceMetadata metadata = {},
                std::vector<double> sigmas = {});

  const std::vector<double>& offsets() const noexcept { return offsets_; }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<double>& sigmas() const noexcept { return sigmas_; }
  const TraceMetadata& metadata() const noexcept { return metadata_; }
  std::size_t size() const noexcept { return offsets_.size(); }
  bool has_sigmas() const noexcept { return !sigmas_.empty(); }

  /// Replaces the metadata after re-validating the mask against the samples.
  void set_metadata(TraceMetadata metadata);
  void set_mask(std::vector<std::size_t> mask);

  bool excluded(std::size_t i) const;
  /// Number of samples not covered by the mask.
  std::size_t active_size() const;

  /// Offsets in units of gamma; Hz traces need metadata.gamma_hz.
  std::vector<double> offsets_in_gamma() const;

  bool operator==(const SpectrumTrace&) const = default;

 private:
  void validate() const;

  std::vector<double> offsets_;
  std::vector<double> values_;
  std::vector<double> sigmas_;
  TraceMetadata metadata_;
};

/// n equally spaced points from lo to hi inclusive.
std::vector<double> uniform_grid(double lo, double hi, std::size_t n);

/// Indices within `half_width` grid points of the sample closest to zero offset.
std::vector<std::size_t> mask_around_zero(std::span<const double> offsets, std::size_t half_width);

}  // namespace sqfluor
