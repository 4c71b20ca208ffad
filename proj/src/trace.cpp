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

#include "sqfluor/trace.hpp"

#include <algorithm>
#include <cmath>

#include "sqfluor/error.hpp"

namespace sqfluor {

std::string to_string(FrequencyUnit u) { return u == FrequencyUnit::gamma ? "gamma" : "hz"; }

FrequencyUnit frequency_unit_from_string(const std::string& s) {
  if (s == "gamma") return FrequencyUnit::gamma;
  if (s == "hz" || s == "Hz") return FrequencyUnit::hertz;
  throw Error("unknown frequency unit '" + s + "' (expected gamma or hz)");
}

SpectrumTrace::SpectrumTrace(std::vector<double> offsets, std::vector<double> values, TraceMetadata metadata,
                             std::vector<double> sigmas)
    : offsets_(std::move(offsets)),
      values_(std::move(values)),
      sigmas_(std::move(sigmas)),
      metadata_(std::move(metadata)) {
  std::sort(metadata_.mask.begin(), metadata_.mask.end());
  metadata_.mask.erase(std::unique(metadata_.mask.begin(), metadata_.mask.end()), metadata_.mask.end());
  validate();
}

void SpectrumTrace::validate() const {
  if (offsets_.size() != values_.size()) throw Error("trace offsets and values differ in length");
  if (!sigmas_.empty() && sigmas_.size() != values_.size()) throw Error("trace sigmas and values differ in length");
  for (std::size_t i = 0; i < offsets_.size(); ++i) {
    if (!std::isfinite(offsets_[i])) throw Error("trace offset " + std::to_string(i) + " is not finite");
    if (!std::isfinite(values_[i])) throw Error("trace value " + std::to_string(i) + " is not finite");
    if (i > 0 && !(offsets_[i] > offsets_[i - 1])) {
      throw Error("trace offsets must be strictly increasing (index " + std::to_string(i) + ")");
    }
  }
  for (double s : sigmas_) {
    if (!(s > 0.0) || !std::isfinite(s)) throw Error("trace uncertainties must be positive and finite");
  }
  for (std::size_t idx : metadata_.mask) {
    if (idx >= offsets_.size()) throw Error("mask index " + std::to_string(idx) + " out of range");
  }
}

void SpectrumTrace::set_metadata(TraceMetadata metadata) {
  std::sort(metadata.mask.begin(), metadata.mask.end());
  metadata.mask.erase(std::unique(metadata.mask.begin(), metadata.mask.end()), metadata.mask.end());
  std::swap(metadata_, metadata);
  try {
    validate();
  } catch (...) {
    std::swap(metadata_, metadata);
    throw;
  }
}

void SpectrumTrace::set_mask(std::vector<std::size_t> mask) {
  TraceMetadata m = metadata_;
  m.mask = std::move(mask);
  set_metadata(std::move(m));
}

bool SpectrumTrace::excluded(std::size_t i) const {
  return std::binary_search(metadata_.mask.begin(), metadata_.mask.end(), i);
}

std::size_t SpectrumTrace::active_size() const { return size() - metadata_.mask.size(); }

std::vector<double> SpectrumTrace::offsets_in_gamma() const {
  if (metadata_.units == FrequencyUnit::gamma) return offsets_;
  if (!metadata_.gamma_hz || !(*metadata_.gamma_hz > 0.0)) {
    throw Error("trace in Hz needs a positive gamma_hz to convert offsets");
  }
  std::vector<double> out(offsets_.size());
  std::transform(offsets_.begin(), offsets_.end(), out.begin(),
                 [g = *metadata_.gamma_hz](double f) { return f / g; });
  return out;
}

std::vector<double> uniform_grid(double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo)) throw Error("uniform grid needs n >= 2 and hi > lo");
  std::vector<double> g(n);
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + step * static_cast<double>(i);
  g.back() = hi;
  return g;
}

std::vector<std::size_t> mask_around_zero(std::span<const double> offsets, std::size_t half_width) {
  if (offsets.empty()) return {};
  std::size_t best = 0;
  for (std::size_t i = 1; i < offsets.size(); ++i) {
    if (std::abs(offsets[i]) < std::abs(offsets[best])) best = i;
  }
  std::vector<std::size_t> mask;
  const std::size_t lo = best >= half_width ? best - half_width : 0;
  const std::size_t hi = std::min(offsets.size() - 1, best + half_width);
  for (std::size_t i = lo; i <= hi; ++i) mask.push_back(i);
  return mask;
}

}  // namespace sqfluor
