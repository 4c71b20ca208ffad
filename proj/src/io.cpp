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

#include "sqfluor/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "sqfluor/error.hpp"

#ifndef SQFLUOR_VERSION
#define SQFLUOR_VERSION "0.0.0"
#endif

namespace sqfluor {
namespace {

using nlohmann::json;

bool valid_extra_key(const std::string& k) {
  return !k.empty() && std::all_of(k.begin(), k.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& s, std::size_t line, const std::string& what) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ParseError("cannot parse " + what + " '" + t + "' as a number", line);
  }
  return v;
}

std::uint64_t parse_unsigned(const std::string& s, std::size_t line, const std::string& what) {
  const std::string t = trim(s);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ParseError("cannot parse " + what + " '" + t + "' as an unsigned integer", line);
  }
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// Collects every schema problem before failing.
class Schema {
 public:
  void problem(const std::string& p) { problems_.push_back(p); }
  void fail_if_any() const {
    if (!problems_.empty()) throw SchemaError(problems_);
  }

  bool object(const json& j, const std::string& path) {
    if (!j.is_object()) {
      problem(path + ": expected an object");
      return false;
    }
    return true;
  }

  void only(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
    for (const auto& [k, _] : j.items()) {
      if (std::find_if(keys.begin(), keys.end(), [&](const char* a) { return k == a; }) == keys.end()) {
        problem(path + (path.empty() ? "" : ".") + k + ": unknown key");
      }
    }
  }

  std::optional<double> number(const json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) return std::nullopt;
    const json& v = j.at(key);
    if (!v.is_number()) {
      problem(full(path, key) + ": expected a number");
      return std::nullopt;
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
      problem(full(path, key) + ": must be finite");
      return std::nullopt;
    }
    return x;
  }

  std::optional<std::uint64_t> unsigned_int(const json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) return std::nullopt;
    const json& v = j.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      problem(full(path, key) + ": expected a non-negative integer");
      return std::nullopt;
    }
    return v.get<std::uint64_t>();
  }

  std::optional<std::string> string(const json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) return std::nullopt;
    if (!j.at(key).is_string()) {
      problem(full(path, key) + ": expected a string");
      return std::nullopt;
    }
    return j.at(key).get<std::string>();
  }

  std::optional<std::vector<double>> numbers(const json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) return std::nullopt;
    const json& v = j.at(key);
    if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); })) {
      problem(full(path, key) + ": expected an array of numbers");
      return std::nullopt;
    }
    return v.get<std::vector<double>>();
  }

  template <class F>
  auto parsed(const std::string& where, F&& f) -> std::optional<decltype(f())> {
    try {
      return f();
    } catch (const Error& e) {
      problem(where + ": " + e.what());
      return std::nullopt;
    }
  }

  static std::string full(const std::string& path, const char* key) {
    return path.empty() ? std::string(key) : path + "." + key;
  }

 private:
  std::vector<std::string> problems_;
};

void require(Schema& s, bool ok, const std::string& msg) {
  if (!ok) s.problem(msg);
}

std::string fmt_bound(const std::string& key, const std::string& rule, double got) {
  return key + ": must be " + rule + " (got " + format_double(got) + ")";
}

json json_number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

std::string format_trace(const SpectrumTrace& trace) {
  const TraceMetadata& m = trace.metadata();
  std::ostringstream out;
  out << "# " << kTraceMagic << "\n";
  out << "# units=" << to_string(m.units) << "\n";
  auto opt = [&](const char* key, const std::optional<double>& v) {
    if (v) out << "# " << key << "=" << format_double(*v) << "\n";
  };
  opt("gamma_hz", m.gamma_hz);
  opt("eta_c", m.eta_c);
  opt("gain_db", m.gain_db);
  opt("phi_rad", m.phi_rad);
  opt("rabi_hz", m.rabi_hz);
  if (m.seed) out << "# seed=" << *m.seed << "\n";
  if (!m.normalization.empty()) {
    if (m.normalization.find('\n') != std::string::npos) throw Error("normalization tag must be a single line");
    out << "# normalization=" << m.normalization << "\n";
  }
  if (!m.mask.empty()) {
    out << "# mask=";
    for (std::size_t i = 0; i < m.mask.size(); ++i) out << (i ? "," : "") << m.mask[i];
    out << "\n";
  }
  for (const auto& [k, v] : m.extra) {
    if (!valid_extra_key(k)) throw Error("extra metadata key '" + k + "' has characters outside [A-Za-z0-9_.-]");
    if (v.find('\n') != std::string::npos) throw Error("extra metadata value for '" + k + "' spans lines");
    out << "# extra." << k << "=" << v << "\n";
  }
  out << "# columns=" << (trace.has_sigmas() ? "offset,power,sigma" : "offset,power") << "\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out << format_double(trace.offsets()[i]) << ' ' << format_double(trace.values()[i]);
    if (trace.has_sigmas()) out << ' ' << format_double(trace.sigmas()[i]);
    out << '\n';
  }
  return out.str();
}

SpectrumTrace parse_trace(const std::string& text) {
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  TraceMetadata meta;
  std::optional<int> columns;
  bool magic = false;
  bool units_seen = false;
  std::vector<double> offsets;
  std::vector<double> values;
  std::vector<double> sigmas;
  std::vector<std::string> seen;

  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (columns) throw ParseError("header line after the data started", line_no);
      const std::string body = trim(line.substr(1));
      if (!magic) {
        if (body != kTraceMagic) throw ParseError("missing '# " + std::string(kTraceMagic) + "' signature", line_no);
        magic = true;
        continue;
      }
      const auto eq = body.find('=');
      if (eq == std::string::npos) throw ParseError("header line is not key=value", line_no);
      const std::string key = trim(body.substr(0, eq));
      const std::string val = trim(body.substr(eq + 1));
      if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
        throw ParseError("duplicate header key '" + key + "'", line_no);
      }
      seen.push_back(key);
      if (key == "units") {
        try {
          meta.units = frequency_unit_from_string(val);
        } catch (const Error& e) {
          throw ParseError(e.what(), line_no);
        }
        units_seen = true;
      } else if (key == "gamma_hz") {
        meta.gamma_hz = parse_number(val, line_no, key);
      } else if (key == "eta_c") {
        meta.eta_c = parse_number(val, line_no, key);
      } else if (key == "gain_db") {
        meta.gain_db = parse_number(val, line_no, key);
      } else if (key == "phi_rad") {
        meta.phi_rad = parse_number(val, line_no, key);
      } else if (key == "rabi_hz") {
        meta.rabi_hz = parse_number(val, line_no, key);
      } else if (key == "seed") {
        meta.seed = parse_unsigned(val, line_no, key);
      } else if (key == "normalization") {
        meta.normalization = val;
      } else if (key == "mask") {
        for (const auto& item : split(val, ',')) meta.mask.push_back(parse_unsigned(item, line_no, "mask index"));
      } else if (key.rfind("extra.", 0) == 0 && valid_extra_key(key.substr(6))) {
        meta.extra[key.substr(6)] = val;
      } else if (key == "columns") {
        if (val == "offset,power") {
          columns = 2;
        } else if (val == "offset,power,sigma") {
          columns = 3;
        } else {
          throw ParseError("unsupported columns '" + val + "'", line_no);
        }
      } else {
        throw ParseError("unknown header key '" + key + "'", line_no);
      }
      continue;
    }
    if (!magic) throw ParseError("missing '# " + std::string(kTraceMagic) + "' signature", line_no);
    if (!columns) throw ParseError("data before the '# columns=' header", line_no);
    std::istringstream fields(line);
    std::vector<std::string> cells;
    for (std::string c; fields >> c;) cells.push_back(c);
    if (cells.size() != static_cast<std::size_t>(*columns)) {
      throw ParseError("expected " + std::to_string(*columns) + " columns, found " + std::to_string(cells.size()),
                       line_no);
    }
    const double w = parse_number(cells[0], line_no, "offset");
    const double p = parse_number(cells[1], line_no, "power");
    if (!std::isfinite(w) || !std::isfinite(p)) throw ParseError("non-finite sample", line_no);
    if (!offsets.empty() && !(w > offsets.back())) {
      throw ParseError("offsets must be strictly increasing (" + cells[0] + " follows " +
                           format_double(offsets.back()) + ")",
                       line_no);
    }
    offsets.push_back(w);
    values.push_back(p);
    if (*columns == 3) {
      const double s = parse_number(cells[2], line_no, "sigma");
      if (!(s > 0.0) || !std::isfinite(s)) throw ParseError("sigma must be positive and finite", line_no);
      sigmas.push_back(s);
    }
  }
  if (!magic) throw ParseError("empty trace file", 0);
  if (!units_seen) throw ParseError("header lacks the required 'units' key", 0);
  if (!columns) throw ParseError("header lacks the required 'columns' key", 0);
  for (std::size_t i : meta.mask) {
    if (i >= offsets.size()) throw ParseError("mask index " + std::to_string(i) + " is out of range", 0);
  }
  if (!std::is_sorted(meta.mask.begin(), meta.mask.end()) ||
      std::adjacent_find(meta.mask.begin(), meta.mask.end()) != meta.mask.end()) {
    throw ParseError("mask must be sorted and free of duplicates", 0);
  }
  if (meta.units == FrequencyUnit::hertz && !meta.gamma_hz) {
    throw ParseError("traces in hz need gamma_hz to convert offsets", 0);
  }
  try {
    return SpectrumTrace(std::move(offsets), std::move(values), std::move(meta), std::move(sigmas));
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(e.what(), 0);
  }
}

void write_text(const std::string& text, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_trace(const SpectrumTrace& trace, const std::filesystem::path& path) {
  write_text(format_trace(trace), path);
}

SpectrumTrace read_trace(const std::filesystem::path& path) {
  try {
    return parse_trace(read_text(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

SqueezedBath JobConfig::bath() const {
  if (gain_db) return bath_from_gain({*gain_db, efficiency}).with_phi(phi);
  return SqueezedBath(n.value_or(0.0), m.value_or(0.0), phi);
}

AtomParams JobConfig::atom() const { return AtomParams(2.0 * kPi * gamma_hz, eta_c, rabi); }

std::vector<double> JobConfig::grid_gamma() const {
  if (!grid) {
    if (model == "no-drive") return uniform_grid(-10.0, 10.0, 2001);
    return default_grid(bath(), atom());
  }
  std::vector<double> g = uniform_grid(grid->min, grid->max, grid->points);
  if (grid->units == FrequencyUnit::hertz) {
    for (double& x : g) x /= gamma_hz;
  }
  return g;
}

JobConfig parse_job(const nlohmann::json& doc) {
  Schema s;
  JobConfig job;
  if (!s.object(doc, "job")) s.fail_if_any();
  s.only(doc, "", {"model", "bath", "atom", "grid", "background", "noise", "linear_terms", "fit", "oracle", "sweep",
                   "inputs", "out_dir"});

  if (auto v = s.string(doc, "", "model")) {
    static const char* models[] = {"reflection", "fluorescence", "no-drive", "strong-drive", "oracle"};
    if (std::find_if(std::begin(models), std::end(models), [&](const char* m) { return *v == m; }) ==
        std::end(models)) {
      s.problem("model: unknown model '" + *v + "'");
    } else {
      job.model = *v;
    }
  }

  if (doc.contains("bath") && s.object(doc.at("bath"), "bath")) {
    const json& b = doc.at("bath");
    s.only(b, "bath", {"n", "m", "phi", "gain_db", "efficiency"});
    job.n = s.number(b, "bath", "n");
    job.m = s.number(b, "bath", "m");
    job.gain_db = s.number(b, "bath", "gain_db");
    job.efficiency = s.number(b, "bath", "efficiency").value_or(job.efficiency);
    job.phi = s.number(b, "bath", "phi").value_or(job.phi);
    if (job.n && *job.n < 0.0) s.problem(fmt_bound("bath.n", ">= 0", *job.n));
    if (job.m && *job.m < 0.0) s.problem(fmt_bound("bath.m", ">= 0", *job.m));
    if (job.n && job.m && *job.n >= 0.0 && *job.m > std::sqrt(*job.n * (*job.n + 1.0)) + kPhysicalityTolerance) {
      s.problem(fmt_bound("bath.m", "<= sqrt(n (n + 1))", *job.m));
    }
    if (job.gain_db && (job.n || job.m)) s.problem("bath: give either gain_db or n/m, not both");
    if (job.gain_db && *job.gain_db < 0.0) s.problem(fmt_bound("bath.gain_db", ">= 0", *job.gain_db));
    if (!(job.efficiency > 0.0 && job.efficiency <= 1.0)) {
      s.problem(fmt_bound("bath.efficiency", "in (0, 1]", job.efficiency));
    }
  }

  if (doc.contains("atom") && s.object(doc.at("atom"), "atom")) {
    const json& a = doc.at("atom");
    s.only(a, "atom", {"gamma_hz", "eta_c", "rabi"});
    job.gamma_hz = s.number(a, "atom", "gamma_hz").value_or(job.gamma_hz);
    job.eta_c = s.number(a, "atom", "eta_c").value_or(job.eta_c);
    job.rabi = s.number(a, "atom", "rabi").value_or(job.rabi);
    require(s, job.gamma_hz > 0.0, fmt_bound("atom.gamma_hz", "> 0", job.gamma_hz));
    require(s, job.eta_c > 0.0 && job.eta_c <= 1.0, fmt_bound("atom.eta_c", "in (0, 1]", job.eta_c));
    require(s, job.rabi >= 0.0, fmt_bound("atom.rabi", ">= 0", job.rabi));
  }

  if (doc.contains("grid") && s.object(doc.at("grid"), "grid")) {
    const json& g = doc.at("grid");
    s.only(g, "grid", {"min", "max", "points", "units"});
    GridSpec spec;
    spec.min = s.number(g, "grid", "min").value_or(spec.min);
    spec.max = s.number(g, "grid", "max").value_or(spec.max);
    spec.points = s.unsigned_int(g, "grid", "points").value_or(spec.points);
    if (auto u = s.string(g, "grid", "units")) {
      if (auto unit = s.parsed("grid.units", [&] { return frequency_unit_from_string(*u); })) spec.units = *unit;
    }
    require(s, spec.min < spec.max, "grid: min must be below max");
    require(s, spec.points >= 2, "grid.points: must be >= 2");
    job.grid = spec;
  }

  if (doc.contains("background") && s.object(doc.at("background"), "background")) {
    const json& b = doc.at("background");
    s.only(b, "background", {"shape", "bandwidth", "curvature"});
    if (auto v = s.string(b, "background", "shape")) {
      if (auto shape = s.parsed("background.shape", [&] { return background_shape_from_string(*v); })) {
        job.background.shape = *shape;
      }
    }
    job.background.bandwidth = s.number(b, "background", "bandwidth").value_or(0.0);
    if (auto c = s.number(b, "background", "curvature")) job.background.curvature = *c;
    if (job.background.shape == BackgroundShape::lorentzian_filtered && !(job.background.bandwidth > 0.0)) {
      s.problem("background.bandwidth: must be > 0 for the lorentzian-filtered shape");
    }
    if (job.background.shape == BackgroundShape::parabolic && !(job.background.bandwidth > 0.0) &&
        !std::isfinite(job.background.curvature)) {
      s.problem("background: the parabolic shape needs bandwidth > 0 or an explicit curvature");
    }
  }

  if (doc.contains("noise") && s.object(doc.at("noise"), "noise")) {
    const json& n = doc.at("noise");
    s.only(n, "noise", {"sigma", "seed"});
    job.noise.relative_sigma = s.number(n, "noise", "sigma").value_or(0.0);
    job.noise.seed = s.unsigned_int(n, "noise", "seed").value_or(0);
    require(s, job.noise.relative_sigma >= 0.0, fmt_bound("noise.sigma", ">= 0", job.noise.relative_sigma));
  }

  if (doc.contains("linear_terms") && s.object(doc.at("linear_terms"), "linear_terms")) {
    const json& l = doc.at("linear_terms");
    s.only(l, "linear_terms", {"scale", "offset", "linear", "quadratic"});
    job.scale = s.number(l, "linear_terms", "scale").value_or(job.scale);
    job.offset = s.number(l, "linear_terms", "offset").value_or(job.offset);
    job.linear = s.number(l, "linear_terms", "linear").value_or(job.linear);
    job.quadratic = s.number(l, "linear_terms", "quadratic").value_or(job.quadratic);
  }

  if (doc.contains("fit") && s.object(doc.at("fit"), "fit")) {
    const json& f = doc.at("fit");
    s.only(f, "fit", {"kind", "coordinates", "background_degree", "fixed_scale", "known_offset", "phase_offsets"});
    if (auto v = s.string(f, "fit", "kind")) {
      if (auto k = s.parsed("fit.kind", [&] { return fit_kind_from_string(*v); })) job.fit.kind = *k;
    }
    if (auto v = s.string(f, "fit", "coordinates")) {
      if (*v == "n-r") {
        job.fit.coordinates = Coordinates::n_r;
      } else if (*v == "n-m") {
        job.fit.coordinates = Coordinates::n_m;
      } else {
        s.problem("fit.coordinates: expected 'n-r' or 'n-m'");
      }
    }
    if (f.contains("background_degree")) {
      if (!f.at("background_degree").is_number_integer()) {
        s.problem("fit.background_degree: expected an integer");
      } else {
        job.fit.background_degree = f.at("background_degree").get<int>();
        require(s, job.fit.background_degree >= -1 && job.fit.background_degree <= 4,
                "fit.background_degree: must lie in [-1, 4]");
      }
    }
    job.fit.fixed_scale = s.number(f, "fit", "fixed_scale");
    job.fit.known_offset = s.number(f, "fit", "known_offset");
    job.fit.phase_offsets = s.numbers(f, "fit", "phase_offsets").value_or(std::vector<double>{});
  }

  if (doc.contains("oracle") && s.object(doc.at("oracle"), "oracle")) {
    const json& o = doc.at("oracle");
    s.only(o, "oracle", {"sets", "seed", "tolerance", "quadrature", "step", "horizon"});
    job.oracle.sets = s.unsigned_int(o, "oracle", "sets").value_or(job.oracle.sets);
    job.oracle.seed = s.unsigned_int(o, "oracle", "seed").value_or(job.oracle.seed);
    job.oracle.tolerance = s.number(o, "oracle", "tolerance").value_or(job.oracle.tolerance);
    job.oracle.step = s.number(o, "oracle", "step").value_or(0.0);
    job.oracle.horizon = s.number(o, "oracle", "horizon").value_or(0.0);
    if (auto q = s.string(o, "oracle", "quadrature")) {
      if (auto v = s.parsed("oracle.quadrature", [&] { return quadrature_from_string(*q); })) job.oracle.quadrature = *v;
    }
    require(s, job.oracle.sets >= 1, "oracle.sets: must be >= 1");
    require(s, job.oracle.tolerance > 0.0, fmt_bound("oracle.tolerance", "> 0", job.oracle.tolerance));
    require(s, job.oracle.step >= 0.0, fmt_bound("oracle.step", ">= 0", job.oracle.step));
    require(s, job.oracle.horizon >= 0.0, fmt_bound("oracle.horizon", ">= 0", job.oracle.horizon));
  }

  if (doc.contains("sweep") && s.object(doc.at("sweep"), "sweep")) {
    const json& w = doc.at("sweep");
    s.only(w, "sweep", {"phis", "gains"});
    job.phis = s.numbers(w, "sweep", "phis").value_or(std::vector<double>{});
    job.gains = s.numbers(w, "sweep", "gains").value_or(std::vector<double>{});
    for (double g : job.gains) {
      if (g < 0.0) s.problem(fmt_bound("sweep.gains", ">= 0", g));
    }
  }

  if (doc.contains("inputs")) {
    const json& in = doc.at("inputs");
    if (!in.is_array() || !std::all_of(in.begin(), in.end(), [](const json& e) { return e.is_string(); })) {
      s.problem("inputs: expected an array of strings");
    } else {
      job.inputs = in.get<std::vector<std::string>>();
    }
  }
  job.out_dir = s.string(doc, "", "out_dir").value_or("");
  s.fail_if_any();
  return job;
}

JobConfig read_job(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw SchemaError({path.string() + ": invalid JSON: " + e.what()});
  }
  return parse_job(doc);
}

json job_to_json(const JobConfig& job) {
  json j;
  j["model"] = job.model;
  json b;
  if (job.gain_db) b["gain_db"] = *job.gain_db;
  if (job.n) b["n"] = *job.n;
  if (job.m) b["m"] = *job.m;
  b["efficiency"] = job.efficiency;
  b["phi"] = job.phi;
  j["bath"] = b;
  j["atom"] = {{"gamma_hz", job.gamma_hz}, {"eta_c", job.eta_c}, {"rabi", job.rabi}};
  if (job.grid) {
    j["grid"] = {{"min", job.grid->min},
                 {"max", job.grid->max},
                 {"points", job.grid->points},
                 {"units", to_string(job.grid->units)}};
  }
  json bg = {{"shape", to_string(job.background.shape)}, {"bandwidth", job.background.bandwidth}};
  if (std::isfinite(job.background.curvature)) bg["curvature"] = job.background.curvature;
  j["background"] = bg;
  j["noise"] = {{"sigma", job.noise.relative_sigma}, {"seed", job.noise.seed}};
  j["linear_terms"] = {
      {"scale", job.scale}, {"offset", job.offset}, {"linear", job.linear}, {"quadratic", job.quadratic}};
  json f = {{"kind", to_string(job.fit.kind)},
            {"coordinates", job.fit.coordinates == Coordinates::n_r ? "n-r" : "n-m"},
            {"background_degree", job.fit.background_degree},
            {"phase_offsets", job.fit.phase_offsets}};
  if (job.fit.fixed_scale) f["fixed_scale"] = *job.fit.fixed_scale;
  if (job.fit.known_offset) f["known_offset"] = *job.fit.known_offset;
  j["fit"] = f;
  j["oracle"] = {{"sets", job.oracle.sets},
                 {"seed", job.oracle.seed},
                 {"tolerance", job.oracle.tolerance},
                 {"quadrature", to_string(job.oracle.quadrature)},
                 {"step", job.oracle.step},
                 {"horizon", job.oracle.horizon}};
  j["sweep"] = {{"phis", job.phis}, {"gains", job.gains}};
  j["inputs"] = job.inputs;
  if (!job.out_dir.empty()) j["out_dir"] = job.out_dir;
  return j;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text(path)); }

const char* library_version() { return SQFLUOR_VERSION; }

json report_to_json(const FitResult& result, const Provenance& provenance) {
  json estimates = json::object();
  for (std::size_t i = 0; i < result.names.size(); ++i) {
    estimates[result.names[i]] = {{"value", json_number(result.values[static_cast<Eigen::Index>(i)])},
                                  {"sigma", json_number(result.sigma(result.names[i]))}};
  }
  json derived = json::object();
  for (const auto& [k, v] : result.derived) {
    const auto s = result.derived_sigma.find(k);
    derived[k] = {{"value", json_number(v)},
                  {"sigma", json_number(s == result.derived_sigma.end() ? std::nan("") : s->second)}};
  }
  json cov = json::array();
  for (Eigen::Index r = 0; r < result.covariance.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < result.covariance.cols(); ++c) row.push_back(json_number(result.covariance(r, c)));
    cov.push_back(row);
  }
  json inputs = json::array();
  for (const auto& in : provenance.inputs) inputs.push_back({{"path", in.path}, {"sha256", in.sha256}});
  json prov = {{"command", provenance.command},
               {"inputs", inputs},
               {"version", provenance.version.empty() ? std::string(library_version()) : provenance.version}};
  prov["seed"] = provenance.seed ? json(*provenance.seed) : json(nullptr);
  return {{"model", to_string(result.kind)},
          {"converged", result.converged},
          {"iterations", result.iterations},
          {"points", result.points},
          {"residual_norm", json_number(result.residual_norm)},
          {"chi2_per_dof", json_number(result.chi2_per_dof)},
          {"estimates", estimates},
          {"derived", derived},
          {"covariance", {{"names", result.names}, {"matrix", cov}}},
          {"warnings", result.warnings},
          {"provenance", prov}};
}

std::string canonical_json(const nlohmann::json& doc) { return doc.dump(2) + "\n"; }

void write_json(const nlohmann::json& doc, const std::filesystem::path& path) {
  write_text(canonical_json(doc), path);
}

void write_report(const FitResult& result, const Provenance& provenance, const std::filesystem::path& path) {
  write_json(report_to_json(result, provenance), path);
}

}  // namespace sqfluor
