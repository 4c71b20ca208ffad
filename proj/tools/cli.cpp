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

#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "sqfluor/error.hpp"
#include "sqfluor/oracle.hpp"
#include "sqfluor/spectra.hpp"

namespace sqfluor::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kSumRuleTolerance = 1e-10;
constexpr double kSteadyTolerance = 1e-8;

// Results land in index order, so the worker count never changes the output.
template <class T, class F>
std::vector<T> parallel_map(std::size_t n, std::size_t workers, F&& fn) {
  std::vector<T> out(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out[i] = fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(std::max<std::size_t>(workers, 1), n);
  if (threads <= 1) {
    body();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(body);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || p != item.data() + item.size() || item.empty()) {
      throw UsageError(flag + ": cannot parse '" + item + "' as a number");
    }
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(flag + ": empty list");
  return out;
}

json parse_grid_flag(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ':');) parts.push_back(item);
  if (parts.size() != 3 && parts.size() != 4) throw UsageError("--grid: expected MIN:MAX:POINTS[:UNITS]");
  const auto lo = parse_list(parts[0], "--grid");
  const auto hi = parse_list(parts[1], "--grid");
  const auto pts = parse_list(parts[2], "--grid");
  if (pts[0] < 2 || pts[0] != std::floor(pts[0])) throw UsageError("--grid: POINTS must be an integer >= 2");
  json g = {{"min", lo[0]}, {"max", hi[0]}, {"points", static_cast<std::uint64_t>(pts[0])}};
  if (parts.size() == 4) g["units"] = parts[3];
  return g;
}

std::string fmt(double x) { return format_double(x); }

// Shortest text that round-trips; for labels.
std::string brief(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string fixed(double x, int digits) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << x;
  return s.str();
}

// Columnar text output for sweep tables.
std::string format_table(const std::vector<std::string>& columns, const std::vector<std::vector<double>>& rows) {
  std::ostringstream out;
  out << "# sqfluor-table 1\n# columns=";
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? " " : "") << fmt(row[i]);
    out << "\n";
  }
  return out.str();
}

AtomParams atom_for(const JobConfig& job, const SpectrumTrace& t) {
  const TraceMetadata& m = t.metadata();
  const double gamma_hz = m.gamma_hz.value_or(job.gamma_hz);
  const double rabi = m.rabi_hz ? *m.rabi_hz / gamma_hz : job.rabi;
  return AtomParams(2.0 * kPi * gamma_hz, m.eta_c.value_or(job.eta_c), rabi);
}

FitOptions fit_options(const JobConfig& job) {
  FitOptions o;
  o.coordinates = job.fit.coordinates;
  o.background_degree = job.fit.background_degree;
  o.fixed_scale = job.fit.fixed_scale;
  o.background = job.background;
  return o;
}

SynthesisSpec synthesis_for(const JobConfig& job, FitKind kind, const SqueezedBath& bath, const AtomParams& atom) {
  SynthesisSpec s;
  s.kind = kind;
  s.bath = bath;
  s.atom = atom;
  s.background = job.background;
  s.scale = job.scale;
  s.offset = job.offset;
  s.linear = job.linear;
  s.quadratic = job.quadratic;
  return s;
}

SpectrumTrace with_gain(SpectrumTrace t, std::optional<double> gain_db) {
  if (gain_db) {
    TraceMetadata m = t.metadata();
    m.gain_db = gain_db;
    t.set_metadata(std::move(m));
  }
  return t;
}

bool bath_given(const JobConfig& job) { return job.n || job.m || job.gain_db; }

std::string perturbed_warning(const std::string& where) {
  return where + ": cubic roots nearly degenerate; Omega shifted slightly to lift the degeneracy";
}

double wrap_pi(double x) {
  x = std::fmod(x, kPi);
  return x < 0.0 ? x + kPi : x;
}

// Writes files under the output directory and remembers their digests.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}
  void add(const std::string& rel, const std::string& content) {
    write_text(content, dir_ / rel);
    digests_[rel] = sha256_hex(content);
  }
  json entries() const {
    json out = json::array();
    for (const auto& [path, digest] : digests_) out.push_back({{"path", path}, {"sha256", digest}});
    return out;
  }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::map<std::string, std::string> digests_;
};

struct Context {
  std::string command;
  std::string preset;
  JobConfig job;
  std::vector<InputDigest> inputs;
  std::vector<std::string> warnings;
  std::size_t workers = 1;
  Outputs outputs;
  json summary = json::object();
  std::vector<std::string> lines;

  Provenance provenance(std::optional<std::uint64_t> seed) const {
    Provenance p;
    p.command = preset.empty() ? command : command + " " + preset;
    p.inputs = inputs;
    p.seed = seed;
    return p;
  }
  std::optional<std::uint64_t> noise_seed() const {
    return job.noise.relative_sigma > 0.0 ? std::optional<std::uint64_t>(job.noise.seed) : std::nullopt;
  }
};

json fit_brief(const FitOutcome& f) {
  json j = {{"source", f.source}};
  if (!f.result) {
    j["error"] = f.error;
    return j;
  }
  const FitResult& r = *f.result;
  j["converged"] = r.converged;
  json est = json::object();
  for (const auto& name : r.names) est[name] = {{"value", r.value(name)}, {"sigma", r.sigma(name)}};
  for (const auto& [k, v] : r.derived) {
    const auto s = r.derived_sigma.find(k);
    est[k] = {{"value", v}, {"sigma", s == r.derived_sigma.end() ? std::nan("") : s->second}};
  }
  j["estimates"] = est;
  return j;
}

std::string report_name(const std::string& source, std::size_t index) {
  std::string stem = fs::path(source).stem().string();
  if (stem.empty() || source.rfind("synthetic", 0) == 0) stem = "fit_" + std::to_string(index);
  return "reports/" + std::to_string(index) + "_" + stem + ".report.json";
}

std::string index_name(const std::string& prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%02zu.txt", prefix.c_str(), i);
  return buf;
}

// ---- command bodies -----------------------------------------------------

int do_sim(Context& ctx) {
  SimOutput sim = simulate(ctx.job);
  ctx.warnings.insert(ctx.warnings.end(), sim.warnings.begin(), sim.warnings.end());
  json traces = json::array();
  for (std::size_t i = 0; i < sim.traces.size(); ++i) {
    const std::string rel = sim.traces.size() == 1 ? "traces/trace.txt" : "traces/" + index_name("trace", i);
    ctx.outputs.add(rel, format_trace(sim.traces[i]));
    const auto& t = sim.traces[i];
    const auto peak = std::max_element(t.values().begin(), t.values().end());
    traces.push_back({{"path", rel}, {"points", t.size()}, {"peak", *peak}});
    ctx.lines.push_back("wrote " + rel + " (" + std::to_string(t.size()) + " points, model " + ctx.job.model + ")");
  }
  ctx.summary["traces"] = traces;
  return kExitOk;
}

int report_fits(Context& ctx, const std::vector<FitOutcome>& fits) {
  int code = kExitOk;
  json briefs = json::array();
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const FitOutcome& f = fits[i];
    briefs.push_back(fit_brief(f));
    if (!f.result) {
      ctx.lines.push_back("FAILED " + f.source + ": " + f.error);
      ctx.warnings.push_back(f.source + ": fit failed: " + f.error);
      code = kExitValidation;
      continue;
    }
    const FitResult& r = *f.result;
    const std::string rel = report_name(f.source, i);
    ctx.outputs.add(rel, canonical_json(report_to_json(r, ctx.provenance(ctx.noise_seed()))));
    for (const auto& w : r.warnings) ctx.warnings.push_back(f.source + ": " + w);
    if (!r.converged) code = kExitValidation;
    std::string line = (r.converged ? "fit " : "NOT CONVERGED ") + f.source + " [" + to_string(r.kind) + "]";
    for (const char* key : {"N", "M", "M-N", "squeezing_db", "rabi", "hwhm_0", "hwhm_sideband", "splitting"}) {
      if (r.has(key) || r.derived.count(key)) {
        line += std::string("  ") + key + "=" + fixed(r.value(key), 5) + "+-" + fixed(r.sigma(key), 5);
      }
    }
    ctx.lines.push_back(line);
  }
  ctx.summary["fits"] = briefs;
  return code;
}

int do_fit(Context& ctx, const std::vector<SpectrumTrace>& traces, const std::vector<std::string>& sources) {
  return report_fits(ctx, fit_traces(ctx.job, traces, sources, ctx.workers));
}

int do_sweep_gain(Context& ctx, const std::vector<SpectrumTrace>& inputs, const std::vector<std::string>& sources) {
  GainSweepResult res = sweep_gain(ctx.job, inputs, sources, ctx.workers);
  ctx.warnings.insert(ctx.warnings.end(), res.warnings.begin(), res.warnings.end());
  for (std::size_t i = 0; i < res.traces.size(); ++i) {
    ctx.outputs.add("traces/" + index_name("gain", i), format_trace(res.traces[i]));
  }
  int code = report_fits(ctx, res.fits);
  std::vector<std::vector<double>> table;
  json rows = json::array();
  for (const auto& r : res.rows) {
    if (!r.error.empty()) continue;
    table.push_back({r.gain_db, r.m_minus_n, r.sigma, r.squeezing_db});
    rows.push_back({{"gain_db", r.gain_db}, {"m_minus_n", r.m_minus_n}, {"sigma", r.sigma},
                    {"squeezing_db", r.squeezing_db}, {"converged", r.converged}});
  }
  ctx.outputs.add("sweep_gain.txt", format_table({"gain_db", "m_minus_n", "sigma", "squeezing_db"}, table));
  ctx.summary["rows"] = rows;
  if (res.efficiency) {
    const FitResult& e = *res.efficiency;
    ctx.outputs.add("efficiency.report.json", canonical_json(report_to_json(e, ctx.provenance(ctx.noise_seed()))));
    ctx.summary["eta"] = {{"value", e.value("eta")}, {"sigma", e.sigma("eta")}};
    ctx.lines.push_back("efficiency eta=" + fixed(e.value("eta"), 4) + "+-" + fixed(e.sigma("eta"), 4) + " from " +
                        std::to_string(table.size()) + " gain points");
  } else {
    ctx.lines.push_back("efficiency fit FAILED: " + res.efficiency_error);
    code = kExitValidation;
  }
  return code;
}

int do_sweep_phase(Context& ctx, const std::vector<SpectrumTrace>& inputs, const std::vector<std::string>& sources) {
  PhaseSweepResult res = sweep_phase(ctx.job, inputs, sources, ctx.workers);
  ctx.warnings.insert(ctx.warnings.end(), res.warnings.begin(), res.warnings.end());
  for (std::size_t i = 0; i < res.traces.size(); ++i) {
    ctx.outputs.add("traces/" + index_name("phi", i), format_trace(res.traces[i]));
  }
  int code = report_fits(ctx, res.fits);
  std::vector<std::vector<double>> table;
  json rows = json::array();
  for (const auto& r : res.rows) {
    if (!r.error.empty()) continue;
    table.push_back({r.phi, r.center, r.center_sigma, r.sideband, r.sideband_sigma, res.center_fit(r.phi),
                     res.sideband_fit(r.phi), r.predicted_center, r.predicted_sideband});
    const char* regime = r.center < 0.5 ? "subnatural" : "supernatural";
    rows.push_back({{"phi", r.phi}, {"center_hwhm", r.center}, {"center_sigma", r.center_sigma},
                    {"sideband_hwhm", r.sideband}, {"sideband_sigma", r.sideband_sigma}, {"center_regime", regime}});
    ctx.lines.push_back("phi=" + fixed(r.phi, 4) + "  center HWHM=" + fixed(r.center, 4) + " (" + regime +
                        ")  sideband HWHM=" + fixed(r.sideband, 4));
  }
  ctx.outputs.add("sweep_phase.txt",
                  format_table({"phi_rad", "center_hwhm", "center_sigma", "sideband_hwhm", "sideband_sigma",
                                "center_sinusoid", "sideband_sinusoid", "center_predicted", "sideband_predicted"},
                               table));
  auto sinusoid = [](const SinusoidFit& s, double r2) {
    return json{{"mean", s.mean}, {"cos2phi", s.cos_coeff}, {"sin2phi", s.sin_coeff},
                {"amplitude", s.amplitude()}, {"phase", s.phase()}, {"r_squared", r2}};
  };
  json sin = {{"center", sinusoid(res.center_fit, res.center_r2)},
              {"sideband", sinusoid(res.sideband_fit, res.sideband_r2)},
              {"phase_offset", res.phase_offset}};
  if (res.center_r2_predicted) sin["center"]["r_squared_predicted"] = *res.center_r2_predicted;
  if (res.sideband_r2_predicted) sin["sideband"]["r_squared_predicted"] = *res.sideband_r2_predicted;
  if (table.size() >= 3) {
    ctx.outputs.add("sinusoids.json", canonical_json(sin));
    ctx.lines.push_back("center width ~ " + fixed(res.center_fit.mean, 4) + " + " +
                        fixed(res.center_fit.amplitude(), 4) + " cos 2(phi - delta), delta=" +
                        fixed(res.center_fit.phase(), 4) + ", R^2=" + fixed(res.center_r2, 4));
    ctx.lines.push_back("sideband width ~ " + fixed(res.sideband_fit.mean, 4) + " + " +
                        fixed(res.sideband_fit.amplitude(), 4) + " cos 2(phi - delta), delta=" +
                        fixed(res.sideband_fit.phase(), 4) + ", R^2=" + fixed(res.sideband_r2, 4));
    ctx.lines.push_back("phase offset between sinusoids: " + fixed(res.phase_offset, 4) + " rad");
  } else {
    ctx.lines.push_back("fewer than 3 phases fitted; sinusoids skipped");
  }
  ctx.summary["rows"] = rows;
  ctx.summary["sinusoids"] = sin;
  return code;
}

int do_oracle_check(Context& ctx, bool corrupt) {
  OracleCheckResult res = oracle_check(ctx.job, corrupt, ctx.workers);
  ctx.warnings.insert(ctx.warnings.end(), res.warnings.begin(), res.warnings.end());
  json sets = json::array();
  std::vector<std::vector<double>> table;
  for (const auto& s : res.sets) {
    json j = {{"index", s.index},
              {"n", s.n},
              {"m", s.m},
              {"phi", s.phi},
              {"rabi", s.rabi},
              {"eta_c", s.eta_c},
              {"spectrum_relative_linf", s.spectrum_error},
              {"sum_rule_error", s.sum_rule_error},
              {"steady_state_error", s.steady_error},
              {"perturbed", s.perturbed},
              {"pass", s.pass}};
    if (!s.error.empty()) j["error"] = s.error;
    sets.push_back(j);
    table.push_back({static_cast<double>(s.index), s.n, s.m, s.phi, s.rabi, s.eta_c, s.spectrum_error,
                     s.sum_rule_error, s.steady_error, s.pass ? 1.0 : 0.0});
    if (!s.pass) {
      ctx.lines.push_back("set " + std::to_string(s.index) + " FAILED: " +
                          (s.error.empty() ? "L-inf " + fmt(s.spectrum_error) : s.error));
    }
  }
  json worst = {
      {"spectrum_relative_linf", {{"worst", res.worst_spectrum}, {"tolerance", res.spectrum_tolerance}}},
      {"sum_rule", {{"worst", res.worst_sum_rule}, {"tolerance", res.sum_rule_tolerance}}},
      {"steady_state", {{"worst", res.worst_steady}, {"tolerance", res.steady_tolerance}}}};
  json report = {{"pass", res.pass}, {"sets", sets}, {"properties", worst}, {"warnings", res.warnings},
                 {"corrupted", corrupt}};
  ctx.outputs.add("oracle_check.json", canonical_json(report));
  ctx.outputs.add("oracle_sets.txt",
                  format_table({"index", "n", "m", "phi", "rabi", "eta_c", "spectrum_relative_linf", "sum_rule_error",
                                "steady_state_error", "pass"},
                               table));
  ctx.summary["pass"] = res.pass;
  ctx.summary["properties"] = worst;
  ctx.summary["sets"] = res.sets.size();
  ctx.lines.push_back("spectrum relative L-inf: worst " + fmt(res.worst_spectrum) + " (tolerance " +
                      fmt(res.spectrum_tolerance) + ")");
  ctx.lines.push_back("sum rule: worst " + fmt(res.worst_sum_rule) + " (tolerance " + fmt(res.sum_rule_tolerance) +
                      ")");
  ctx.lines.push_back("steady state: worst " + fmt(res.worst_steady) + " (tolerance " + fmt(res.steady_tolerance) +
                      ")");
  ctx.lines.push_back(std::string(res.pass ? "PASS" : "FAIL") + ": " + std::to_string(res.sets.size()) +
                      " parameter sets");
  return res.pass ? kExitOk : kExitValidation;
}

std::vector<SpectrumTrace> load_inputs(Context& ctx, std::vector<std::string>& paths) {
  if (paths.empty()) paths = ctx.job.inputs;
  std::vector<SpectrumTrace> traces;
  for (const auto& p : paths) {
    if (!fs::exists(p)) throw UsageError("input trace '" + p + "' does not exist");
    std::string text = read_text(p);
    ctx.inputs.push_back({p, sha256_hex(text)});
    try {
      traces.push_back(parse_trace(text));
    } catch (const ParseError& e) {
      throw UsageError(p + ": " + e.what());
    }
  }
  return traces;
}

void write_manifest(Context& ctx, int code) {
  json job = job_to_json(ctx.job);
  job.erase("out_dir");
  json manifest = {{"command", ctx.command},
                   {"preset", ctx.preset.empty() ? json(nullptr) : json(ctx.preset)},
                   {"job", job},
                   {"version", library_version()},
                   {"inputs", json::array()},
                   {"outputs", ctx.outputs.entries()},
                   {"warnings", ctx.warnings},
                   {"notes", preset_notes(ctx.preset)},
                   {"exit_code", code}};
  for (const auto& in : ctx.inputs) manifest["inputs"].push_back({{"path", in.path}, {"sha256", in.sha256}});
  write_text(canonical_json(manifest), ctx.outputs.dir() / "manifest.json");
}

}  // namespace

// ---- presets --------------------------------------------------------------

std::vector<std::string> preset_names() {
  return {"vacuum-mollow", "mollow-threshold", "squeezed-mollow", "fig2a", "fig3", "fig4", "fig6"};
}

json preset_document(const std::string& name) {
  const json experiment_atom = {{"gamma_hz", 304e3}, {"eta_c", 0.81}};
  if (name == "vacuum-mollow") {
    return {{"model", "fluorescence"}, {"bath", {{"n", 0.0}, {"m", 0.0}}}, {"atom", {{"rabi", 5.0}}}};
  }
  if (name == "mollow-threshold") {
    // Vacuum with Omega = gamma / 4: two roots of the cubic coincide.
    return {{"model", "fluorescence"}, {"bath", {{"n", 0.0}, {"m", 0.0}}}, {"atom", {{"rabi", 0.25}}}};
  }
  if (name == "squeezed-mollow") {
    return {{"model", "fluorescence"},
            {"bath", {{"n", 0.21}, {"m", 0.40}, {"phi", kPi / 2}}},
            {"atom", {{"rabi", 4.0}}}};
  }
  if (name == "fig2a") {
    json atom = experiment_atom;
    return {{"model", "no-drive"},
            {"bath", {{"gain_db", 1.4}, {"efficiency", 0.55}, {"phi", 0.0}}},
            {"atom", atom},
            {"noise", {{"sigma", 0.01}, {"seed", 1}}},
            {"fit", {{"kind", "no-drive"}}}};
  }
  if (name == "fig3") {
    json atom = experiment_atom;
    atom["rabi"] = 3.95;  // 1.2 MHz Rabi frequency over the 304 kHz linewidth
    json phis = json::array();
    for (int i = 0; i < 12; ++i) phis.push_back(kPi * i / 12.0);
    return {{"model", "reflection"},
            {"bath", {{"gain_db", 1.5}, {"efficiency", 0.55}}},
            {"atom", atom},
            {"grid", {{"min", -20.0}, {"max", 20.0}, {"points", 2001}}},
            {"noise", {{"sigma", 0.005}, {"seed", 1}}},
            {"linear_terms", {{"offset", 1.0}}},
            {"sweep", {{"phis", phis}}},
            {"fit", {{"kind", "three-lorentzian"}}}};
  }
  if (name == "fig4") {
    json atom = experiment_atom;
    return {{"model", "no-drive"},
            {"bath", {{"efficiency", 0.55}, {"phi", 0.0}}},
            {"atom", atom},
            {"noise", {{"sigma", 0.05}, {"seed", 1}}},
            {"sweep", {{"gains", {0.5, 1.0, 1.4, 2.0, 3.0, 4.0, 5.0, 6.0, 6.6}}}},
            {"fit", {{"kind", "no-drive"}}}};
  }
  if (name == "fig6") {
    json atom = experiment_atom;
    atom["rabi"] = 3.95;
    json phis = json::array();
    for (int i = 0; i < 4; ++i) phis.push_back(kPi / 2 + (i - 1.5) * 0.2);
    return {{"model", "reflection"},
            {"bath", {{"gain_db", 6.6}, {"efficiency", 0.55}, {"phi", kPi / 2}}},
            {"atom", atom},
            {"grid", {{"min", -15.0}, {"max", 15.0}, {"points", 1201}}},
            {"noise", {{"sigma", 0.01}, {"seed", 11}}},
            {"linear_terms", {{"offset", 1.0}}},
            {"sweep", {{"phis", phis}}},
            {"fit", {{"kind", "full-analytic"}}}};
  }
  throw UsageError("unknown preset '" + name + "'");
}

std::vector<std::string> preset_notes(const std::string& name) {
  const std::vector<std::string> common = {
      "total linewidth gamma = 2 pi x 304 kHz (measured Mollow triplet in ordinary vacuum)",
      "strongly coupled port efficiency eta_c = 0.81", "overall efficiency eta = 0.55 from the gain sweep fit"};
  auto with = [&](std::initializer_list<std::string> extra) {
    std::vector<std::string> out = common;
    out.insert(out.end(), extra);
    out.push_back("data are synthetic; measured traces are not distributed");
    return out;
  };
  if (name == "fig2a") return with({"squeezer gain 1.4 dB, no coherent drive", "reported squeezing 2.4 dB"});
  if (name == "fig3") {
    return with({"squeezer gain 1.5 dB", "Rabi frequency 1.2 MHz = 3.95 gamma",
                 "center width subnatural at phi = pi/2, supernatural at phi = 0"});
  }
  if (name == "fig4") return with({"gain sweep fitted by M - N(G) with one free efficiency"});
  if (name == "fig6") {
    return with({"squeezer gain 6.6 dB", "Rabi frequency 1.2 MHz = 3.95 gamma",
                 "four phases near pi/2 fitted jointly", "reported M - N = 0.24"});
  }
  return {};
}

std::size_t worker_count() {
  const char* env = std::getenv("SQFLUOR_WORKERS");
  if (env == nullptr || *env == '\0') return std::max(1u, std::thread::hardware_concurrency());
  std::size_t n = 0;
  const std::string s(env);
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
  if (ec != std::errc() || p != s.data() + s.size() || n == 0) {
    throw UsageError("SQFLUOR_WORKERS must be a positive integer (got '" + s + "')");
  }
  return n;
}

// ---- pipelines ------------------------------------------------------------

SimOutput simulate(const JobConfig& job) {
  SimOutput out;
  std::vector<double> phis = job.phis;
  if (phis.empty()) phis.push_back(job.phi);
  const std::vector<double> grid = job.grid_gamma();
  const bool noisy = job.noise.relative_sigma > 0.0;
  if (noisy && (job.model == "fluorescence" || job.model == "oracle")) {
    throw UsageError("noise applies to the reflection-type models only (model '" + job.model + "')");
  }
  for (std::size_t i = 0; i < phis.size(); ++i) {
    const SqueezedBath bath = job.bath().with_phi(phis[i]);
    AtomParams atom = job.atom();
    const std::string where = "phi=" + fixed(phis[i], 4);
    SpectrumTrace t;
    if (job.model == "fluorescence") {
      FluorescenceResult f = fluorescence_spectrum(bath, atom, grid);
      if (f.perturbed) out.warnings.push_back(perturbed_warning(where));
      t = std::move(f.trace);
    } else if (job.model == "oracle") {
      t = spectrum_numeric(bath, atom, grid, OracleConfig{job.oracle.step, job.oracle.horizon, job.oracle.quadrature});
    } else {
      FitKind kind = FitKind::full_analytic;
      if (job.model == "no-drive") {
        kind = FitKind::no_drive;
        atom = atom.with_rabi(0.0);
      } else if (job.model == "strong-drive") {
        kind = FitKind::three_lorentzian;
      }
      t = synthesize_trace(synthesis_for(job, kind, bath, atom), {job.noise.relative_sigma, job.noise.seed + i}, grid);
      if (t.metadata().extra.count("degenerate_perturbed")) out.warnings.push_back(perturbed_warning(where));
    }
    out.traces.push_back(with_gain(std::move(t), job.gain_db));
  }
  return out;
}

OracleCheckResult oracle_check(const JobConfig& job, bool corrupt_rate_sign, std::size_t workers) {
  struct Params {
    double n, m, phi, rabi, eta_c;
  };
  std::vector<Params> params;
  if (bath_given(job)) {
    const SqueezedBath b = job.bath();
    params.push_back({b.n(), b.m(), b.phi(), job.rabi, job.eta_c});
  } else {
    std::mt19937_64 rng(job.oracle.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < job.oracle.sets; ++i) {
      const double n = 3.0 * u(rng);
      const double r = u(rng);
      const double phi = kPi * u(rng);
      const double rabi = 10.0 * u(rng);
      const double eta = 0.5 + 0.5 * u(rng);
      params.push_back({n, r * std::sqrt(n * (n + 1.0)), phi, rabi, eta});
    }
  }

  OracleCheckResult res;
  res.spectrum_tolerance = job.oracle.tolerance;
  res.sum_rule_tolerance = kSumRuleTolerance;
  res.steady_tolerance = kSteadyTolerance;
  const OracleConfig cfg{job.oracle.step, job.oracle.horizon, job.oracle.quadrature};

  res.sets = parallel_map<OracleSetResult>(params.size(), workers, [&](std::size_t i) {
    const Params& p = params[i];
    OracleSetResult s;
    s.index = i;
    s.n = p.n;
    s.m = p.m;
    s.phi = p.phi;
    s.rabi = p.rabi;
    s.eta_c = p.eta_c;
    try {
      const SqueezedBath bath(p.n, p.m, p.phi);
      const AtomParams atom(1.0, p.eta_c, p.rabi);
      const SqueezedBath analytic = corrupt_rate_sign ? SqueezedBath::unchecked(p.n, -p.m, p.phi) : bath;
      const std::vector<double> grid = job.grid ? job.grid_gamma() : default_grid(bath, atom);

      const BlochModel model = BlochModel::regularized(analytic, atom);
      s.perturbed = model.perturbed();
      const SpectralDecomposition d = model.decomposition();
      Complex total = d.coherent_weight;
      for (const Complex& k : d.amplitudes) total += k;
      s.sum_rule_error = std::abs(total - model.steady().excited_population());

      const BlochState exact = steady_state(analytic, atom);
      const BlochState numeric = oracle_steady_state(bath, atom).bloch();
      s.steady_error = std::max({std::abs(exact.sx - numeric.sx), std::abs(exact.sy - numeric.sy),
                                 std::abs(exact.sz - numeric.sz)});

      const SpectrumTrace an = fluorescence_spectrum(analytic, atom, grid).trace;
      const SpectrumTrace num = spectrum_numeric(bath, atom, grid, cfg);
      s.spectrum_error = relative_linf(an.values(), num.values());
      s.pass = s.spectrum_error < job.oracle.tolerance && s.sum_rule_error < kSumRuleTolerance &&
               s.steady_error < kSteadyTolerance;
    } catch (const InvariantViolation& e) {
      s.error = std::string("integrator invariant violated: ") + e.what();
    } catch (const Error& e) {
      s.error = e.what();
    }
    return s;
  });

  res.pass = !res.sets.empty();
  for (const auto& s : res.sets) {
    res.worst_spectrum = std::max(res.worst_spectrum, s.spectrum_error);
    res.worst_sum_rule = std::max(res.worst_sum_rule, s.sum_rule_error);
    res.worst_steady = std::max(res.worst_steady, s.steady_error);
    res.pass = res.pass && s.pass;
    if (s.perturbed) res.warnings.push_back(perturbed_warning("set " + std::to_string(s.index)));
    if (!s.error.empty()) res.warnings.push_back("set " + std::to_string(s.index) + ": " + s.error);
  }
  return res;
}

std::vector<FitOutcome> fit_traces(const JobConfig& job, const std::vector<SpectrumTrace>& traces,
                                   const std::vector<std::string>& sources, std::size_t workers) {
  if (traces.empty()) throw UsageError("no input traces to fit");
  const FitOptions opts = fit_options(job);
  if (job.fit.known_offset) {
    std::vector<SpectrumTrace> shifted;
    for (const auto& t : traces) {
      std::vector<double> y = t.values();
      for (double& v : y) v -= *job.fit.known_offset;
      shifted.emplace_back(t.offsets(), std::move(y), t.metadata(), t.sigmas());
    }
    JobConfig plain = job;
    plain.fit.known_offset.reset();
    return fit_traces(plain, shifted, sources, workers);
  }
  auto source = [&](std::size_t i) { return i < sources.size() ? sources[i] : "trace " + std::to_string(i); };

  if (job.fit.kind == FitKind::full_analytic) {
    FitOutcome out;
    out.source = "joint";
    try {
      std::vector<double> offsets = job.fit.phase_offsets;
      if (offsets.empty()) {
        const bool all_phases = std::all_of(traces.begin(), traces.end(),
                                            [](const SpectrumTrace& t) { return t.metadata().phi_rad.has_value(); });
        for (const auto& t : traces) {
          offsets.push_back(all_phases ? *t.metadata().phi_rad - *traces.front().metadata().phi_rad : 0.0);
        }
      }
      if (offsets.size() != traces.size()) {
        throw UsageError("fit.phase_offsets has " + std::to_string(offsets.size()) + " entries for " +
                         std::to_string(traces.size()) + " traces");
      }
      out.result = fit_full_joint(traces, atom_for(job, traces.front()), offsets, opts);
    } catch (const UsageError&) {
      throw;
    } catch (const Error& e) {
      out.error = e.what();
    }
    return {out};
  }

  return parallel_map<FitOutcome>(traces.size(), workers, [&](std::size_t i) {
    FitOutcome out;
    out.source = source(i);
    try {
      out.result = job.fit.kind == FitKind::no_drive ? fit_no_drive(traces[i], atom_for(job, traces[i]), opts)
                                                     : fit_three_lorentzian(traces[i], opts);
    } catch (const Error& e) {
      out.error = e.what();
    }
    return out;
  });
}

GainSweepResult sweep_gain(const JobConfig& job, const std::vector<SpectrumTrace>& inputs,
                           const std::vector<std::string>& sources, std::size_t workers) {
  GainSweepResult res;
  std::vector<SpectrumTrace> traces = inputs;
  std::vector<std::string> names = sources;
  if (traces.empty()) {
    if (job.gains.empty()) throw UsageError("sweep-gain needs input traces or sweep.gains");
    JobConfig grid_job = job;
    grid_job.model = "no-drive";
    const std::vector<double> grid = grid_job.grid_gamma();
    const AtomParams atom = job.atom().with_rabi(0.0);
    for (std::size_t i = 0; i < job.gains.size(); ++i) {
      const SqueezedBath bath = bath_from_gain({job.gains[i], job.efficiency}).with_phi(job.phi);
      SpectrumTrace t = synthesize_trace(synthesis_for(job, FitKind::no_drive, bath, atom),
                                         {job.noise.relative_sigma, job.noise.seed + i}, grid);
      traces.push_back(with_gain(std::move(t), job.gains[i]));
      names.push_back("synthetic gain " + brief(job.gains[i]) + " dB");
    }
    res.traces = traces;
  }
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (!traces[i].metadata().gain_db) {
      throw UsageError((i < names.size() ? names[i] : "trace") + ": sweep-gain needs gain_db in the trace header");
    }
  }
  JobConfig fit_job = job;
  fit_job.fit.kind = FitKind::no_drive;
  res.fits = fit_traces(fit_job, traces, names, workers);

  std::vector<GainSample> samples;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    GainSweepRow row;
    row.source = res.fits[i].source;
    row.gain_db = *traces[i].metadata().gain_db;
    if (!res.fits[i].result) {
      row.error = res.fits[i].error;
    } else {
      const FitResult& r = *res.fits[i].result;
      row.m_minus_n = r.value("M-N");
      row.sigma = r.sigma("M-N");
      row.squeezing_db = r.value("squeezing_db");
      row.converged = r.converged;
      if (std::isfinite(row.sigma) && row.sigma > 0.0) {
        samples.push_back({row.gain_db, row.m_minus_n, row.sigma});
      } else {
        res.warnings.push_back(row.source + ": M-N has no usable uncertainty; excluded from the efficiency fit");
      }
    }
    res.rows.push_back(row);
  }
  try {
    res.efficiency = fit_efficiency(samples);
  } catch (const Error& e) {
    res.efficiency_error = e.what();
  }
  return res;
}

PhaseSweepResult sweep_phase(const JobConfig& job, const std::vector<SpectrumTrace>& inputs,
                             const std::vector<std::string>& sources, std::size_t workers) {
  PhaseSweepResult res;
  std::vector<SpectrumTrace> traces = inputs;
  std::vector<std::string> names = sources;
  if (traces.empty()) {
    if (job.phis.empty()) throw UsageError("sweep-phase needs input traces or sweep.phis");
    if (job.model != "reflection" && job.model != "strong-drive") {
      throw UsageError("sweep-phase synthesizes reflection or strong-drive traces (model '" + job.model + "')");
    }
    JobConfig sim_job = job;
    SimOutput sim = simulate(sim_job);
    traces = sim.traces;
    res.warnings = sim.warnings;
    for (double phi : job.phis) names.push_back("synthetic phi " + fixed(phi, 4));
    res.traces = traces;
  }
  std::vector<double> phis;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (!traces[i].metadata().phi_rad) {
      throw UsageError((i < names.size() ? names[i] : "trace") + ": sweep-phase needs phi_rad in the trace header");
    }
    phis.push_back(*traces[i].metadata().phi_rad);
  }
  JobConfig fit_job = job;
  fit_job.fit.kind = FitKind::three_lorentzian;
  res.fits = fit_traces(fit_job, traces, names, workers);

  const bool known = bath_given(job);
  std::vector<double> ok_phi, center, sideband, pred_center, pred_sideband;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    PhaseSweepRow row;
    row.source = res.fits[i].source;
    row.phi = phis[i];
    row.predicted_center = row.predicted_sideband = std::nan("");
    if (known) {
      const StrongDriveTerms t = strong_drive_terms(job.bath().with_phi(phis[i]), atom_for(job, traces[i]));
      row.predicted_center = t.center_hwhm;
      row.predicted_sideband = t.sideband_hwhm;
    }
    if (!res.fits[i].result) {
      row.error = res.fits[i].error;
    } else {
      const FitResult& r = *res.fits[i].result;
      row.center = r.value("hwhm_0");
      row.center_sigma = r.sigma("hwhm_0");
      row.sideband = r.value("hwhm_sideband");
      row.sideband_sigma = r.sigma("hwhm_sideband");
      row.converged = r.converged;
      ok_phi.push_back(row.phi);
      center.push_back(row.center);
      sideband.push_back(row.sideband);
      pred_center.push_back(row.predicted_center);
      pred_sideband.push_back(row.predicted_sideband);
    }
    res.rows.push_back(row);
  }
  if (ok_phi.size() >= 3) {
    res.center_fit = fit_sinusoid(ok_phi, center);
    res.sideband_fit = fit_sinusoid(ok_phi, sideband);
    std::vector<double> c_hat, s_hat;
    for (double p : ok_phi) {
      c_hat.push_back(res.center_fit(p));
      s_hat.push_back(res.sideband_fit(p));
    }
    res.center_r2 = r_squared(center, c_hat);
    res.sideband_r2 = r_squared(sideband, s_hat);
    if (known) {
      res.center_r2_predicted = r_squared(center, pred_center);
      res.sideband_r2_predicted = r_squared(sideband, pred_sideband);
    }
    res.phase_offset = wrap_pi(res.sideband_fit.phase() - res.center_fit.phase());
  } else {
    res.warnings.push_back("fewer than 3 phases fitted; no sinusoids");
  }
  return res;
}

// ---- command line -----------------------------------------------------------

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Resonance fluorescence and reflection spectra of a driven two-level atom in squeezed vacuum.",
               "sqfluor"};
  app.set_version_flag("--version", std::string(library_version()));
  app.require_subcommand(1, 1);
  app.footer(
      "Environment:\n"
      "  SQFLUOR_WORKERS  worker threads for fits, sweeps and oracle checks\n"
      "                   (default: hardware concurrency; results do not depend on it)\n"
      "Exit codes: 0 success, 1 validation failure, 2 usage or configuration error.");

  std::string config, out_dir, format = "text", grid, preset, phis, gains, model, kind, figure;
  std::uint64_t seed = 0;
  double tolerance = 0.0, rabi = 0.0, n = 0.0, m = 0.0, gain_db = 0.0, noise = 0.0, eta_c = 0.0;
  std::size_t sets = 0;
  bool corrupt = false;
  std::vector<std::string> positional;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON job file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "seed for noise and random parameter grids");
    sub->add_option("--out-dir", out_dir, "output directory (default: config out_dir, else sqfluor-out)");
    sub->add_option("--format", format, "stdout summary format")->check(CLI::IsMember({"text", "json"}));
    sub->add_option("--grid", grid, "frequency grid MIN:MAX:POINTS[:gamma|hz]");
    sub->add_option("--tolerance", tolerance, "oracle relative L-inf tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--rabi", rabi, "Rabi frequency in units of gamma");
    sub->add_option("--n", n, "bath photon number N");
    sub->add_option("--m", m, "bath correlation |M|");
    sub->add_option("--gain-db", gain_db, "squeezer gain in dB (replaces --n/--m)");
    sub->add_option("--eta-c", eta_c, "strongly coupled port efficiency");
    sub->add_option("--phi", phis, "comma-separated phases Phi in radians");
    sub->add_option("--noise", noise, "relative noise sigma for synthesized traces");
  };

  CLI::App* sim = app.add_subcommand("sim", "compute spectra and write trace files");
  common(sim);
  sim->add_option("--preset", preset, "named parameter preset")->check(CLI::IsMember(preset_names()));
  sim->add_option("--model", model, "reflection | fluorescence | no-drive | strong-drive | oracle");

  CLI::App* oracle = app.add_subcommand("oracle-check", "compare the analytic spectra with the master equation");
  common(oracle);
  oracle->add_option("--preset", preset, "check one preset parameter set")->check(CLI::IsMember(preset_names()));
  oracle->add_option("--sets", sets, "number of random parameter sets")->check(CLI::PositiveNumber);
  oracle->add_flag("--corrupt-rate-sign", corrupt)->group("");

  CLI::App* fit = app.add_subcommand("fit", "fit trace files and write reports");
  common(fit);
  fit->add_option("--preset", preset, "named parameter preset")->check(CLI::IsMember(preset_names()));
  fit->add_option("--kind", kind, "no-drive | three-lorentzian | full-analytic");
  fit->add_option("traces", positional, "trace files (default: config inputs)");

  CLI::App* sweep_phase_cmd = app.add_subcommand("sweep-phase", "linewidths versus Phi with fitted sinusoids");
  common(sweep_phase_cmd);
  sweep_phase_cmd->add_option("--preset", preset, "named parameter preset")->check(CLI::IsMember(preset_names()));
  sweep_phase_cmd->add_option("traces", positional, "trace files (default: synthesize at sweep.phis)");

  CLI::App* sweep_gain_cmd = app.add_subcommand("sweep-gain", "M - N versus gain with a fitted efficiency");
  common(sweep_gain_cmd);
  sweep_gain_cmd->add_option("--preset", preset, "named parameter preset")->check(CLI::IsMember(preset_names()));
  sweep_gain_cmd->add_option("--gains", gains, "comma-separated gains in dB");
  sweep_gain_cmd->add_option("traces", positional, "trace files (default: synthesize at sweep.gains)");

  CLI::App* reproduce = app.add_subcommand("reproduce", "rerun a figure pipeline on synthetic data");
  common(reproduce);
  reproduce->add_option("figure", figure, "fig2a | fig3 | fig4 | fig6")
      ->required()
      ->check(CLI::IsMember({"fig2a", "fig3", "fig4", "fig6"}));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  if (command == "reproduce") preset = figure;

  std::optional<Context> ctx;
  try {
    json doc = preset.empty() ? json::object() : preset_document(preset);
    if (!config.empty()) {
      json patch;
      try {
        patch = json::parse(read_text(config));
      } catch (const json::parse_error& e) {
        throw SchemaError({config + ": invalid JSON: " + e.what()});
      }
      if (!patch.is_object()) throw SchemaError({config + ": top level must be an object"});
      doc.merge_patch(patch);
    }
    auto given = [&](const char* flag) {
      const CLI::Option* o = sub->get_option_no_throw(flag);
      return o != nullptr && o->count() > 0;
    };
    auto section = [&](const char* key) -> json& {
      if (!doc.contains(key) || !doc[key].is_object()) doc[key] = json::object();
      return doc[key];
    };
    if (given("--model")) doc["model"] = model;
    if (given("--rabi")) section("atom")["rabi"] = rabi;
    if (given("--eta-c")) section("atom")["eta_c"] = eta_c;
    if (given("--n") || given("--m")) {
      section("bath").erase("gain_db");
      if (given("--n")) section("bath")["n"] = n;
      if (given("--m")) section("bath")["m"] = m;
    }
    if (given("--gain-db")) {
      section("bath").erase("n");
      section("bath").erase("m");
      section("bath")["gain_db"] = gain_db;
    }
    if (given("--phi")) {
      const std::vector<double> list = parse_list(phis, "--phi");
      section("sweep")["phis"] = list;
      if (list.size() == 1) {
        section("bath")["phi"] = list[0];
        if (command == "sim") section("sweep")["phis"] = json::array();
      }
    }
    if (given("--gains")) section("sweep")["gains"] = parse_list(gains, "--gains");
    if (given("--noise")) section("noise")["sigma"] = noise;
    if (given("--seed")) {
      section("noise")["seed"] = seed;
      section("oracle")["seed"] = seed;
    }
    if (given("--tolerance")) section("oracle")["tolerance"] = tolerance;
    if (given("--sets")) section("oracle")["sets"] = sets;
    if (given("--grid")) doc["grid"] = parse_grid_flag(grid);
    if (given("--kind")) section("fit")["kind"] = kind;

    JobConfig job = parse_job(doc);
    const std::string dir = !out_dir.empty() ? out_dir : (!job.out_dir.empty() ? job.out_dir : "sqfluor-out");
    ctx.emplace(Context{command, preset, job, {}, {}, worker_count(), Outputs(dir), json::object(), {}});
  } catch (const SchemaError& e) {
    err << "sqfluor: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "sqfluor: " << e.what() << "\n";
    return kExitUsage;
  }

  int code = kExitOk;
  try {
    if (command == "sim") {
      code = do_sim(*ctx);
    } else if (command == "oracle-check") {
      code = do_oracle_check(*ctx, corrupt);
    } else if (command == "fit") {
      std::vector<SpectrumTrace> traces = load_inputs(*ctx, positional);
      code = do_fit(*ctx, traces, positional);
    } else if (command == "sweep-phase") {
      std::vector<SpectrumTrace> traces = load_inputs(*ctx, positional);
      code = do_sweep_phase(*ctx, traces, positional);
    } else if (command == "sweep-gain") {
      std::vector<SpectrumTrace> traces = load_inputs(*ctx, positional);
      code = do_sweep_gain(*ctx, traces, positional);
    } else if (figure == "fig3") {
      code = do_sweep_phase(*ctx, {}, {});
    } else if (figure == "fig4") {
      code = do_sweep_gain(*ctx, {}, {});
    } else {
      SimOutput sim_out = simulate(ctx->job);
      ctx->warnings.insert(ctx->warnings.end(), sim_out.warnings.begin(), sim_out.warnings.end());
      std::vector<std::string> names;
      for (std::size_t i = 0; i < sim_out.traces.size(); ++i) {
        const std::string rel = "traces/" + index_name(figure, i);
        ctx->outputs.add(rel, format_trace(sim_out.traces[i]));
        names.push_back(rel);
      }
      code = do_fit(*ctx, sim_out.traces, names);
    }
  } catch (const UsageError& e) {
    err << "sqfluor: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "sqfluor: " << e.what() << "\n";
    code = kExitValidation;
    ctx->warnings.push_back(std::string("run aborted: ") + e.what());
  }

  try {
    write_manifest(*ctx, code);
  } catch (const Error& e) {
    err << "sqfluor: cannot write manifest: " << e.what() << "\n";
    return kExitUsage;
  }
  if (format == "json") {
    json s = ctx->summary;
    s["command"] = command;
    s["exit_code"] = code;
    s["warnings"] = ctx->warnings;
    s["out_dir"] = ctx->outputs.dir().string();
    out << canonical_json(s);
  } else {
    for (const auto& line : ctx->lines) out << line << "\n";
    for (const auto& w : ctx->warnings) out << "warning: " << w << "\n";
    out << "outputs in " << ctx->outputs.dir().string() << " (manifest.json)\n";
  }
  return code;
}

}  // namespace sqfluor::cli
