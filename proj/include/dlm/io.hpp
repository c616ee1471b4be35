// SPDX-License-Identifier: Apache-2.0
//
// dlm: dual-input dynamic load modulation transmitter toolkit
// Copyright (C) 2026 The dlm authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

// On-disk formats. Numbers are written with std::to_chars (shortest
// round-trip form) so a write/read cycle is bit-exact.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "extractor.hpp"
#include "metrics.hpp"
#include "signal.hpp"
#include "smith.hpp"
#include "surface.hpp"

namespace dlm::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline std::string fmt(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

inline double parse_double(std::string_view s, const std::string& file, std::size_t line) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
        throw ParseError(file, line, "invalid number '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto k = line.find(sep, start);
        out.push_back(line.substr(start, k == std::string_view::npos ? std::string_view::npos : k - start));
        if (k == std::string_view::npos) break;
        start = k + 1;
    }
    return out;
}

inline std::string strip(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    return s;
}

inline std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    out << text;
    if (!out) throw Error("write failed: " + p.string());
}

inline json read_json(const fs::path& p) {
    const auto text = read_text(p);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(p.string(), 0, e.what());
    }
}

inline void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

// Sidecar metadata lives next to the CSV as <name>.json.
inline fs::path sidecar(const fs::path& csv) {
    fs::path s = csv;
    s.replace_extension(".json");
    return s;
}

// Reads data rows of a CSV with an exact header. Returns (line number, fields).
inline std::vector<std::pair<std::size_t, std::vector<double>>> read_csv(const fs::path& p,
                                                                         std::string_view header) {
    const auto text = read_text(p);
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError(p.string(), 1, "empty file");
    ++lineno;
    if (strip(line) != header) throw ParseError(p.string(), 1, "expected header '" + std::string(header) + "'");
    const auto ncol = split(header).size();
    std::vector<std::pair<std::size_t, std::vector<double>>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip(line);
        if (line.empty()) continue;
        const auto f = split(line);
        if (f.size() != ncol)
            throw ParseError(p.string(), lineno, "expected " + std::to_string(ncol) + " fields");
        std::vector<double> v;
        v.reserve(ncol);
        for (const auto& s : f) v.push_back(parse_double(s, p.string(), lineno));
        rows.emplace_back(lineno, std::move(v));
    }
    return rows;
}

// ------------------------------------------------------------------ signals

inline void write_signal(const fs::path& p, const IQSignal& s) {
    std::string out = "index,i,q\n";
    out.reserve(s.size() * 48);
    for (std::size_t n = 0; n < s.size(); ++n)
        out += std::to_string(n) + ',' + fmt(s.samples[n].real()) + ',' + fmt(s.samples[n].imag()) + '\n';
    write_text(p, out);
    write_json(sidecar(p), json{{"sample_rate_hz", s.sample_rate}, {"label", s.label}});
}

inline IQSignal read_signal(const fs::path& p) {
    const auto meta = read_json(sidecar(p));
    IQSignal s;
    s.sample_rate = meta.at("sample_rate_hz").get<double>();
    s.label = meta.value("label", "");
    const auto rows = read_csv(p, "index,i,q");
    s.samples.reserve(rows.size());
    for (const auto& [line, r] : rows) {
        if (r[0] != static_cast<double>(s.samples.size())) throw ParseError(p.string(), line, "index out of sequence");
        s.samples.emplace_back(r[1], r[2]);
    }
    if (s.samples.empty()) throw ParseError(p.string(), 2, "no samples");
    return s;
}

inline void write_control(const fs::path& p, const ControlSignal& s) {
    std::string out = "index,v\n";
    for (std::size_t n = 0; n < s.size(); ++n) out += std::to_string(n) + ',' + fmt(s.samples[n]) + '\n';
    write_text(p, out);
    write_json(sidecar(p), json{{"sample_rate_hz", s.sample_rate}, {"label", s.label}, {"v_min", s.v_min},
                                {"v_max", s.v_max}});
}

inline ControlSignal read_control(const fs::path& p) {
    const auto meta = read_json(sidecar(p));
    ControlSignal s;
    s.sample_rate = meta.at("sample_rate_hz").get<double>();
    s.label = meta.value("label", "");
    s.v_min = meta.value("v_min", ControlSignal::default_v_min);
    s.v_max = meta.value("v_max", ControlSignal::default_v_max);
    for (const auto& [line, r] : read_csv(p, "index,v")) {
        if (r[0] != static_cast<double>(s.samples.size())) throw ParseError(p.string(), line, "index out of sequence");
        s.samples.push_back(r[1]);
    }
    if (s.samples.empty()) throw ParseError(p.string(), 2, "no samples");
    return s;
}

// ---------------------------------------------------------------- load-pull

inline constexpr std::string_view loadpull_header = "x_volt,vc_volt,y_volt,phase_rad,pdc_w,pin_w";

inline void write_surface(const fs::path& p, const QuasiStaticSurface& s) {
    std::string out(loadpull_header);
    out += '\n';
    for (std::size_t j = 0; j < s.nv(); ++j)
        for (std::size_t i = 0; i < s.nx(); ++i) {
            const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
            out += fmt(s.x_grid[i]) + ',' + fmt(s.vc_grid[j]) + ',' + fmt(s.y_mag(ii, jj)) + ',' +
                   fmt(s.phase(ii, jj)) + ',' + fmt(s.p_dc(ii, jj)) + ',' + fmt(s.p_in(ii, jj)) + '\n';
        }
    write_text(p, out);
    write_json(sidecar(p), json{{"z_ref_ohm", s.z_ref}, {"label", s.label}});
}

// Rows may come in any order; the (x, vc) pairs must form a full rectangle.
// Soft validation findings (e.g. non-monotone drive response) go to *warnings.
inline QuasiStaticSurface read_surface(const fs::path& p, std::vector<std::string>* warnings = nullptr) {
    QuasiStaticSurface s;
    if (fs::exists(sidecar(p))) {
        const auto meta = read_json(sidecar(p));
        s.z_ref = meta.value("z_ref_ohm", 50.0);
        s.label = meta.value("label", "");
    }
    const auto rows = read_csv(p, loadpull_header);
    if (rows.empty()) throw ParseError(p.string(), 2, "no data rows");
    std::map<std::pair<double, double>, std::size_t> seen;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& [line, r] = rows[k];
        for (double v : r)
            if (!std::isfinite(v)) throw ParseError(p.string(), line, "non-finite value");
        if (!seen.emplace(std::make_pair(r[0], r[1]), k).second)
            throw ParseError(p.string(), line, "duplicate grid point");
    }
    std::vector<double> xs, vs;
    for (const auto& [key, k] : seen) {
        xs.push_back(key.first);
        vs.push_back(key.second);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::sort(vs.begin(), vs.end());
    vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
    if (xs.size() * vs.size() != rows.size()) throw ParseError(p.string(), 0, "grid is not rectangular");
    s.x_grid = xs;
    s.vc_grid = vs;
    const auto nx = static_cast<Eigen::Index>(xs.size()), nv = static_cast<Eigen::Index>(vs.size());
    s.y_mag.resize(nx, nv);
    s.phase.resize(nx, nv);
    s.p_dc.resize(nx, nv);
    s.p_in.resize(nx, nv);
    for (const auto& [line, r] : rows) {
        const auto i = static_cast<Eigen::Index>(std::lower_bound(xs.begin(), xs.end(), r[0]) - xs.begin());
        const auto j = static_cast<Eigen::Index>(std::lower_bound(vs.begin(), vs.end(), r[1]) - vs.begin());
        s.y_mag(i, j) = r[2];
        s.phase(i, j) = r[3];
        s.p_dc(i, j) = r[4];
        s.p_in(i, j) = r[5];
    }
    try {
        auto w = validate(s);
        if (warnings) warnings->insert(warnings->end(), w.begin(), w.end());
    } catch (const Error& e) {
        throw ParseError(p.string(), 0, e.what());
    }
    return s;
}

inline QuasiStaticSurface load_loadpull_csv(const fs::path& p, std::vector<std::string>* warnings = nullptr) {
    return read_surface(p, warnings);
}

// --------------------------------------------------------------- trajectory

inline json to_json(const LoadTrajectory& t) {
    json a = json::array();
    for (const auto& p : t.points)
        a.push_back({{"pout_w", p.p_out}, {"gamma_re", p.gamma.real()}, {"gamma_im", p.gamma.imag()}});
    return a;
}

inline LoadTrajectory trajectory_from_json(const json& a) {
    LoadTrajectory t;
    if (!a.is_array()) throw ConfigError("trajectory: expected array");
    for (const auto& e : a)
        t.points.push_back({e.at("pout_w").get<double>(),
                            {e.at("gamma_re").get<double>(), e.at("gamma_im").get<double>()}});
    validate(t);
    return t;
}

// -------------------------------------------------------------- control law

inline json to_json(const ControlLaw& law) {
    return {{"amp", law.amp},
            {"vc", law.vc},
            {"phase", law.phase},
            {"u_max", law.u_max},
            {"v_min", law.v_min},
            {"v_max", law.v_max},
            {"meta",
             {{"u_norm", law.u_norm},
              {"orders", {{"amp", law.orders.amp}, {"vc", law.orders.vc}, {"phase", law.orders.phase}}},
              {"residuals", {{"amp_rel_rms", law.amp_rel_rms}, {"vc_rms", law.vc_rms}, {"phase_rms", law.phase_rms}}}}}};
}

inline ControlLaw control_law_from_json(const json& j) {
    try {
        ControlLaw law;
        law.amp = j.at("amp").get<std::vector<double>>();
        law.vc = j.at("vc").get<std::vector<double>>();
        law.phase = j.at("phase").get<std::vector<double>>();
        law.u_max = j.at("u_max").get<double>();
        law.v_min = j.at("v_min").get<double>();
        law.v_max = j.at("v_max").get<double>();
        const auto& m = j.at("meta");
        law.u_norm = m.at("u_norm").get<double>();
        if (m.contains("orders")) {
            law.orders.amp = m["orders"].value("amp", law.orders.amp);
            law.orders.vc = m["orders"].value("vc", law.orders.vc);
            law.orders.phase = m["orders"].value("phase", law.orders.phase);
        }
        if (m.contains("residuals")) {
            law.amp_rel_rms = m["residuals"].value("amp_rel_rms", 0.0);
            law.vc_rms = m["residuals"].value("vc_rms", 0.0);
            law.phase_rms = m["residuals"].value("phase_rms", 0.0);
        }
        if (law.amp.empty() || law.vc.empty() || law.phase.empty() || !(law.u_norm > 0.0) ||
            !(law.u_max > 0.0) || !(law.v_max > law.v_min))
            throw ConfigError("control law: invalid fields");
        return law;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("control law: ") + e.what());
    }
}

// ------------------------------------------------------------- plot output

inline void write_spectrum(const fs::path& p, const Spectrum& s) {
    std::string out = "freq_hz,psd_db\n";
    for (std::size_t k = 0; k < s.freq.size(); ++k)
        out += fmt(s.freq[k]) + ',' + fmt(10.0 * std::log10(std::max(s.psd[k], 1e-300))) + '\n';
    write_text(p, out);
}

inline void write_gain_curve(const fs::path& p, const GainCurve& c) {
    std::string out = "u_mag,gain_norm\n";
    for (std::size_t k = 0; k < c.u_mag.size(); ++k) out += fmt(c.u_mag[k]) + ',' + fmt(c.gain_norm[k]) + '\n';
    write_text(p, out);
}

inline json to_json(const EfficiencyReport& r) {
    return {{"pae_avg", r.pae_avg},           {"drain_eff_avg", r.drain_eff_avg},
            {"p_out_avg_w", r.p_out_avg},     {"p_in_avg_w", r.p_in_avg},
            {"p_dc_avg_w", r.p_dc_avg},       {"acpr_low_db", r.acpr_low_db},
            {"acpr_high_db", r.acpr_high_db}, {"nmse_db", r.nmse_db},
            {"saturation_fraction", r.saturation_fraction}};
}

} // namespace dlm::io
