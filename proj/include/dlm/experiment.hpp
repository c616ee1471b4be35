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

// End-to-end runs: characterize, extract, synthesize, simulate, measure.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "extractor.hpp"
#include "fixtures.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "signal.hpp"
#include "smith.hpp"
#include "surface.hpp"
#include "synth.hpp"

namespace dlm {

enum class PhaseSource { static_law, measured };

struct ExperimentConfig {
    std::string fixture = "class_e"; // used when surface_path is empty
    std::string surface_path;
    TestSignalSpec signal;
    LawOrders orders;
    PhaseSource phase_source = PhaseSource::static_law;
    std::optional<double> vc_fixed;            // default: column reaching peak output
    double delay_mismatch = 0.0;               // samples, Vc relative to x
    std::optional<double> noise_floor = -25.0; // dBc per capture; nullopt disables
    std::size_t n_averages = 100;
    std::optional<OutputMismatch> mismatch;    // default: the fixture's
    double drive_db = 0.0;                     // signal peak relative to the law's top output
    double bandwidth_scale = 1.0;
    std::size_t nfft = 2048;
    std::uint64_t noise_seed = 7;
    std::string output_dir = "dlm-out";
    bool write_signals = true;
};

inline constexpr const char* output_dir_env = "DLM_OUTPUT_DIR";

// ------------------------------------------------------------------ config

inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["fixture"] = c.fixture;
    j["surface_path"] = c.surface_path;
    j["signal"] = {{"chip_rate_hz", c.signal.chip_rate},
                   {"rolloff", c.signal.rolloff},
                   {"n_chips", c.signal.n_chips},
                   {"oversample", c.signal.oversample},
                   {"seed", c.signal.seed},
                   {"target_par_db", c.signal.target_par},
                   {"par_tolerance_db", c.signal.par_tolerance},
                   {"spreading_factor", c.signal.spreading_factor},
                   {"n_codes", c.signal.n_codes}};
    j["orders"] = {{"amp", c.orders.amp}, {"vc", c.orders.vc}, {"phase", c.orders.phase}};
    j["phase_source"] = c.phase_source == PhaseSource::measured ? "measured" : "static";
    j["vc_fixed"] = c.vc_fixed ? nlohmann::json(*c.vc_fixed) : nlohmann::json(nullptr);
    j["delay_mismatch"] = c.delay_mismatch;
    j["noise_floor_dbc"] = c.noise_floor ? nlohmann::json(*c.noise_floor) : nlohmann::json(nullptr);
    j["n_averages"] = c.n_averages;
    j["mismatch"] = c.mismatch ? nlohmann::json{{"gain", c.mismatch->gain}, {"phase_rad", c.mismatch->phase}}
                               : nlohmann::json(nullptr);
    j["drive_db"] = c.drive_db;
    j["bandwidth_scale"] = c.bandwidth_scale;
    j["nfft"] = c.nfft;
    j["noise_seed"] = c.noise_seed;
    j["output_dir"] = c.output_dir;
    j["write_signals"] = c.write_signals;
    return j;
}

inline void validate(const ExperimentConfig& c) {
    validate(c.signal);
    if (c.surface_path.empty()) parse_fixture(c.fixture);
    else if (!std::filesystem::exists(c.surface_path)) throw ConfigError("surface file not found: " + c.surface_path);
    if (c.orders.amp < 1 || c.orders.vc < 0 || c.orders.phase < 0 || c.orders.amp > 15 || c.orders.vc > 15 ||
        c.orders.phase > 15)
        throw ConfigError("orders must lie in [0, 15] (amp >= 1)");
    if (c.n_averages < 1 || c.n_averages > 10000) throw ConfigError("n_averages must lie in [1, 10000]");
    if (c.noise_floor && !(*c.noise_floor <= 0.0 && *c.noise_floor >= -200.0))
        throw ConfigError("noise_floor_dbc must lie in [-200, 0]");
    if (!(std::abs(c.delay_mismatch) < 1e6)) throw ConfigError("delay_mismatch out of range");
    if (!(c.drive_db >= -40.0 && c.drive_db <= 3.0)) throw ConfigError("drive_db must lie in [-40, 3]");
    if (!(c.bandwidth_scale > 0.0)) throw ConfigError("bandwidth_scale must be positive");
    if (c.nfft < 64 || (c.nfft & (c.nfft - 1)) != 0) throw ConfigError("nfft must be a power of two >= 64");
    if (c.mismatch && !(c.mismatch->gain > -1.0 / 3.0)) throw ConfigError("mismatch gain must exceed -1/3");
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known{
        "fixture",  "surface_path", "signal",          "orders", "phase_source", "vc_fixed",   "delay_mismatch",
        "noise_floor_dbc", "n_averages", "mismatch",   "drive_db", "bandwidth_scale", "nfft", "noise_seed",
        "output_dir", "write_signals"};
    if (!j.is_object()) throw ConfigError("config: expected an object");
    for (const auto& [k, v] : j.items())
        if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError("config: unknown key '" + k + "'");
    ExperimentConfig c;
    try {
        c.fixture = j.value("fixture", c.fixture);
        c.surface_path = j.value("surface_path", c.surface_path);
        if (j.contains("signal")) {
            const auto& s = j["signal"];
            c.signal.chip_rate = s.value("chip_rate_hz", c.signal.chip_rate);
            c.signal.rolloff = s.value("rolloff", c.signal.rolloff);
            c.signal.n_chips = s.value("n_chips", c.signal.n_chips);
            c.signal.oversample = s.value("oversample", c.signal.oversample);
            c.signal.seed = s.value("seed", c.signal.seed);
            c.signal.target_par = s.value("target_par_db", c.signal.target_par);
            c.signal.par_tolerance = s.value("par_tolerance_db", c.signal.par_tolerance);
            c.signal.spreading_factor = s.value("spreading_factor", c.signal.spreading_factor);
            c.signal.n_codes = s.value("n_codes", c.signal.n_codes);
        }
        if (j.contains("orders")) {
            const auto& o = j["orders"];
            c.orders.amp = o.value("amp", c.orders.amp);
            c.orders.vc = o.value("vc", c.orders.vc);
            c.orders.phase = o.value("phase", c.orders.phase);
        }
        if (j.contains("phase_source")) {
            const auto ps = j["phase_source"].get<std::string>();
            if (ps == "static") c.phase_source = PhaseSource::static_law;
            else if (ps == "measured") c.phase_source = PhaseSource::measured;
            else throw ConfigError("phase_source must be 'static' or 'measured'");
        }
        if (j.contains("vc_fixed") && !j["vc_fixed"].is_null()) c.vc_fixed = j["vc_fixed"].get<double>();
        c.delay_mismatch = j.value("delay_mismatch", c.delay_mismatch);
        if (j.contains("noise_floor_dbc"))
            c.noise_floor = j["noise_floor_dbc"].is_null() ? std::nullopt
                                                           : std::optional<double>(j["noise_floor_dbc"].get<double>());
        c.n_averages = j.value("n_averages", c.n_averages);
        if (j.contains("mismatch") && !j["mismatch"].is_null())
            c.mismatch = OutputMismatch{j["mismatch"].value("gain", 0.0), j["mismatch"].value("phase_rad", 0.0)};
        c.drive_db = j.value("drive_db", c.drive_db);
        c.bandwidth_scale = j.value("bandwidth_scale", c.bandwidth_scale);
        c.nfft = j.value("nfft", c.nfft);
        c.noise_seed = j.value("noise_seed", c.noise_seed);
        c.output_dir = j.value("output_dir", c.output_dir);
        c.write_signals = j.value("write_signals", c.write_signals);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (const char* env = std::getenv(output_dir_env); env && *env) c.output_dir = env;
    validate(c);
    return c;
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Hash of everything that affects results (the output location does not).
inline std::string config_hash(const ExperimentConfig& c) {
    auto j = to_json(c);
    j.erase("output_dir");
    j.erase("write_signals");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
    return buf;
}

// ---------------------------------------------------------------- helpers

namespace detail {

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(name) + ": " + e.what());
    } catch (const Error& e) {
        throw Error(std::string(name) + ": " + e.what());
    }
}

inline IQSignal trim(const IQSignal& s, std::size_t guard = edge_guard) {
    if (s.size() <= 2 * guard) throw Error("signal shorter than edge guard");
    return {std::vector<cplx>(s.samples.begin() + static_cast<long>(guard), s.samples.end() - static_cast<long>(guard)),
            s.sample_rate, s.label};
}

} // namespace detail

// Mean of n captures, each the clean output plus an independent white floor.
// Accumulates in place so memory stays at two records.
inline IQSignal averaged_capture(const IQSignal& y, std::optional<double> floor_dbc, double channel_bw,
                                 std::size_t n, std::uint64_t seed) {
    if (!floor_dbc) return y;
    if (n == 0) throw Error("averaged_capture: need at least one capture");
    IQSignal acc{std::vector<cplx>(y.size(), cplx{}), y.sample_rate, y.label};
    for (std::size_t k = 0; k < n; ++k) {
        const auto cap = add_noise_floor(y, *floor_dbc, channel_bw, detail::splitmix64(seed + k));
        for (std::size_t i = 0; i < y.size(); ++i) acc.samples[i] += cap.samples[i];
    }
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& v : acc.samples) v *= inv;
    return acc;
}

// Everything derived from the surface before any signal is applied.
struct Characterization {
    QuasiStaticSurface surface;
    QuasiStaticSurface device; // surface with output mismatch applied
    OutputMismatch mismatch;
    PaeGrid grid;
    Ridge ridge;
    ControlLaw law;
    std::vector<std::string> warnings;
};

inline Characterization characterize(const ExperimentConfig& c) {
    Characterization ch;
    detail::stage("characterize", [&] {
        if (c.surface_path.empty()) {
            const auto kind = parse_fixture(c.fixture);
            ch.surface = make_reference_surface(kind);
            ch.mismatch = c.mismatch.value_or(fixture_params(kind).mismatch);
        } else {
            ch.surface = io::read_surface(c.surface_path);
            ch.mismatch = c.mismatch.value_or(OutputMismatch{});
        }
        ch.warnings = validate(ch.surface);
        ch.device = ch.mismatch.empty() ? ch.surface : with_output_mismatch(ch.surface, ch.mismatch);
        ch.grid = compute_pae_grid(ch.surface);
        return 0;
    });
    detail::stage("extract-law", [&] {
        ch.ridge = extract_max_pae_ridge(ch.grid);
        for (const auto& w : ch.ridge.warnings) ch.warnings.push_back(w);
        ch.law = fit_control_law(ch.ridge, ch.surface, c.orders);
        return 0;
    });
    return ch;
}

// Test signal scaled so its peak sits drive_db relative to the law's top output.
inline IQSignal drive_signal(const ExperimentConfig& c, const ControlLaw& law) {
    return detail::stage("synthesize", [&] {
        auto u = generate_test_signal(c.signal);
        u = scale_bandwidth(u, c.bandwidth_scale);
        double peak = 0.0;
        for (const auto& v : u.samples) peak = std::max(peak, std::abs(v));
        const double g = law.u_norm * std::pow(10.0, c.drive_db / 20.0) / peak;
        for (auto& v : u.samples) v *= g;
        return u;
    });
}

struct RunMetrics {
    EfficiencyReport report;
    double acpr_db = 0.0;
    GainCurve gain;
    Spectrum spectrum;
};

inline RunMetrics measure(const IQSignal& u, const TransmitterOutput& out, double saturation_fraction,
                          const ExperimentConfig& c, std::uint64_t seed) {
    const double bw = c.signal.chip_rate * c.bandwidth_scale;
    const auto captured = averaged_capture(out.y, c.noise_floor, bw, c.n_averages, seed);
    const auto y = detail::trim(captured);
    const auto ut = detail::trim(u);
    RunMetrics m;
    auto& r = m.report;
    r.p_out_avg = out.p_out_avg;
    r.p_in_avg = out.p_in_avg;
    r.p_dc_avg = out.p_dc_avg;
    r.pae_avg = pae(out.p_out_avg, out.p_in_avg, out.p_dc_avg);
    r.drain_eff_avg = drain_efficiency(out.p_out_avg, out.p_dc_avg);
    m.spectrum = power_spectrum(y, c.nfft);
    const auto a = acpr(m.spectrum, bw, acpr_offset(bw));
    r.acpr_low_db = a.lower;
    r.acpr_high_db = a.upper;
    m.acpr_db = a.value();
    r.nmse_db = nmse(ut, y);
    r.saturation_fraction = saturation_fraction;
    m.gain = normalized_gain_curve(ut, detail::trim(out.y));
    return m;
}

struct ExperimentResult {
    std::string config_hash;
    std::string fixture;
    ControlLaw law;
    Ridge ridge;
    OutputMismatch mismatch;
    double vc_fixed = 0.0;
    double signal_par_db = 0.0;
    double predicted_pae_dlm = 0.0;
    double predicted_pae_fixed = 0.0;
    double predicted_drain_dlm = 0.0;
    double predicted_drain_fixed = 0.0;
    EfficiencyReport dlm;
    EfficiencyReport alone;
    double gain_flatness_dlm = 0.0;
    double gain_flatness_alone = 0.0;
    double power_match_db = 0.0;
    double input_bandwidth_hz = 0.0;
    double vc_bandwidth_hz = 0.0;
    double phase_spread_before = 0.0; // output phase spread without phase correction (rad)
    double phase_spread_after = 0.0;  // with the law actually used
    std::vector<std::string> warnings;

    // Artifacts kept in memory for writing.
    IQSignal u, x, y_dlm, y_alone;
    ControlSignal vc;
    Spectrum spectrum_dlm, spectrum_alone;
    GainCurve gain_dlm, gain_alone;
    LoadTrajectory trajectory;
};

namespace detail {

// 0.5..99.5 percentile range of the output-vs-input phase over samples above
// 2% of the peak magnitude.
inline double output_phase_spread(const IQSignal& u, const IQSignal& y) {
    double peak = 0.0;
    for (const auto& v : u.samples) peak = std::max(peak, std::abs(v));
    std::vector<cplx> uu, yy;
    for (std::size_t n = 0; n < u.size(); ++n)
        if (std::abs(u.samples[n]) >= 0.02 * peak) {
            uu.push_back(u.samples[n]);
            yy.push_back(y.samples[n]);
        }
    const auto d = phase_difference(uu, yy);
    return percentile(d, 0.995) - percentile(d, 0.005);
}

inline TransmitterOutput run_dlm(const QuasiStaticSurface& device, const DualInputs& d, double delay) {
    const auto vc = delay == 0.0 ? d.vc : apply_fractional_delay(d.vc, delay);
    return simulate_transmitter(device, d.x, vc);
}

} // namespace detail

// The law actually applied: the static one, or with phase_source = measured,
// the static law with its fitted residual output phase folded in.
inline ControlLaw operating_law(const ExperimentConfig& c, const Characterization& ch, const IQSignal& u) {
    if (c.phase_source != PhaseSource::measured) return ch.law;
    return detail::stage("synthesize", [&] {
        const auto d1 = synthesize_dual_inputs(u, ch.law);
        const auto y1 = simulate_transmitter(ch.device, d1.x, d1.vc);
        return with_measured_phase(ch.law, extract_phase_predistorter(u, y1.y, ch.law.orders.phase, ch.law.u_norm));
    });
}

inline ExperimentResult run_experiment_in_memory(const ExperimentConfig& c) {
    validate(c);
    ExperimentResult res;
    res.config_hash = config_hash(c);
    res.fixture = c.surface_path.empty() ? c.fixture : c.surface_path;

    auto ch = characterize(c);
    res.warnings = ch.warnings;
    res.mismatch = ch.mismatch;
    res.ridge = ch.ridge;
    res.trajectory = trajectory_from_ridge(ch.ridge, reference_vmn_map());

    const auto u = drive_signal(c, ch.law);
    res.signal_par_db = peak_to_average_ratio(u);

    res.phase_spread_before = detail::stage("synthesize", [&] {
        ControlLaw no_phase = ch.law;
        no_phase.phase.assign(1, 0.0);
        const auto d0 = synthesize_dual_inputs(u, no_phase);
        return detail::output_phase_spread(u, simulate_transmitter(ch.device, d0.x, d0.vc).y);
    });
    const ControlLaw law = operating_law(c, ch, u);
    res.law = law;

    const auto dual = detail::stage("synthesize", [&] { return synthesize_dual_inputs(u, law); });
    for (const auto& w : dual.warnings) res.warnings.push_back(w);
    const auto out_dlm = detail::stage("simulate", [&] { return detail::run_dlm(ch.device, dual, c.delay_mismatch); });
    res.phase_spread_after = detail::output_phase_spread(u, out_dlm.y);

    // PA alone at a fixed control voltage, output power matched to the DLM run.
    res.vc_fixed = c.vc_fixed.value_or(max_power_control_voltage(ch.surface));
    IQSignal u_alone = u;
    SingleInputDrive single;
    TransmitterOutput out_alone;
    detail::stage("simulate", [&] {
        for (int it = 0; it < 4; ++it) {
            single = predistort_single_input(u_alone, ch.surface, res.vc_fixed);
            out_alone = simulate_transmitter(ch.device, single.x, single.vc);
            res.power_match_db = 10.0 * std::log10(out_alone.p_out_avg / out_dlm.p_out_avg);
            if (std::abs(res.power_match_db) <= 0.05) break;
            const double g = std::pow(10.0, -res.power_match_db / 20.0);
            for (auto& v : u_alone.samples) v *= g;
        }
        if (std::abs(res.power_match_db) > 0.5)
            throw Error("average output powers differ by " + std::to_string(res.power_match_db) + " dB");
        return 0;
    });

    detail::stage("report", [&] {
        const auto m_dlm = measure(u, out_dlm, dual.saturation_fraction, c, c.noise_seed);
        const auto m_alone = measure(u_alone, out_alone, single.saturation_fraction, c, c.noise_seed + 1000003);
        res.dlm = m_dlm.report;
        res.alone = m_alone.report;
        res.spectrum_dlm = m_dlm.spectrum;
        res.spectrum_alone = m_alone.spectrum;
        res.gain_dlm = m_dlm.gain;
        res.gain_alone = m_alone.gain;
        res.gain_flatness_dlm = m_dlm.gain.flatness;
        res.gain_flatness_alone = m_alone.gain.flatness;

        const auto ridge_curve = ridge_efficiency_curve(ch.ridge, ch.grid);
        const auto fixed_curve = fixed_efficiency_curve(ch.surface, res.vc_fixed);
        // Both paths deliver the same output signal: peak at the ridge top.
        const auto pdf_dlm = envelope_pdf(u, ridge_curve.p_out.back());
        const auto& pdf_fixed = pdf_dlm;
        res.predicted_pae_dlm = pdf_averaged_efficiency(ridge_curve, pdf_dlm);
        res.predicted_drain_dlm = pdf_averaged_efficiency(ridge_curve, pdf_dlm, EfficiencyKind::drain);
        res.predicted_pae_fixed = pdf_averaged_efficiency(fixed_curve, pdf_fixed);
        res.predicted_drain_fixed = pdf_averaged_efficiency(fixed_curve, pdf_fixed, EfficiencyKind::drain);

        res.input_bandwidth_hz = c.signal.chip_rate * c.bandwidth_scale;
        res.vc_bandwidth_hz = occupied_bandwidth(dual.vc, 0.95);
        return 0;
    });
    if (res.dlm.saturation_fraction > saturation_warn_fraction || res.alone.saturation_fraction > saturation_warn_fraction)
        res.warnings.push_back("more than 1% of samples saturated");

    res.u = u;
    res.x = dual.x;
    res.vc = dual.vc;
    res.y_dlm = out_dlm.y;
    res.y_alone = out_alone.y;
    return res;
}

inline nlohmann::json report_json(const ExperimentResult& r, const ExperimentConfig& c) {
    using nlohmann::json;
    const double bw = c.signal.chip_rate * c.bandwidth_scale;
    return {{"config_hash", r.config_hash},
            {"fixture", r.fixture},
            {"signal_par_db", r.signal_par_db},
            {"vc_fixed_v", r.vc_fixed},
            {"mismatch", {{"gain", r.mismatch.gain}, {"phase_rad", r.mismatch.phase}}},
            {"predicted", {{"pae_dlm", r.predicted_pae_dlm}, {"pae_fixed", r.predicted_pae_fixed},
                           {"drain_dlm", r.predicted_drain_dlm}, {"drain_fixed", r.predicted_drain_fixed}}},
            {"dlm", io::to_json(r.dlm)},
            {"alone", io::to_json(r.alone)},
            {"pae_improvement", r.dlm.pae_avg - r.alone.pae_avg},
            {"power_match_db", r.power_match_db},
            {"gain_flatness", {{"dlm", r.gain_flatness_dlm}, {"alone", r.gain_flatness_alone}}},
            {"phase_spread_rad", {{"uncorrected", r.phase_spread_before}, {"corrected", r.phase_spread_after}}},
            {"bandwidth", {{"input_hz", r.input_bandwidth_hz}, {"vc_95_hz", r.vc_bandwidth_hz},
                           {"ratio", r.vc_bandwidth_hz / r.input_bandwidth_hz}}},
            {"provenance", {{"channel_bw_hz", bw}, {"acpr_offset_hz", acpr_offset(bw)}, {"nfft", c.nfft},
                            {"window", "hann"}, {"noise_floor_dbc", c.noise_floor ? json(*c.noise_floor) : json(nullptr)},
                            {"n_averages", c.n_averages}, {"edge_guard_samples", edge_guard}}},
            {"law", io::to_json(r.law)},
            {"warnings", r.warnings}};
}

// Writes into a scratch directory first; files move into place only after
// everything succeeded.
template <class Writer>
void write_artifacts(const std::filesystem::path& out_dir, Writer&& write) {
    namespace fs = std::filesystem;
    fs::path tmp = out_dir;
    tmp += ".partial";
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    try {
        write(tmp);
    } catch (...) {
        fs::remove_all(tmp);
        throw;
    }
    fs::create_directories(out_dir);
    for (const auto& e : fs::directory_iterator(tmp)) fs::rename(e.path(), out_dir / e.path().filename());
    fs::remove_all(tmp);
}

inline ExperimentResult run_experiment(const ExperimentConfig& c) {
    auto r = run_experiment_in_memory(c);
    detail::stage("write", [&] {
        write_artifacts(c.output_dir, [&](const std::filesystem::path& d) {
            io::write_json(d / "report.json", report_json(r, c));
            io::write_json(d / "law.json", io::to_json(r.law));
            io::write_json(d / "trajectory.json", io::to_json(r.trajectory));
            io::write_spectrum(d / "spectrum_dlm.csv", r.spectrum_dlm);
            io::write_spectrum(d / "spectrum_alone.csv", r.spectrum_alone);
            io::write_gain_curve(d / "gain_dlm.csv", r.gain_dlm);
            io::write_gain_curve(d / "gain_alone.csv", r.gain_alone);
            if (c.write_signals) {
                io::write_signal(d / "u.csv", r.u);
                io::write_signal(d / "x.csv", r.x);
                io::write_control(d / "vc.csv", r.vc);
                io::write_signal(d / "y_dlm.csv", r.y_dlm);
                io::write_signal(d / "y_alone.csv", r.y_alone);
            }
        });
        return 0;
    });
    return r;
}

// ------------------------------------------------------------------ studies

struct DelayPoint {
    double delay_samples;
    double delay_chips;
    double nmse_db;
    double acpr_db;
};

// Reruns simulation and metrics of the DLM path with Vc shifted against x.
inline std::vector<DelayPoint> run_delay_sweep(const ExperimentConfig& c, const std::vector<double>& delays) {
    validate(c);
    if (delays.empty()) throw ConfigError("sweep-delay: no delays given");
    auto ch = characterize(c);
    const auto u = drive_signal(c, ch.law);
    const auto law = operating_law(c, ch, u);
    const auto dual = detail::stage("synthesize", [&] { return synthesize_dual_inputs(u, law); });
    std::vector<DelayPoint> table;
    for (double d : delays) {
        const auto out = detail::stage("simulate", [&] { return detail::run_dlm(ch.device, dual, d); });
        const auto m = detail::stage("report", [&] { return measure(u, out, dual.saturation_fraction, c, c.noise_seed); });
        table.push_back({d, d / static_cast<double>(c.signal.oversample), m.report.nmse_db, m.acpr_db});
    }
    return table;
}

struct AveragingPoint {
    std::size_t n;
    double floor_dbc;
};

// Noise floor of the averaged DLM output measured from the out-of-band
// spectrum, beyond three channel bandwidths.
inline std::vector<AveragingPoint> run_averaging_study(const ExperimentConfig& c, const std::vector<std::size_t>& ns) {
    validate(c);
    if (!c.noise_floor) throw ConfigError("study-averaging: noise floor must be enabled");
    if (ns.empty()) throw ConfigError("study-averaging: no averaging counts given");
    auto ch = characterize(c);
    const auto u = drive_signal(c, ch.law);
    const auto law = operating_law(c, ch, u);
    const auto dual = detail::stage("synthesize", [&] { return synthesize_dual_inputs(u, law); });
    const auto out = detail::stage("simulate", [&] { return detail::run_dlm(ch.device, dual, c.delay_mismatch); });
    const double bw = c.signal.chip_rate * c.bandwidth_scale;
    std::vector<AveragingPoint> table;
    for (std::size_t n : ns) {
        if (n == 0) throw ConfigError("study-averaging: N must be >= 1");
        const auto y = detail::trim(averaged_capture(out.y, c.noise_floor, bw, n, c.noise_seed));
        const auto s = power_spectrum(y, c.nfft);
        table.push_back({n, estimate_noise_floor(s, bw, 3.0 * bw)});
    }
    return table;
}

} // namespace dlm
