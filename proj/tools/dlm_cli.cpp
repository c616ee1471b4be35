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


// Command-line front end. Each stage reads and writes plain files so any
// step can be rerun on its own.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dlm/dlm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
    std::string config_path;
    std::string output_dir;
    std::string fixture;
};

dlm::ExperimentConfig load_config(const Common& o) {
    dlm::ExperimentConfig c;
    if (!o.config_path.empty()) c = dlm::config_from_json(dlm::io::read_json(o.config_path));
    else if (const char* env = std::getenv(dlm::output_dir_env); env && *env) c.output_dir = env;
    if (!o.fixture.empty()) {
        c.fixture = o.fixture;
        c.surface_path.clear();
    }
    if (!o.output_dir.empty()) c.output_dir = o.output_dir;
    dlm::validate(c);
    return c;
}

void add_common(CLI::App* sub, Common& o) {
    sub->add_option("-c,--config", o.config_path, "experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("-o,--output-dir", o.output_dir, "output directory (overrides config and DLM_OUTPUT_DIR)");
    sub->add_option("--fixture", o.fixture, "class_e | class_j (overrides config)");
}

void print_warnings(const std::vector<std::string>& w) {
    for (const auto& s : w) std::cerr << "warning: " << s << "\n";
}

template <class F>
void emit(const dlm::ExperimentConfig& c, F&& write) {
    dlm::write_artifacts(c.output_dir, std::forward<F>(write));
    std::cout << "wrote " << c.output_dir << "\n";
}

void cmd_generate(const Common& o) {
    const auto c = load_config(o);
    auto u = dlm::generate_test_signal(c.signal);
    u = dlm::scale_bandwidth(u, c.bandwidth_scale);
    std::printf("PAR %.3f dB, %zu samples at %.6g Hz\n", dlm::peak_to_average_ratio(u), u.size(), u.sample_rate);
    emit(c, [&](const fs::path& d) { dlm::io::write_signal(d / "u.csv", u); });
}

void cmd_characterize(const Common& o) {
    const auto c = load_config(o);
    const auto ch = dlm::characterize(c);
    print_warnings(ch.warnings);
    double max_pae = ch.grid.pae.maxCoeff();
    std::printf("peak PAE %.4f, ridge points %zu\n", max_pae, ch.ridge.points.size());
    emit(c, [&](const fs::path& d) {
        dlm::io::write_surface(d / "surface.csv", ch.surface);
        json ridge = json::array();
        for (const auto& p : ch.ridge.points)
            ridge.push_back({{"pout_w", p.p_out}, {"x_volt", p.x_mag}, {"vc_volt", p.vc}, {"pae", p.pae}});
        dlm::io::write_json(d / "ridge.json", ridge);
        dlm::io::write_json(d / "trajectory.json",
                            dlm::io::to_json(dlm::trajectory_from_ridge(ch.ridge, dlm::reference_vmn_map())));
    });
}

void cmd_extract_law(const Common& o) {
    const auto c = load_config(o);
    const auto ch = dlm::characterize(c);
    print_warnings(ch.warnings);
    std::printf("orders amp %d vc %d phase %d; residuals amp %.3g vc %.3g V phase %.3g rad\n", ch.law.orders.amp,
                ch.law.orders.vc, ch.law.orders.phase, ch.law.amp_rel_rms, ch.law.vc_rms, ch.law.phase_rms);
    emit(c, [&](const fs::path& d) { dlm::io::write_json(d / "law.json", dlm::io::to_json(ch.law)); });
}

void cmd_synthesize(const Common& o, const std::string& law_path, const std::string& signal_path) {
    const auto c = load_config(o);
    const auto law = dlm::io::control_law_from_json(dlm::io::read_json(law_path));
    const auto u = dlm::io::read_signal(signal_path);
    const auto d = dlm::synthesize_dual_inputs(u, law);
    print_warnings(d.warnings);
    std::printf("saturated %.3f%% of samples\n", 100.0 * d.saturation_fraction);
    emit(c, [&](const fs::path& dir) {
        dlm::io::write_signal(dir / "x.csv", d.x);
        dlm::io::write_control(dir / "vc.csv", d.vc);
    });
}

void cmd_simulate(const Common& o, const std::string& x_path, const std::string& vc_path) {
    const auto c = load_config(o);
    const auto ch = dlm::characterize(c);
    const auto x = dlm::io::read_signal(x_path);
    auto vc = dlm::io::read_control(vc_path);
    if (c.delay_mismatch != 0.0) vc = dlm::apply_fractional_delay(vc, c.delay_mismatch);
    const auto out = dlm::simulate_transmitter(ch.device, x, vc);
    const json powers{{"p_out_avg_w", out.p_out_avg},
                      {"p_in_avg_w", out.p_in_avg},
                      {"p_dc_avg_w", out.p_dc_avg},
                      {"pae_avg", dlm::pae(out.p_out_avg, out.p_in_avg, out.p_dc_avg)},
                      {"drain_eff_avg", dlm::drain_efficiency(out.p_out_avg, out.p_dc_avg)}};
    std::cout << powers.dump(2) << "\n";
    emit(c, [&](const fs::path& d) {
        dlm::io::write_signal(d / "y.csv", out.y);
        dlm::io::write_json(d / "powers.json", powers);
    });
}

void cmd_report(const Common& o, const std::string& u_path, const std::string& y_path) {
    const auto c = load_config(o);
    const auto u = dlm::io::read_signal(u_path);
    auto y = dlm::io::read_signal(y_path);
    const double bw = c.signal.chip_rate * c.bandwidth_scale;
    y = dlm::averaged_capture(y, c.noise_floor, bw, c.n_averages, c.noise_seed);
    const auto ut = dlm::detail::trim(u), yt = dlm::detail::trim(y);
    const auto s = dlm::power_spectrum(yt, c.nfft);
    const auto a = dlm::acpr(s, bw, dlm::acpr_offset(bw));
    const auto g = dlm::normalized_gain_curve(ut, yt);
    const json r{{"acpr_low_db", a.lower},
                 {"acpr_high_db", a.upper},
                 {"nmse_db", dlm::nmse(ut, yt)},
                 {"gain_flatness", g.flatness},
                 {"occupied_bw_hz", dlm::occupied_bandwidth(yt, 0.95)},
                 {"channel_bw_hz", bw},
                 {"acpr_offset_hz", dlm::acpr_offset(bw)}};
    std::cout << r.dump(2) << "\n";
    emit(c, [&](const fs::path& d) {
        dlm::io::write_json(d / "metrics.json", r);
        dlm::io::write_spectrum(d / "spectrum.csv", s);
        dlm::io::write_gain_curve(d / "gain.csv", g);
    });
}

void cmd_sweep_delay(const Common& o, const std::vector<double>& delays) {
    const auto c = load_config(o);
    const auto table = dlm::run_delay_sweep(c, delays);
    std::string csv = "delay_samples,delay_chips,nmse_db,acpr_db\n";
    for (const auto& p : table) {
        std::printf("%8.3f samples  NMSE %7.2f dB  ACPR %6.2f dB\n", p.delay_samples, p.nmse_db, p.acpr_db);
        csv += dlm::io::fmt(p.delay_samples) + ',' + dlm::io::fmt(p.delay_chips) + ',' + dlm::io::fmt(p.nmse_db) +
               ',' + dlm::io::fmt(p.acpr_db) + '\n';
    }
    emit(c, [&](const fs::path& d) { dlm::io::write_text(d / "delay_sweep.csv", csv); });
}

void cmd_study_averaging(const Common& o, const std::vector<std::size_t>& ns) {
    const auto c = load_config(o);
    const auto table = dlm::run_averaging_study(c, ns);
    std::string csv = "n_averages,floor_dbc\n";
    for (const auto& p : table) {
        std::printf("N=%-5zu floor %7.2f dBc\n", p.n, p.floor_dbc);
        csv += std::to_string(p.n) + ',' + dlm::io::fmt(p.floor_dbc) + '\n';
    }
    emit(c, [&](const fs::path& d) { dlm::io::write_text(d / "averaging.csv", csv); });
}

void cmd_all(const Common& o) {
    const auto c = load_config(o);
    const auto r = dlm::run_experiment(c);
    print_warnings(r.warnings);
    std::printf("PAE  DLM %.4f  alone %.4f  (predicted %.4f / %.4f)\n", r.dlm.pae_avg, r.alone.pae_avg,
                r.predicted_pae_dlm, r.predicted_pae_fixed);
    std::printf("ACPR DLM %.2f  alone %.2f dB;  NMSE DLM %.2f dB\n", r.dlm.acpr_db(), r.alone.acpr_db(), r.dlm.nmse_db);
    std::printf("Vc 95%% bandwidth %.4g Hz (%.2fx input)\n", r.vc_bandwidth_hz, r.vc_bandwidth_hz / r.input_bandwidth_hz);
    std::cout << "wrote " << c.output_dir << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dlm: dual-input dynamic load modulation transmitter toolkit"};
    app.require_subcommand(1);
    Common o;
    std::string law_path, signal_path, x_path, vc_path, u_path, y_path;
    std::vector<double> delays{0, 1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<std::size_t> ns{1, 4, 16, 100};

    auto* gen = app.add_subcommand("generate", "generate the multicode test signal");
    auto* chz = app.add_subcommand("characterize", "write the surface, max-PAE ridge and load trajectory");
    auto* ext = app.add_subcommand("extract-law", "fit the control law");
    auto* syn = app.add_subcommand("synthesize", "compute RF drive and control voltage from a signal");
    auto* sim = app.add_subcommand("simulate", "run the quasi-static transmitter model");
    auto* rep = app.add_subcommand("report", "linearity and spectral metrics of an output");
    auto* swp = app.add_subcommand("sweep-delay", "NMSE/ACPR versus Vc-to-x misalignment");
    auto* avg = app.add_subcommand("study-averaging", "noise floor versus number of averaged captures");
    auto* all = app.add_subcommand("all", "full experiment: DLM against PA alone");
    for (auto* s : {gen, chz, ext, syn, sim, rep, swp, avg, all}) add_common(s, o);
    syn->add_option("--law", law_path, "law JSON")->required()->check(CLI::ExistingFile);
    syn->add_option("--signal", signal_path, "input signal CSV")->required()->check(CLI::ExistingFile);
    sim->add_option("--x", x_path, "RF drive CSV")->required()->check(CLI::ExistingFile);
    sim->add_option("--vc", vc_path, "control voltage CSV")->required()->check(CLI::ExistingFile);
    rep->add_option("--u", u_path, "desired signal CSV")->required()->check(CLI::ExistingFile);
    rep->add_option("--y", y_path, "output signal CSV")->required()->check(CLI::ExistingFile);
    swp->add_option("--delays", delays, "delays in samples");
    avg->add_option("--n", ns, "capture counts");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*gen) cmd_generate(o);
        else if (*chz) cmd_characterize(o);
        else if (*ext) cmd_extract_law(o);
        else if (*syn) cmd_synthesize(o, law_path, signal_path);
        else if (*sim) cmd_simulate(o, x_path, vc_path);
        else if (*rep) cmd_report(o, u_path, y_path);
        else if (*swp) cmd_sweep_delay(o, delays);
        else if (*avg) cmd_study_averaging(o, ns);
        else if (*all) cmd_all(o);
    } catch (const dlm::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const dlm::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
