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

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <catch_amalgamated.hpp>

#include "dlm/dlm.hpp"
#include "property.hpp"
#include "test_util.hpp"

using namespace dlm;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("dlm_test_experiment_" + name);
    fs::remove_all(d);
    return d;
}

ExperimentConfig small_config(const std::string& fixture = "class_e") {
    ExperimentConfig c;
    c.fixture = fixture;
    c.signal.n_chips = 4096;
    return c;
}

ExperimentConfig random_config(std::mt19937_64& rng) {
    ExperimentConfig c;
    c.fixture = rng() % 2 ? "class_e" : "class_j";
    c.signal.n_chips = 2048;
    c.signal.target_par = 10.0; // short records rarely reach 11.3 dB
    c.signal.seed = rng() % 1000;
    c.noise_seed = rng();
    c.n_averages = 1 + rng() % 3;
    c.nfft = 256;
    c.drive_db = prop::uniform(rng, -6.0, 1.0);
    c.bandwidth_scale = rng() % 2 ? 1.0 : 0.1;
    c.phase_source = rng() % 2 ? PhaseSource::measured : PhaseSource::static_law;
    c.delay_mismatch = prop::uniform(rng, -2.0, 2.0);
    return c;
}

} // namespace

TEST_CASE("property: runs are deterministic under fixed seeds") {
    prop::for_all(701, prop::default_cases, random_config, [](const ExperimentConfig& c) {
        const auto a = run_experiment_in_memory(c);
        const auto b = run_experiment_in_memory(c);
        CHECK(report_json(a, c).dump() == report_json(b, c).dump());
        CHECK(a.y_dlm.samples == b.y_dlm.samples);
        CHECK(report_json(a, c)["config_hash"] == config_hash(c));
    });
}

TEST_CASE("property: PA-alone and DLM output powers match within 0.5 dB") {
    prop::for_all(702, prop::default_cases, random_config, [](const ExperimentConfig& c) {
        const auto r = run_experiment_in_memory(c);
        CHECK(std::abs(r.power_match_db) <= 0.5);
        CHECK(std::abs(10.0 * std::log10(r.alone.p_out_avg / r.dlm.p_out_avg)) <= 0.5);
    });
}

TEST_CASE("run_experiment examples") {
    SECTION("class-E defaults improve PAE by at least 8 points") {
        const auto r = run_experiment_in_memory(ExperimentConfig{});
        INFO("PAE " << r.dlm.pae_avg << " (DLM) vs " << r.alone.pae_avg << " (PA alone)");
        CHECK(r.dlm.pae_avg - r.alone.pae_avg >= 0.08);
        CHECK(std::abs(r.power_match_db) <= 0.5);
        CHECK(r.vc_fixed == 27.0);
        CHECK(r.warnings.empty());
        CHECK(r.dlm.pae_avg <= r.dlm.drain_eff_avg);
    }
    SECTION("noiseless and aligned runs are linear") {
        for (const char* f : {"class_e", "class_j"}) {
            auto c = small_config(f);
            c.noise_floor.reset();
            c.delay_mismatch = 0.0;
            // the device equals its characterization
            c.mismatch = OutputMismatch{};
            const auto r = run_experiment_in_memory(c);
            INFO(f << ": NMSE " << r.dlm.nmse_db << " dB");
            CHECK(r.dlm.nmse_db <= -40.0);
        }
    }
    SECTION("same config twice gives byte-identical reports") {
        auto c = small_config();
        c.write_signals = false;
        c.output_dir = scratch_dir("a").string();
        run_experiment(c);
        const auto first = slurp(fs::path(c.output_dir) / "report.json");
        c.output_dir = scratch_dir("b").string();
        run_experiment(c);
        const auto second = slurp(fs::path(c.output_dir) / "report.json");
        CHECK(!first.empty());
        CHECK(first == second);
        for (const char* f : {"law.json", "trajectory.json", "spectrum_dlm.csv", "spectrum_alone.csv", "gain_dlm.csv",
                              "gain_alone.csv"})
            CHECK(fs::exists(fs::path(c.output_dir) / f));
        CHECK_FALSE(fs::exists(fs::path(c.output_dir) / "u.csv"));
        const auto report = nlohmann::json::parse(second);
        CHECK(report["config_hash"] == config_hash(c));
        fs::remove_all(scratch_dir("a"));
        fs::remove_all(scratch_dir("b"));
    }
    SECTION("signals are written on request") {
        auto c = small_config();
        c.output_dir = scratch_dir("sig").string();
        run_experiment(c);
        const auto u = io::read_signal(fs::path(c.output_dir) / "u.csv");
        CHECK(u.size() == c.signal.n_chips * c.signal.oversample);
        CHECK(io::read_control(fs::path(c.output_dir) / "vc.csv").size() == u.size());
        fs::remove_all(c.output_dir);
    }
    SECTION("errors carry the stage name") {
        auto c = small_config();
        c.signal.n_codes = 1;
        c.drive_db = 3.0;
        const auto hot = run_experiment_in_memory(c);
        CHECK(std::any_of(hot.warnings.begin(), hot.warnings.end(),
                          [](const std::string& w) { return w.find("saturated") != std::string::npos; }));
        c = small_config();
        c.signal.target_par = 12.9;
        c.signal.par_tolerance = 0.001;
        c.signal.max_attempts = 1;
        CHECK_THROWS_WITH(run_experiment_in_memory(c), ContainsSubstring("synthesize"));
        const auto bad = scratch_dir("bad_surface");
        fs::create_directories(bad);
        {
            std::ofstream(bad / "s.csv") << "x_volt,vc_volt,y_volt,phase_rad,pdc_w,pin_w\n0,6,0,0,1,0\n";
        }
        c = small_config();
        c.surface_path = (bad / "s.csv").string();
        CHECK_THROWS_WITH(run_experiment_in_memory(c), ContainsSubstring("characterize"));
        fs::remove_all(bad);
    }
    SECTION("partial artifacts are removed") {
        const auto d = scratch_dir("partial");
        CHECK_THROWS(write_artifacts(d, [](const fs::path& tmp) {
            io::write_json(tmp / "report.json", nlohmann::json{{"a", 1}});
            throw Error("boom");
        }));
        CHECK_FALSE(fs::exists(d));
        auto partial = d;
        partial += ".partial";
        CHECK_FALSE(fs::exists(partial));
    }
}

TEST_CASE("run_delay_sweep examples") {
    for (const char* f : {"class_e", "class_j"}) {
        // the fitted residual phase removes the device mismatch, which
        // otherwise hides the alignment error
        auto c = small_config(f);
        c.phase_source = PhaseSource::measured;
        std::vector<double> delays;
        // 0 .. 0.5 chip periods at 16 samples per chip, both signs
        for (int k = -8; k <= 8; ++k) delays.push_back(k);
        const auto t = run_delay_sweep(c, delays);
        REQUIRE(t.size() == delays.size());
        const std::size_t zero = 8;
        CHECK(t[zero].delay_samples == 0.0);
        CHECK(t[16].delay_chips == Approx(0.5));
        for (std::size_t k = 0; k < t.size(); ++k) CHECK(t[zero].nmse_db <= t[k].nmse_db);
        for (std::size_t k = 1; k <= 8; ++k) {
            INFO(f << ", delay " << k << " samples: ACPR " << t[zero + k].acpr_db << " / " << t[zero - k].acpr_db
                   << " dB, NMSE " << t[zero + k].nmse_db << " / " << t[zero - k].nmse_db << " dB");
            CHECK(t[zero + k].acpr_db <= t[zero + k - 1].acpr_db + 1.0);
            CHECK(t[zero - k].acpr_db <= t[zero - k + 1].acpr_db + 1.0);
            CHECK(std::abs(t[zero + k].acpr_db - t[zero - k].acpr_db) <= 1.0);
            CHECK(std::abs(t[zero + k].nmse_db - t[zero - k].nmse_db) <= 1.0);
        }
        // the end of the sweep is clearly worse than the aligned run
        CHECK(t[16].acpr_db < t[zero].acpr_db - 3.0);
    }
    CHECK_THROWS_AS(run_delay_sweep(small_config(), {}), ConfigError);
}

TEST_CASE("run_averaging_study examples") {
    const auto t = run_averaging_study(small_config(), {1, 4, 16, 100});
    REQUIRE(t.size() == 4);
    INFO("floors " << t[0].floor_dbc << ", " << t[1].floor_dbc << ", " << t[2].floor_dbc << ", " << t[3].floor_dbc);
    CHECK(t[0].floor_dbc == Approx(-25.0).margin(1.5));
    CHECK(t[3].floor_dbc == Approx(-45.0).margin(1.5));
    CHECK(t[2].floor_dbc - t[1].floor_dbc == Approx(-6.02).margin(1.5));
    auto c = small_config();
    c.noise_floor.reset();
    CHECK_THROWS_AS(run_averaging_study(c, {1}), ConfigError);
    CHECK_THROWS_AS(run_averaging_study(small_config(), {0}), ConfigError);
}

TEST_CASE("experiment config") {
    SECTION("JSON round trip") {
        ExperimentConfig c;
        c.fixture = "class_j";
        c.signal.n_chips = 2048;
        c.signal.seed = 17;
        c.orders = {5, 3, 7};
        c.phase_source = PhaseSource::measured;
        c.vc_fixed = 20.0;
        c.delay_mismatch = -1.5;
        c.noise_floor.reset();
        c.n_averages = 8;
        c.mismatch = OutputMismatch{0.1, 0.5};
        c.drive_db = -1.0;
        c.bandwidth_scale = 0.1;
        c.nfft = 1024;
        c.output_dir = "elsewhere";
        c.write_signals = false;
        const auto j = to_json(c);
        ::unsetenv(output_dir_env);
        const auto back = config_from_json(j);
        CHECK(to_json(back) == j);
        CHECK(config_hash(back) == config_hash(c));
        auto d = c;
        d.drive_db = -2.0;
        CHECK(config_hash(d) != config_hash(c));
        d = c;
        d.output_dir = "other";
        CHECK(config_hash(d) == config_hash(c));
    }
    SECTION("defaults from an empty object") {
        ::unsetenv(output_dir_env);
        const auto c = config_from_json(nlohmann::json::object());
        CHECK(c.fixture == "class_e");
        CHECK(c.n_averages == 100);
        CHECK(c.noise_floor == -25.0);
        CHECK(c.output_dir == "dlm-out");
    }
    SECTION("output directory from the environment") {
        ::setenv(output_dir_env, "/tmp/from-env", 1);
        CHECK(config_from_json(nlohmann::json{{"output_dir", "x"}}).output_dir == "/tmp/from-env");
        ::unsetenv(output_dir_env);
        CHECK(config_from_json(nlohmann::json{{"output_dir", "x"}}).output_dir == "x");
    }
    SECTION("rejections") {
        CHECK_THROWS_WITH(config_from_json(nlohmann::json{{"colour", 1}}), ContainsSubstring("unknown key 'colour'"));
        CHECK_THROWS_AS(config_from_json(nlohmann::json{{"fixture", "class_x"}}), ConfigError);
        CHECK_THROWS_AS(config_from_json(nlohmann::json{{"surface_path", "/nonexistent/s.csv"}}), ConfigError);
        CHECK_THROWS_AS(config_from_json(nlohmann::json{{"n_averages", 0}}), ConfigError);
        CHECK_THROWS_AS(config_from_json(nlohmann::json{{"phase_source", "guess"}}), ConfigError);
        CHECK_THROWS_AS(config_from_json(nlohmann::json{{"nfft", 1000}}), ConfigError);
        CHECK_THROWS_AS(config_from_json(nlohmann::json{{"drive_db", "loud"}}), ConfigError);
        CHECK_THROWS_AS(config_from_json(nlohmann::json{{"mismatch", {{"gain", -0.5}}}}), ConfigError);
        CHECK_THROWS_AS(config_from_json(nlohmann::json::array()), ConfigError);
    }
}
