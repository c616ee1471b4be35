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

// Synthetic reference surfaces. Parameters come from
// tools/calibrate_fixtures.py; see the README for the targets.

#include <cmath>
#include <string>
#include <string_view>

#include "error.hpp"
#include "surface.hpp"

namespace dlm {

enum class FixtureKind { class_e, class_j };

inline FixtureKind parse_fixture(std::string_view name) {
    if (name == "class_e") return FixtureKind::class_e;
    if (name == "class_j") return FixtureKind::class_j;
    throw ConfigError("unknown fixture '" + std::string(name) + "'");
}

inline std::string_view fixture_name(FixtureKind k) { return k == FixtureKind::class_e ? "class_e" : "class_j"; }

// With s = (Vc - 6) / 21:
//   |y|   = G |x| / (1 + (|x| / x_sat)^4)^(1/4),  G * x_sat = y_top * 10^(-D (1 - s)^gamma / 20)
//   P_dc  = P_q + k(s) |x|^q, k chosen so drain efficiency at x_sat is eta_top (1 - L (1 - s))
//   phase = phi0 + phi2 (|x| / x_max)^2 + phi_v (Vc - 16.5)
struct FixtureParams {
    double peak_power; // W, nominal y_top^2 / (2 z)
    double gain_db;    // small-signal gain
    double eta_top;
    double eta_slope;  // L
    double sat_db;     // D
    double sat_shape;  // gamma
    double dc_exp;     // q
    double pq_frac;    // P_q / peak_power
    double x_max_rel;  // x_max / x_sat(Vc = 27 V)
    double phi0;
    double phi2;
    double phi_v;
    OutputMismatch mismatch; // default device-vs-characterization mismatch
};

inline FixtureParams fixture_params(FixtureKind k) {
    if (k == FixtureKind::class_e)
        return {7.0,  13.0,  0.6457985008558662, 0.26238604479722993, 6.013939886798391, 1.214696958108839,
                0.939503836907311, 0.008018269458331877, 1.531520938357084, 0.0, 0.25, 0.0,
                {0.0, 2.0}};
    return {10.0, 15.0, 0.6450889831438658, 0.17979377733158725, 6.4355406548774505, 1.312795905910236,
            1.1468601352901966, 0.0072163107636773, 1.5180223932627608, 0.0, 0.6, 0.0,
            {0.0, 1.1}};
}

inline constexpr double fixture_z_ref = 50.0;

inline QuasiStaticSurface make_reference_surface(const FixtureParams& p, std::string label = {}) {
    constexpr int n_vc = 22;
    constexpr int n_x = 31; // nonzero drive levels, 1 dB apart
    const double z = fixture_z_ref;
    const double y_top = std::sqrt(2.0 * z * p.peak_power);
    const double g = std::pow(10.0, p.gain_db / 20.0);
    const double q4 = std::pow(2.0, 0.25);

    QuasiStaticSurface s;
    s.z_ref = z;
    s.label = std::move(label);
    for (int j = 0; j < n_vc; ++j) s.vc_grid.push_back(6.0 + j);

    auto x_sat = [&](double sg) { return y_top * std::pow(10.0, -p.sat_db * std::pow(1.0 - sg, p.sat_shape) / 20.0) / g; };
    const double x_max = p.x_max_rel * x_sat(1.0);
    s.x_grid.push_back(0.0);
    for (int k = n_x - 1; k >= 0; --k) s.x_grid.push_back(x_max * std::pow(10.0, -k / 20.0));

    const auto nx = static_cast<Eigen::Index>(s.x_grid.size());
    s.y_mag.resize(nx, n_vc);
    s.phase.resize(nx, n_vc);
    s.p_dc.resize(nx, n_vc);
    s.p_in.resize(nx, n_vc);
    const double pq = p.pq_frac * p.peak_power;
    for (int j = 0; j < n_vc; ++j) {
        const double vc = s.vc_grid[static_cast<std::size_t>(j)];
        const double sg = (vc - 6.0) / 21.0;
        const double xs = x_sat(sg);
        const double y_knee = g * xs / q4;
        const double eta_k = p.eta_top * (1.0 - p.eta_slope * (1.0 - sg));
        const double k = (y_knee * y_knee / (2.0 * z) / eta_k - pq) / std::pow(xs, p.dc_exp);
        for (Eigen::Index i = 0; i < nx; ++i) {
            const double x = s.x_grid[static_cast<std::size_t>(i)];
            const double r = x / xs;
            s.y_mag(i, j) = g * x / std::pow(1.0 + r * r * r * r, 0.25);
            s.p_dc(i, j) = pq + k * std::pow(x, p.dc_exp);
            s.p_in(i, j) = x * x / (2.0 * z);
            const double xr = x / x_max;
            s.phase(i, j) = p.phi0 + p.phi2 * xr * xr + p.phi_v * (vc - 16.5);
        }
    }
    return s;
}

inline QuasiStaticSurface make_reference_surface(FixtureKind k) {
    return make_reference_surface(fixture_params(k), std::string(fixture_name(k)));
}

} // namespace dlm
