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

// Smith-chart load trajectories. A line (or adaptor) of electrical length
// theta between PA and matching network rotates every reflection
// coefficient by exp(-2j theta).

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "error.hpp"
#include "signal.hpp"

namespace dlm {

struct TrajectoryPoint {
    double p_out; // W
    cplx gamma;
};

struct LoadTrajectory {
    std::vector<TrajectoryPoint> points;
};

inline void validate(const LoadTrajectory& t) {
    for (std::size_t k = 0; k < t.points.size(); ++k) {
        if (std::abs(t.points[k].gamma) > 1.0) throw Error("trajectory: |gamma| exceeds 1");
        if (k > 0 && !(t.points[k].p_out > t.points[k - 1].p_out))
            throw Error("trajectory: p_out must be strictly increasing");
    }
}

inline cplx rotation_factor(double theta) { return std::polar(1.0, -2.0 * theta); }

inline LoadTrajectory rotate_trajectory(const LoadTrajectory& t, double theta) {
    LoadTrajectory out = t;
    const cplx r = rotation_factor(theta);
    for (auto& p : out.points) p.gamma *= r;
    return out;
}

// Reflection coefficient presented to the PA as a function of Vc.
struct VmnMap {
    std::vector<double> vc_grid;
    std::vector<cplx> gamma;
    double electrical_rotation = 0.0; // rad

    cplx gamma_at(double vc) const {
        if (vc_grid.empty() || vc_grid.size() != gamma.size()) throw Error("vmn map: malformed");
        cplx g;
        if (vc <= vc_grid.front()) g = gamma.front();
        else if (vc >= vc_grid.back()) g = gamma.back();
        else {
            const auto it = std::upper_bound(vc_grid.begin(), vc_grid.end(), vc);
            const auto j = static_cast<std::size_t>(it - vc_grid.begin()) - 1;
            const double t = (vc - vc_grid[j]) / (vc_grid[j + 1] - vc_grid[j]);
            g = gamma[j] + t * (gamma[j + 1] - gamma[j]);
        }
        return g * rotation_factor(electrical_rotation);
    }
};

// Tunable network used by both fixtures. Low Vc presents a high-impedance
// load (back-off); high Vc sits close to the 50 ohm centre for peak power.
inline VmnMap reference_vmn_map(double electrical_rotation = 0.0) {
    VmnMap m;
    m.electrical_rotation = electrical_rotation;
    for (int k = 0; k < 22; ++k) {
        const double vc = 6.0 + k;
        const double s = (vc - 6.0) / 21.0;
        m.vc_grid.push_back(vc);
        const double mag = 0.05 + 0.62 * (1.0 - s) * (1.0 - s);
        const double ang = 0.35 + 0.45 * (1.0 - s);
        m.gamma.push_back(std::polar(mag, ang));
    }
    return m;
}

struct RotationFit {
    double theta;        // rad, in (-pi/2, pi/2]
    double residual;     // mean |gamma_a e^{-2j theta} - gamma_b|^2
    std::size_t matched; // points used
};

// Least-squares rotation taking trajectory a onto b. Trajectory b is
// resampled at a's output powers (linear in log power); points of a outside
// b's power span are dropped.
inline RotationFit fit_rotation(const LoadTrajectory& a, const LoadTrajectory& b) {
    validate(a);
    validate(b);
    std::vector<std::pair<cplx, cplx>> pairs;
    for (const auto& pa : a.points) {
        if (b.points.empty() || pa.p_out < b.points.front().p_out || pa.p_out > b.points.back().p_out)
            continue;
        const auto it = std::lower_bound(b.points.begin(), b.points.end(), pa.p_out,
                                         [](const TrajectoryPoint& p, double v) { return p.p_out < v; });
        cplx gb;
        if (it->p_out == pa.p_out) gb = it->gamma;
        else {
            const auto& hi = *it;
            const auto& lo = *(it - 1);
            const double t = (std::log(pa.p_out) - std::log(lo.p_out)) / (std::log(hi.p_out) - std::log(lo.p_out));
            gb = lo.gamma + t * (hi.gamma - lo.gamma);
        }
        pairs.emplace_back(pa.gamma, gb);
    }
    if (pairs.size() < 2) throw Error("fit_rotation: fewer than 2 matched points");

    cplx cross{};
    for (const auto& [ga, gb] : pairs) cross += ga * std::conj(gb);
    double theta = 0.5 * std::arg(cross);
    if (theta <= -std::numbers::pi / 2) theta += std::numbers::pi;

    const cplx r = rotation_factor(theta);
    double res = 0.0;
    for (const auto& [ga, gb] : pairs) res += std::norm(ga * r - gb);
    return {theta, res / static_cast<double>(pairs.size()), pairs.size()};
}

} // namespace dlm
