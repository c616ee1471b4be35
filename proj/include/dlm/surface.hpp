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

// Quasi-static dual-input model of PA + varactor matching network:
//
//     y = f_A(|x|, Vc) * exp(j * (arg x - f_phi(|x|, Vc)))
//
// f_A, f_phi and the DC/RF input powers are tabulated on a rectangular
// (|x|, Vc) grid and interpolated bilinearly.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "signal.hpp"

namespace dlm {

struct QuasiStaticSurface {
    std::vector<double> x_grid;  // ascending drive magnitudes |x| [V]
    std::vector<double> vc_grid; // ascending control voltages [V]
    Eigen::MatrixXd y_mag;       // |y| [V], rows follow x_grid, columns vc_grid
    Eigen::MatrixXd phase;       // insertion phase f_phi [rad]
    Eigen::MatrixXd p_dc;        // DC supply power [W]
    Eigen::MatrixXd p_in;        // available RF input power [W]
    double z_ref = 50.0;         // ohms
    std::string label;

    std::size_t nx() const noexcept { return x_grid.size(); }
    std::size_t nv() const noexcept { return vc_grid.size(); }
    double x_max() const { return x_grid.back(); }
    double p_out(std::size_t i, std::size_t j) const {
        const double y = y_mag(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        return y * y / (2.0 * z_ref);
    }
};

// Structural checks throw; the returned strings are soft warnings
// (e.g. drive non-monotonicity in ingested data).
inline std::vector<std::string> validate(const QuasiStaticSurface& s) {
    const auto nx = static_cast<Eigen::Index>(s.nx());
    const auto nv = static_cast<Eigen::Index>(s.nv());
    if (nx < 2 || nv < 1) throw Error("surface: need at least 2 drive levels and 1 control voltage");
    for (const auto* m : {&s.y_mag, &s.phase, &s.p_dc, &s.p_in})
        if (m->rows() != nx || m->cols() != nv) throw Error("surface: matrix dimensions do not match grids");
    if (!std::is_sorted(s.x_grid.begin(), s.x_grid.end()) ||
        std::adjacent_find(s.x_grid.begin(), s.x_grid.end()) != s.x_grid.end())
        throw Error("surface: x_grid must be strictly ascending");
    if (!std::is_sorted(s.vc_grid.begin(), s.vc_grid.end()) ||
        std::adjacent_find(s.vc_grid.begin(), s.vc_grid.end()) != s.vc_grid.end())
        throw Error("surface: vc_grid must be strictly ascending");
    if (s.x_grid.front() < 0.0) throw Error("surface: negative drive level");
    if (!(s.z_ref > 0.0)) throw Error("surface: z_ref must be positive");

    std::vector<std::string> warnings;
    for (Eigen::Index j = 0; j < nv; ++j) {
        bool monotone = true;
        for (Eigen::Index i = 0; i < nx; ++i) {
            if (!std::isfinite(s.y_mag(i, j)) || !std::isfinite(s.phase(i, j)) ||
                !std::isfinite(s.p_dc(i, j)) || !std::isfinite(s.p_in(i, j)))
                throw Error("surface: non-finite entry");
            if (s.y_mag(i, j) < 0.0) throw Error("surface: negative output magnitude");
            if (!(s.p_dc(i, j) > 0.0)) throw Error("surface: DC power must be positive");
            if (i > 0 && s.y_mag(i, j) < s.y_mag(i - 1, j)) monotone = false;
        }
        if (s.x_grid.front() == 0.0 && s.y_mag(0, j) != 0.0)
            throw Error("surface: output must vanish at zero drive");
        if (!monotone)
            warnings.push_back("surface: |y| decreases with drive at Vc = " + std::to_string(s.vc_grid[j]));
    }
    return warnings;
}

struct SurfaceSample {
    double y_mag;
    double phase;
    double p_dc;
    double p_in;
};

namespace detail {

struct GridCoord {
    std::size_t i; // lower node
    double t;      // fractional position, may exceed 1 when extrapolating
};

// Drive axis: interpolation inside the grid, linear extrapolation up to 1.1x.
inline GridCoord locate_drive(const std::vector<double>& g, double x) {
    if (!(x >= 0.0) || x < g.front() - 1e-12 * g.back()) throw Error("drive beyond characterized range");
    if (x > g.back()) {
        if (x > 1.1 * g.back() * (1.0 + 1e-12)) throw Error("drive beyond characterized range");
        const std::size_t i = g.size() - 2;
        return {i, (x - g[i]) / (g[i + 1] - g[i])};
    }
    auto it = std::upper_bound(g.begin(), g.end(), x);
    std::size_t i = it == g.begin() ? 0 : static_cast<std::size_t>(it - g.begin()) - 1;
    if (i >= g.size() - 1) i = g.size() - 2;
    return {i, std::max(0.0, (x - g[i]) / (g[i + 1] - g[i]))};
}

// Control axis: clamped to the characterized span.
inline GridCoord locate_control(const std::vector<double>& g, double vc) {
    if (g.size() == 1) return {0, 0.0};
    vc = std::clamp(vc, g.front(), g.back());
    auto it = std::upper_bound(g.begin(), g.end(), vc);
    std::size_t j = it == g.begin() ? 0 : static_cast<std::size_t>(it - g.begin()) - 1;
    if (j >= g.size() - 1) j = g.size() - 2;
    return {j, (vc - g[j]) / (g[j + 1] - g[j])};
}

inline double bilerp(const Eigen::MatrixXd& m, GridCoord a, GridCoord b) {
    const auto i = static_cast<Eigen::Index>(a.i);
    const auto j = static_cast<Eigen::Index>(b.i);
    if (m.cols() == 1) return m(i, 0) + a.t * (m(i + 1, 0) - m(i, 0));
    const double lo = m(i, j) + b.t * (m(i, j + 1) - m(i, j));
    const double hi = m(i + 1, j) + b.t * (m(i + 1, j + 1) - m(i + 1, j));
    return lo + a.t * (hi - lo);
}

} // namespace detail

inline SurfaceSample evaluate(const QuasiStaticSurface& s, double x_mag, double vc) {
    const auto a = detail::locate_drive(s.x_grid, x_mag);
    const auto b = detail::locate_control(s.vc_grid, vc);
    return {std::max(0.0, detail::bilerp(s.y_mag, a, b)), detail::bilerp(s.phase, a, b),
            detail::bilerp(s.p_dc, a, b), std::max(0.0, detail::bilerp(s.p_in, a, b))};
}

struct TransmitterOutput {
    IQSignal y;
    double p_out_avg = 0.0; // W
    double p_in_avg = 0.0;  // W
    double p_dc_avg = 0.0;  // W
};

// Memoryless per-sample application of the surface to (x, Vc).
inline TransmitterOutput simulate_transmitter(const QuasiStaticSurface& s, const IQSignal& x,
                                              const ControlSignal& vc) {
    if (x.size() != vc.size()) throw Error("simulate_transmitter: length mismatch");
    if (x.sample_rate != vc.sample_rate) throw Error("simulate_transmitter: sample rate mismatch");
    if (x.empty()) throw Error("empty signal");

    TransmitterOutput out;
    out.y.sample_rate = x.sample_rate;
    out.y.label = "y";
    out.y.samples.resize(x.size());
    double p_out = 0.0, p_in = 0.0, p_dc = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) {
        const cplx xn = x.samples[n];
        const auto sample = evaluate(s, std::abs(xn), vc.samples[n]);
        const double arg = std::arg(xn) - sample.phase;
        out.y.samples[n] = std::polar(sample.y_mag, arg);
        p_out += sample.y_mag * sample.y_mag;
        p_in += sample.p_in;
        p_dc += sample.p_dc;
    }
    const double inv = 1.0 / static_cast<double>(x.size());
    out.p_out_avg = p_out * inv / (2.0 * s.z_ref);
    out.p_in_avg = p_in * inv;
    out.p_dc_avg = p_dc * inv;
    return out;
}

// One control-voltage slice of the surface, piecewise linear in |x|. Used to
// invert the AM/AM characteristic at a fixed Vc.
class ControlSlice {
public:
    ControlSlice(const QuasiStaticSurface& s, double vc) : x_(s.x_grid) {
        const auto b = detail::locate_control(s.vc_grid, vc);
        y_.resize(x_.size());
        phase_.resize(x_.size());
        for (std::size_t i = 0; i < x_.size(); ++i) {
            const detail::GridCoord a{std::min(i, x_.size() - 2), i == x_.size() - 1 ? 1.0 : 0.0};
            y_[i] = detail::bilerp(s.y_mag, a, b);
            phase_[i] = detail::bilerp(s.phase, a, b);
        }
        // Extend by linear extrapolation to 1.1x, as evaluate() does.
        const std::size_t k = x_.size() - 1;
        const double xe = 1.1 * x_[k];
        const double slope = (y_[k] - y_[k - 1]) / (x_[k] - x_[k - 1]);
        const double pslope = (phase_[k] - phase_[k - 1]) / (x_[k] - x_[k - 1]);
        x_.push_back(xe);
        y_.push_back(y_[k] + slope * (xe - x_[k]));
        phase_.push_back(phase_[k] + pslope * (xe - x_[k]));
        // Invertible prefix ends at the compression point (first maximum).
        peak_ = static_cast<std::size_t>(std::max_element(y_.begin(), y_.end()) - y_.begin());
    }

    double max_output() const { return y_[peak_]; }
    double compression_drive() const { return x_[peak_]; }

    struct Inverse {
        double x_mag;
        bool saturated;
    };

    Inverse invert(double y_target) const {
        if (y_target >= y_[peak_]) return {x_[peak_], y_target > y_[peak_]};
        if (y_target <= y_[0]) return {x_[0], false};
        // Monotone search over [0, peak]; plateaus resolve to the lowest drive.
        std::size_t lo = 0, hi = peak_;
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            if (y_[mid] < y_target) lo = mid;
            else hi = mid;
        }
        while (lo + 1 < peak_ && y_[lo + 1] <= y_[lo]) ++lo;
        const double dy = y_[lo + 1] - y_[lo];
        const double t = dy > 0.0 ? (y_target - y_[lo]) / dy : 0.0;
        return {x_[lo] + t * (x_[lo + 1] - x_[lo]), false};
    }

    double phase_at(double x_mag) const {
        auto it = std::upper_bound(x_.begin(), x_.end(), x_mag);
        std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
        i = std::min(i, x_.size() - 2);
        const double t = (x_mag - x_[i]) / (x_[i + 1] - x_[i]);
        return phase_[i] + t * (phase_[i + 1] - phase_[i]);
    }

private:
    std::vector<double> x_, y_, phase_;
    std::size_t peak_ = 0;
};

// Control voltage of the column that reaches the highest output magnitude:
// the setting a fixed matching network tuned for peak power corresponds to.
inline double max_power_control_voltage(const QuasiStaticSurface& s) {
    Eigen::Index i = 0, j = 0;
    s.y_mag.maxCoeff(&i, &j);
    return s.vc_grid[static_cast<std::size_t>(j)];
}

// Output-referred deviation between a characterization surface and the
// device it was measured on: |y| -> |y| (1 + gain u^2), phi -> phi + phase u^2,
// with u = |y| / max|y|. Keeps |y| monotone for gain > -1/3.
struct OutputMismatch {
    double gain = 0.0;  // fractional amplitude change at peak output
    double phase = 0.0; // rad at peak output

    bool empty() const noexcept { return gain == 0.0 && phase == 0.0; }
};

inline QuasiStaticSurface with_output_mismatch(const QuasiStaticSurface& s, OutputMismatch mm) {
    if (!(mm.gain > -1.0 / 3.0)) throw Error("output mismatch gain must exceed -1/3");
    QuasiStaticSurface out = s;
    const double ymax = s.y_mag.maxCoeff();
    if (!(ymax > 0.0)) return out;
    for (Eigen::Index i = 0; i < s.y_mag.rows(); ++i)
        for (Eigen::Index j = 0; j < s.y_mag.cols(); ++j) {
            const double u = s.y_mag(i, j) / ymax;
            out.y_mag(i, j) = s.y_mag(i, j) * (1.0 + mm.gain * u * u);
            out.phase(i, j) = s.phase(i, j) + mm.phase * u * u;
        }
    return out;
}

} // namespace dlm
