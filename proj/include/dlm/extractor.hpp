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

// Efficiency-optimal control-law extraction:
//   1. PAE over the characterized (|x|, Vc) grid
//   2. grid search for the maximum-PAE cell per output-power bin (the ridge)
//   3. polynomial inverse laws |x| = f_A(|u|), Vc = f_Z(|u|), phase = f_phi(|u|)
//   4. per-sample evaluation of those laws for a desired output u
// plus fitting of a memoryless phase predistorter from a measured output.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "polynomial.hpp"
#include "signal.hpp"
#include "smith.hpp"
#include "surface.hpp"

namespace dlm {

struct PaeGrid {
    std::vector<double> x_grid, vc_grid;
    Eigen::MatrixXd pae;   // fraction
    Eigen::MatrixXd p_out; // W
    Eigen::MatrixXd p_in;  // W
    Eigen::MatrixXd p_dc;  // W
};

// Negative PAE (input power exceeding output power) is reported as 0.
inline PaeGrid compute_pae_grid(const QuasiStaticSurface& s) {
    const auto nx = static_cast<Eigen::Index>(s.nx());
    const auto nv = static_cast<Eigen::Index>(s.nv());
    PaeGrid g{s.x_grid, s.vc_grid, Eigen::MatrixXd(nx, nv), Eigen::MatrixXd(nx, nv), s.p_in, s.p_dc};
    for (Eigen::Index i = 0; i < nx; ++i)
        for (Eigen::Index j = 0; j < nv; ++j) {
            if (!(s.p_dc(i, j) > 0.0)) throw Error("compute_pae_grid: non-positive DC power");
            const double y = s.y_mag(i, j);
            const double p_out = y * y / (2.0 * s.z_ref);
            g.p_out(i, j) = p_out;
            g.pae(i, j) = std::max(0.0, (p_out - s.p_in(i, j)) / s.p_dc(i, j));
        }
    return g;
}

struct RidgePoint {
    double p_out; // W
    double x_mag; // V
    double vc;    // V
    double pae;
    double p_in;
    double p_dc;
    std::size_t i, j; // grid cell
};

struct Ridge {
    std::vector<RidgePoint> points; // strictly increasing p_out
    std::vector<std::string> warnings;
};

// Default bin count: whole decibels spanned by the positive output powers.
inline std::size_t default_ridge_bins(const PaeGrid& g) {
    double lo = INFINITY, hi = 0.0;
    for (Eigen::Index i = 0; i < g.p_out.rows(); ++i)
        for (Eigen::Index j = 0; j < g.p_out.cols(); ++j)
            if (g.p_out(i, j) > 0.0) {
                lo = std::min(lo, g.p_out(i, j));
                hi = std::max(hi, g.p_out(i, j));
            }
    if (!(hi > lo)) return 4;
    return std::max<std::size_t>(4, static_cast<std::size_t>(std::floor(10.0 * std::log10(hi / lo) + 1e-9)));
}

// Bin index of a positive output power over logarithmic bins spanning [lo, hi].
inline std::size_t ridge_bin(double p, double log_lo, double log_hi, std::size_t n_bins) {
    if (log_hi <= log_lo) return 0;
    const double f = (std::log(p) - log_lo) / (log_hi - log_lo);
    const auto b = static_cast<long>(std::floor(f * static_cast<double>(n_bins)));
    return static_cast<std::size_t>(std::clamp<long>(b, 0, static_cast<long>(n_bins) - 1));
}

// Maximum-PAE cell in each logarithmic output-power bin. Ties go to the lower
// Vc, then the lower drive. Empty bins are skipped with a warning.
inline Ridge extract_max_pae_ridge(const PaeGrid& g, std::size_t n_bins = 0) {
    if (n_bins == 0) n_bins = default_ridge_bins(g);
    if (n_bins < 4) throw Error("extract_max_pae_ridge: need at least 4 bins");

    double lo = INFINITY, hi = 0.0;
    for (Eigen::Index i = 0; i < g.p_out.rows(); ++i)
        for (Eigen::Index j = 0; j < g.p_out.cols(); ++j)
            if (g.p_out(i, j) > 0.0) {
                lo = std::min(lo, g.p_out(i, j));
                hi = std::max(hi, g.p_out(i, j));
            }
    if (!(hi > 0.0)) throw Error("extract_max_pae_ridge: no positive output power");
    const double log_lo = std::log(lo), log_hi = std::log(hi);

    struct Best {
        bool set = false;
        Eigen::Index i = 0, j = 0;
    };
    std::vector<Best> best(n_bins);
    // Column-major scan with strict improvement implements the tie-break.
    for (Eigen::Index j = 0; j < g.pae.cols(); ++j)
        for (Eigen::Index i = 0; i < g.pae.rows(); ++i) {
            const double p = g.p_out(i, j);
            if (!(p > 0.0)) continue;
            auto& b = best[ridge_bin(p, log_lo, log_hi, n_bins)];
            if (!b.set || g.pae(i, j) > g.pae(b.i, b.j)) b = {true, i, j};
        }

    Ridge r;
    for (std::size_t k = 0; k < n_bins; ++k) {
        if (!best[k].set) {
            r.warnings.push_back("extract_max_pae_ridge: empty bin " + std::to_string(k));
            continue;
        }
        const auto i = best[k].i, j = best[k].j;
        r.points.push_back({g.p_out(i, j), g.x_grid[static_cast<std::size_t>(i)],
                            g.vc_grid[static_cast<std::size_t>(j)], g.pae(i, j), g.p_in(i, j), g.p_dc(i, j),
                            static_cast<std::size_t>(i), static_cast<std::size_t>(j)});
    }
    if (r.points.size() < 4) throw Error("extract_max_pae_ridge: fewer than 4 ridge points");
    return r;
}

// Load trajectory the network presents along the ridge.
inline LoadTrajectory trajectory_from_ridge(const Ridge& r, const VmnMap& vmn) {
    LoadTrajectory t;
    for (const auto& p : r.points) t.points.push_back({p.p_out, vmn.gamma_at(p.vc)});
    return t;
}

struct LawOrders {
    int amp = 7;
    int vc = 5;
    int phase = 7;
};

struct LawFitOptions {
    double max_amp_rel_rms = 0.05;  // relative rms misfit of |x|
    double max_vc_rms = 1.5;        // V
    double max_phase_rms = 0.05;    // rad
    double extrapolation_db = 0.5;  // linear extension past the last ridge point
    double v_min = ControlSignal::default_v_min;
    double v_max = ControlSignal::default_v_max;
    std::size_t dense_points = 256;
};

// Polynomials are in the normalized variable t = |u| / u_norm, where u_norm
// is the output magnitude of the last ridge point. Valid on [0, u_max];
// between u_norm and u_max each law continues linearly.
struct ControlLaw {
    std::vector<double> amp;   // |x| [V], amp[0] == 0
    std::vector<double> vc;    // Vc [V]
    std::vector<double> phase; // predistortion phase [rad], added to arg u
    double u_norm = 1.0;       // V
    double u_max = 1.0;        // V
    double v_min = ControlSignal::default_v_min;
    double v_max = ControlSignal::default_v_max;
    LawOrders orders;
    double amp_rel_rms = 0.0;
    double vc_rms = 0.0;
    double phase_rms = 0.0;
};

struct LawOutput {
    double x_mag;
    double vc;
    double phase;
    bool saturated;
};

namespace detail {
inline double law_poly(const std::vector<double>& c, double t) {
    if (t <= 1.0) return polyval(c, t);
    return polyval(c, 1.0) + polyder_val(c, 1.0) * (t - 1.0);
}
} // namespace detail

inline LawOutput evaluate_control_law(const ControlLaw& law, double u_mag) {
    const bool saturated = u_mag > law.u_max;
    const double u = std::clamp(u_mag, 0.0, law.u_max);
    const double t = u / law.u_norm;
    return {std::max(0.0, detail::law_poly(law.amp, t)),
            std::clamp(detail::law_poly(law.vc, t), law.v_min, law.v_max),
            law.phase.empty() ? 0.0 : detail::law_poly(law.phase, t), saturated};
}

inline bool amplitude_law_monotone(const std::vector<double>& amp, std::size_t samples = 2001) {
    // On [0, 1] plus the linear continuation, whose slope is the derivative at 1.
    for (std::size_t k = 0; k < samples; ++k) {
        const double t = static_cast<double>(k) / static_cast<double>(samples - 1);
        if (polyder_val(amp, t) < -1e-9) return false;
    }
    return polyval(amp, 0.0) >= 0.0;
}

// Fits the inverse control laws along a ridge.
//
// The Vc law is a least-squares fit of the ridge control voltages against
// |u|. The drive law is then fitted to drives that reproduce |u| exactly at
// the smoothed Vc (column inversion of the surface), so that
// f_A(f_A_opt(u), f_Z_opt(u)) = u up to polynomial error. The static phase
// law is f_phi along that same smoothed trajectory.
inline ControlLaw fit_control_law(const Ridge& ridge, const QuasiStaticSurface& s, LawOrders orders = {},
                                  const LawFitOptions& opt = {}) {
    const int max_order = std::max({orders.amp, orders.vc, orders.phase});
    if (ridge.points.size() <= static_cast<std::size_t>(max_order) + 1)
        throw Error("fit_control_law: insufficient ridge points");

    std::vector<double> t_ridge, vc_ridge;
    const double u_norm = std::sqrt(2.0 * s.z_ref * ridge.points.back().p_out);
    if (!(u_norm > 0.0)) throw Error("fit_control_law: zero ridge output");
    for (const auto& p : ridge.points) {
        t_ridge.push_back(std::sqrt(2.0 * s.z_ref * p.p_out) / u_norm);
        vc_ridge.push_back(p.vc);
    }

    ControlLaw law;
    law.u_norm = u_norm;
    law.u_max = u_norm * std::pow(10.0, opt.extrapolation_db / 20.0);
    law.v_min = opt.v_min;
    law.v_max = opt.v_max;
    law.orders = orders;

    // Ridge points pinned at a V_c bound carry no information once the
    // polynomial is past that bound (evaluation clamps), so they are dropped
    // from the fit while the clamped prediction agrees with them. The plain
    // fit is kept if censoring does not help.
    auto clamped_rms = [&](const std::vector<double>& c) {
        double ss = 0.0;
        for (std::size_t k = 0; k < t_ridge.size(); ++k) {
            const double e = std::clamp(polyval(c, t_ridge[k]), opt.v_min, opt.v_max) - vc_ridge[k];
            ss += e * e;
        }
        return std::sqrt(ss / static_cast<double>(t_ridge.size()));
    };
    auto censored_fit = [&](const std::vector<double>& tt, const std::vector<double>& vv) {
        std::vector<double> plain = polyfit(tt, vv, orders.vc);
        std::vector<double> cand = plain;
        std::vector<char> active(tt.size(), 1);
        for (int pass = 0; pass < 10; ++pass) {
            bool changed = false;
            for (std::size_t k = 0; k < tt.size(); ++k) {
                const double pred = std::clamp(polyval(cand, tt[k]), opt.v_min, opt.v_max);
                const bool at_bound = vv[k] <= opt.v_min || vv[k] >= opt.v_max;
                const bool keep = !at_bound || pred != vv[k];
                if (keep != static_cast<bool>(active[k])) {
                    active[k] = keep;
                    changed = true;
                }
            }
            if (!changed) break;
            std::vector<double> ta, va;
            for (std::size_t k = 0; k < tt.size(); ++k)
                if (active[k]) {
                    ta.push_back(tt[k]);
                    va.push_back(vv[k]);
                }
            if (ta.size() <= static_cast<std::size_t>(orders.vc) + 1) break;
            cand = polyfit(ta, va, orders.vc);
        }
        return std::pair{plain, cand};
    };
    auto [plain_vc, cand] = censored_fit(t_ridge, vc_ridge);
    law.vc = plain_vc;
    if (clamped_rms(cand) < clamped_rms(law.vc)) law.vc = cand;
    const double vc_rms = clamped_rms(law.vc);
    law.vc_rms = vc_rms;
    if (law.vc_rms > opt.max_vc_rms)
        throw Error("fit_control_law: Vc fit residual " + std::to_string(law.vc_rms) + " V exceeds " +
                    std::to_string(opt.max_vc_rms) + " V");

    // The extrapolated range stops where the top column runs out of output.
    {
        const double t_ext = law.u_max / u_norm;
        const double v_top = std::clamp(polyval(law.vc, 1.0) + polyder_val(law.vc, 1.0) * (t_ext - 1.0), opt.v_min,
                                         opt.v_max);
        law.u_max = std::max(u_norm, std::min(law.u_max, ControlSlice(s, v_top).max_output()));
    }

    // Dense drive/phase targets along the smoothed trajectory.
    std::vector<double> t_dense, x_dense, phase_dense, w_dense;
    const double x_top = 1.1 * s.x_max();
    for (std::size_t k = 1; k <= opt.dense_points; ++k) {
        const double t = static_cast<double>(k) / static_cast<double>(opt.dense_points);
        const double vc = std::clamp(polyval(law.vc, t), opt.v_min, opt.v_max);
        const ControlSlice slice(s, vc);
        const auto inv = slice.invert(t * u_norm);
        t_dense.push_back(t);
        x_dense.push_back(inv.x_mag);
        phase_dense.push_back(slice.phase_at(inv.x_mag));
        // relative output error per unit drive error
        const double h = 1e-4 * s.x_max();
        const double xa = std::max(0.0, inv.x_mag - h), xb = std::min(x_top, inv.x_mag + h);
        const double slope = (evaluate(s, xb, vc).y_mag - evaluate(s, xa, vc).y_mag) / (xb - xa);
        w_dense.push_back(std::max(slope, 0.0) / (t * u_norm));
    }

    int amp_order = orders.amp;
    for (int attempt = 0;; ++attempt) {
        law.amp = polyfit(t_dense, x_dense, amp_order, true, w_dense);
        if (amplitude_law_monotone(law.amp)) break;
        if (attempt == 2 || amp_order - 2 < 1)
            throw Error("fit_control_law: drive law not monotone after order reduction");
        amp_order -= 2;
    }
    law.orders.amp = amp_order;

    double ss = 0.0, ref = 0.0;
    for (std::size_t k = 0; k < t_dense.size(); ++k) {
        const double e = polyval(law.amp, t_dense[k]) - x_dense[k];
        ss += e * e;
        ref += x_dense[k] * x_dense[k];
    }
    law.amp_rel_rms = std::sqrt(ss / ref);
    if (law.amp_rel_rms > opt.max_amp_rel_rms)
        throw Error("fit_control_law: drive fit residual " + std::to_string(law.amp_rel_rms) + " exceeds " +
                    std::to_string(opt.max_amp_rel_rms));

    law.phase = polyfit(t_dense, phase_dense, orders.phase);
    double pss = 0.0;
    for (std::size_t k = 0; k < t_dense.size(); ++k) {
        const double e = polyval(law.phase, t_dense[k]) - phase_dense[k];
        pss += e * e;
    }
    law.phase_rms = std::sqrt(pss / static_cast<double>(t_dense.size()));
    if (law.phase_rms > opt.max_phase_rms)
        throw Error("fit_control_law: phase fit residual " + std::to_string(law.phase_rms) + " rad exceeds " +
                    std::to_string(opt.max_phase_rms) + " rad");
    return law;
}

struct PhaseFit {
    std::vector<double> coeffs; // phase difference arg y - arg u, in t = |u| / u_norm
    double u_norm = 1.0;
    double residual_rms = 0.0;
    double residual_spread = 0.0; // 0.5..99.5 percentile range of the residual
};

namespace detail {
inline double percentile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    const auto k = static_cast<std::size_t>(std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1));
    std::nth_element(v.begin(), v.begin() + static_cast<long>(k), v.end());
    return v[k];
}
} // namespace detail

// Phase difference arg(y) - arg(u) per sample, unwrapped around its circular
// mean so that a constant offset near +-pi does not split across the cut.
inline std::vector<double> phase_difference(std::span<const cplx> u, std::span<const cplx> y) {
    if (u.size() != y.size()) throw Error("phase_difference: length mismatch");
    cplx acc{};
    for (std::size_t n = 0; n < u.size(); ++n) acc += y[n] * std::conj(u[n]);
    const double centre = std::arg(acc);
    const cplx derot = std::polar(1.0, -centre);
    std::vector<double> d(u.size());
    for (std::size_t n = 0; n < u.size(); ++n) d[n] = centre + std::arg(y[n] * std::conj(u[n]) * derot);
    return d;
}

// Fits arg(y) - arg(u) as a polynomial in |u| / u_norm (u_norm <= 0 selects
// max |u|). Samples below 2% of the peak magnitude are ignored.
inline PhaseFit extract_phase_predistorter(const IQSignal& u, const IQSignal& y, int order = 7,
                                           double u_norm = 0.0) {
    if (u.size() != y.size()) throw Error("extract_phase_predistorter: length mismatch");
    if (u.empty()) throw Error("empty signal");
    double peak = 0.0;
    for (const auto& v : u.samples) peak = std::max(peak, std::abs(v));
    if (!(peak > 0.0)) throw Error("extract_phase_predistorter: zero reference");
    if (u_norm <= 0.0) u_norm = peak;

    const auto diff = phase_difference(u.samples, y.samples);
    std::vector<double> t, d;
    for (std::size_t n = 0; n < u.size(); ++n) {
        const double m = std::abs(u.samples[n]);
        if (m < 0.02 * peak || std::abs(y.samples[n]) == 0.0) continue;
        t.push_back(m / u_norm);
        d.push_back(diff[n]);
    }
    PhaseFit fit;
    fit.u_norm = u_norm;
    fit.coeffs = polyfit(t, d, order);
    std::vector<double> res(t.size());
    double ss = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        res[k] = d[k] - polyval(fit.coeffs, t[k]);
        ss += res[k] * res[k];
    }
    fit.residual_rms = std::sqrt(ss / static_cast<double>(t.size()));
    fit.residual_spread = detail::percentile(res, 0.995) - detail::percentile(res, 0.005);
    if (fit.residual_spread > std::numbers::pi / 2) throw Error("non-quasi-static phase");
    return fit;
}

// Replaces the law's phase term with the negated measured phase response,
// re-expressed in the law's normalization.
inline ControlLaw with_measured_phase(ControlLaw law, const PhaseFit& fit) {
    const double scale = law.u_norm / fit.u_norm;
    std::vector<double> c(fit.coeffs.size());
    double p = 1.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
        c[k] = -fit.coeffs[k] * p;
        p *= scale;
    }
    // Compose with whatever phase correction was applied during the measurement.
    const std::size_t n = std::max(c.size(), law.phase.size());
    c.resize(n, 0.0);
    for (std::size_t k = 0; k < law.phase.size(); ++k) c[k] += law.phase[k];
    law.phase = std::move(c);
    law.orders.phase = static_cast<int>(n) - 1;
    return law;
}

} // namespace dlm
