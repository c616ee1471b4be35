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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "error.hpp"
#include "extractor.hpp"
#include "fft.hpp"
#include "signal.hpp"
#include "surface.hpp"

namespace dlm {

inline double pae(double p_out, double p_in, double p_dc) {
    if (!(p_dc > 0.0)) throw Error("pae: p_dc must be positive");
    return (p_out - p_in) / p_dc;
}

inline double drain_efficiency(double p_out, double p_dc) {
    if (!(p_dc > 0.0)) throw Error("drain_efficiency: p_dc must be positive");
    return p_out / p_dc;
}

// ---------------------------------------------------------------- efficiency

// Static operating curve versus output power. p_out strictly increasing.
struct EfficiencyCurve {
    std::vector<double> p_out;
    std::vector<double> p_in;
    std::vector<double> p_dc;
};

enum class EfficiencyKind { pae, drain };

inline void validate(const EfficiencyCurve& c) {
    const auto n = c.p_out.size();
    if (n < 2 || c.p_in.size() != n || c.p_dc.size() != n) throw Error("efficiency curve: malformed");
    for (std::size_t k = 0; k < n; ++k) {
        if (!(c.p_dc[k] > 0.0)) throw Error("efficiency curve: p_dc must be positive");
        if (k > 0 && !(c.p_out[k] > c.p_out[k - 1])) throw Error("efficiency curve: p_out must increase");
    }
}

// Powers sorted into bins; p holds the mean power of each bin so that the
// first moment of the histogram is exact.
struct EnvelopePdf {
    std::vector<double> p;
    std::vector<double> prob;
};

inline EnvelopePdf envelope_pdf(const IQSignal& u, double peak_power, std::size_t n_bins = 400) {
    if (u.empty()) throw Error("empty signal");
    if (!(peak_power > 0.0) || n_bins == 0) throw Error("envelope_pdf: invalid arguments");
    double peak = 0.0;
    for (const auto& v : u.samples) peak = std::max(peak, std::norm(v));
    if (!(peak > 0.0)) throw Error("envelope_pdf: zero signal");
    std::vector<double> sum(n_bins, 0.0);
    std::vector<std::size_t> cnt(n_bins, 0);
    for (const auto& v : u.samples) {
        const double p = std::norm(v) / peak;
        const auto b = std::min(n_bins - 1, static_cast<std::size_t>(p * static_cast<double>(n_bins)));
        sum[b] += p * peak_power;
        ++cnt[b];
    }
    EnvelopePdf pdf;
    for (std::size_t b = 0; b < n_bins; ++b) {
        if (cnt[b] == 0) continue;
        pdf.p.push_back(sum[b] / static_cast<double>(cnt[b]));
        pdf.prob.push_back(static_cast<double>(cnt[b]) / static_cast<double>(u.size()));
    }
    return pdf;
}

namespace detail {
inline double interp(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    if (it == xs.begin()) return ys.front();
    if (it == xs.end()) return ys.back();
    const auto k = static_cast<std::size_t>(it - xs.begin());
    const double t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    return ys[k - 1] + t * (ys[k] - ys[k - 1]);
}
} // namespace detail

// Energy-weighted average: mean output power (less mean input power for PAE)
// over mean DC power under the pdf.
inline double pdf_averaged_efficiency(const EfficiencyCurve& c, const EnvelopePdf& pdf,
                                      EfficiencyKind kind = EfficiencyKind::pae) {
    validate(c);
    if (pdf.p.empty() || pdf.p.size() != pdf.prob.size()) throw Error("pdf: malformed");
    double mass = 0.0;
    for (double w : pdf.prob) mass += w;
    if (std::abs(mass - 1.0) > 1e-9) throw Error("pdf: probabilities must sum to 1");
    const double span = c.p_out.back() - c.p_out.front();
    const double tol = 1e-12 * std::max(span, c.p_out.back());
    double po = 0.0, pi = 0.0, pd = 0.0;
    for (std::size_t k = 0; k < pdf.p.size(); ++k) {
        const double p = pdf.p[k];
        if (pdf.prob[k] == 0.0) continue;
        if (p < c.p_out.front() - tol || p > c.p_out.back() + tol)
            throw Error("pdf_averaged_efficiency: pdf mass outside curve domain");
        po += pdf.prob[k] * p;
        pi += pdf.prob[k] * detail::interp(c.p_out, c.p_in, p);
        pd += pdf.prob[k] * detail::interp(c.p_out, c.p_dc, p);
    }
    return kind == EfficiencyKind::pae ? (po - pi) / pd : po / pd;
}

// Ridge operating curve, anchored at zero output using the quiescent DC power
// of the lowest ridge column.
inline EfficiencyCurve ridge_efficiency_curve(const Ridge& r, const PaeGrid& g) {
    if (r.points.empty()) throw Error("ridge_efficiency_curve: empty ridge");
    EfficiencyCurve c;
    const auto j0 = static_cast<Eigen::Index>(r.points.front().j);
    c.p_out.push_back(0.0);
    c.p_in.push_back(g.p_in(0, j0));
    c.p_dc.push_back(g.p_dc(0, j0));
    for (const auto& p : r.points) {
        c.p_out.push_back(p.p_out);
        c.p_in.push_back(p.p_in);
        c.p_dc.push_back(p.p_dc);
    }
    return c;
}

// Fixed-control curve: one grid column up to its compression point.
inline EfficiencyCurve fixed_efficiency_curve(const QuasiStaticSurface& s, double vc) {
    EfficiencyCurve c;
    const std::size_t n = 400;
    const ControlSlice slice(s, vc);
    const double xc = slice.compression_drive();
    for (std::size_t k = 0; k <= n; ++k) {
        const double x = xc * static_cast<double>(k) / static_cast<double>(n);
        const auto v = evaluate(s, x, vc);
        const double po = v.y_mag * v.y_mag / (2.0 * s.z_ref);
        if (!c.p_out.empty() && !(po > c.p_out.back())) continue;
        c.p_out.push_back(po);
        c.p_in.push_back(v.p_in);
        c.p_dc.push_back(v.p_dc);
    }
    return c;
}

// ------------------------------------------------------------------ spectra

// Two-sided spectrum, frequencies ascending from -fs/2. psd in W/Hz with the
// same power normalization as average_power (mean |v|^2).
struct Spectrum {
    std::vector<double> freq;
    std::vector<double> psd;
    double df = 0.0;
    std::size_t nfft = 0;
    std::size_t segments = 0;

    double total_power() const { return std::accumulate(psd.begin(), psd.end(), 0.0) * df; }
    double band_power(double f_lo, double f_hi) const {
        double acc = 0.0;
        for (std::size_t k = 0; k < freq.size(); ++k)
            if (freq[k] >= f_lo && freq[k] < f_hi) acc += psd[k];
        return acc * df;
    }
};

inline Spectrum power_spectrum(const IQSignal& sig, std::size_t nfft = 2048, double overlap = 0.5) {
    if (nfft < 8 || (nfft & (nfft - 1)) != 0) throw Error("power_spectrum: nfft must be a power of two >= 8");
    if (!(overlap >= 0.0 && overlap < 1.0)) throw Error("power_spectrum: overlap must be in [0, 1)");
    if (sig.size() < 2 * nfft) throw Error("power_spectrum: signal too short");
    if (!(sig.sample_rate > 0.0)) throw Error("power_spectrum: sample rate must be positive");

    std::vector<double> w(nfft);
    double wss = 0.0;
    for (std::size_t k = 0; k < nfft; ++k) {
        w[k] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(nfft));
        wss += w[k] * w[k];
    }
    const auto step = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(
                                                   static_cast<double>(nfft) * (1.0 - overlap))));
    Dft dft(nfft, FftDirection::forward);
    std::vector<cplx> buf(nfft);
    std::vector<double> acc(nfft, 0.0);
    std::size_t segs = 0;
    for (std::size_t start = 0; start + nfft <= sig.size(); start += step) {
        for (std::size_t k = 0; k < nfft; ++k) buf[k] = sig.samples[start + k] * w[k];
        dft(buf);
        for (std::size_t k = 0; k < nfft; ++k) acc[k] += std::norm(buf[k]);
        ++segs;
    }
    Spectrum s;
    s.nfft = nfft;
    s.segments = segs;
    s.df = sig.sample_rate / static_cast<double>(nfft);
    s.freq.resize(nfft);
    s.psd.resize(nfft);
    const double scale = 1.0 / (static_cast<double>(segs) * wss * sig.sample_rate);
    for (std::size_t k = 0; k < nfft; ++k) {
        const std::size_t src = (k + nfft / 2) % nfft; // fftshift
        s.freq[k] = (static_cast<double>(k) - static_cast<double>(nfft / 2)) * s.df;
        s.psd[k] = acc[src] * scale;
    }
    return s;
}

struct Acpr {
    double lower = 0.0; // dB, positive = cleaner
    double upper = 0.0;
    double value() const { return std::min(lower, upper); }
};

inline Acpr acpr(const Spectrum& s, double channel_bw, double offset) {
    const double fs = s.df * static_cast<double>(s.nfft);
    if (!(channel_bw > 0.0) || !(offset > 0.0)) throw Error("acpr: bandwidth and offset must be positive");
    if (fs < 2.0 * (offset + channel_bw)) throw Error("acpr: adjacent band exceeds Nyquist");
    const double h = channel_bw / 2.0;
    const double main = s.band_power(-h, h);
    const double lo = s.band_power(-offset - h, -offset + h);
    const double hi = s.band_power(offset - h, offset + h);
    if (!(main > 0.0)) throw Error("acpr: no in-channel power");
    auto db = [main](double adj) { return adj > 0.0 ? 10.0 * std::log10(main / adj) : 200.0; };
    return {db(lo), db(hi)};
}

inline Acpr acpr(const IQSignal& sig, double channel_bw, double offset, std::size_t nfft = 2048) {
    return acpr(power_spectrum(sig, nfft), channel_bw, offset);
}

// Adjacent-channel spacing for a given channel bandwidth.
inline double acpr_offset(double channel_bw) { return channel_bw * 5.0 / 3.84; }

inline constexpr double nmse_floor_db = -200.0;

inline double nmse(std::span<const cplx> reference, std::span<const cplx> measured) {
    if (reference.size() != measured.size()) throw Error("nmse: length mismatch");
    if (reference.empty()) throw Error("empty signal");
    cplx num{};
    double den = 0.0;
    for (std::size_t n = 0; n < reference.size(); ++n) {
        num += std::conj(reference[n]) * measured[n];
        den += std::norm(reference[n]);
    }
    if (!(den > 0.0)) throw Error("nmse: zero reference");
    const cplx alpha = num / den;
    double err = 0.0;
    for (std::size_t n = 0; n < reference.size(); ++n) err += std::norm(measured[n] - alpha * reference[n]);
    const double sig = std::norm(alpha) * den;
    if (!(sig > 0.0)) return 0.0;
    if (!(err > 0.0)) return nmse_floor_db;
    return std::max(nmse_floor_db, 10.0 * std::log10(err / sig));
}

inline double nmse(const IQSignal& reference, const IQSignal& measured) {
    return nmse(reference.samples, measured.samples);
}

// Smallest band symmetric about the power centroid holding `fraction` of the
// power. Uses the periodogram of the whole record, each bin's power spread
// evenly over its width, so the result is not quantized to whole bins.
inline double occupied_bandwidth(const IQSignal& sig, double fraction = 0.95) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw Error("occupied_bandwidth: fraction must be in (0, 1]");
    if (sig.empty()) throw Error("empty signal");
    if (!(sig.sample_rate > 0.0)) throw Error("occupied_bandwidth: sample rate must be positive");
    const std::size_t n = sig.size();
    const auto spec = fft(sig.samples);
    const double df = sig.sample_rate / static_cast<double>(n);
    std::vector<double> f(n), p(n);
    double total = 0.0, fc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const auto kk = static_cast<double>(k) - (k >= (n + 1) / 2 ? static_cast<double>(n) : 0.0);
        f[k] = kk * df;
        p[k] = std::norm(spec[k]);
        total += p[k];
        fc += f[k] * p[k];
    }
    if (!(total > 0.0)) return 0.0;
    fc /= total;
    auto inside = [&](double h) {
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double lo = std::max(f[k] - 0.5 * df, fc - h), hi = std::min(f[k] + 0.5 * df, fc + h);
            if (hi > lo) acc += p[k] * (hi - lo) / df;
        }
        return acc;
    };
    double lo = 0.0, hi = 0.5 * df * static_cast<double>(n) + std::abs(fc);
    const double target = fraction * total * (1.0 - 1e-12);
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (inside(mid) < target ? lo : hi) = mid;
    }
    return 2.0 * hi;
}

// Real control waveform: DC removed, embedded as I with Q = 0.
inline double occupied_bandwidth(const ControlSignal& sig, double fraction = 0.95) {
    if (sig.samples.empty()) throw Error("empty signal");
    const double mean = std::accumulate(sig.samples.begin(), sig.samples.end(), 0.0) /
                        static_cast<double>(sig.samples.size());
    IQSignal z{std::vector<cplx>(sig.samples.size()), sig.sample_rate, sig.label};
    for (std::size_t n = 0; n < sig.samples.size(); ++n) z.samples[n] = {sig.samples[n] - mean, 0.0};
    return occupied_bandwidth(z, fraction);
}

// --------------------------------------------------------------- gain curve

struct GainCurve {
    std::vector<double> u_mag;     // bin centre
    std::vector<double> gain_norm; // mean |y|/|u|, unity at the top bin
    std::vector<double> spread;    // standard deviation within the bin, normalized
    std::vector<std::size_t> count;
    double flatness = 0.0;         // max |gain - 1| over the bins holding 99% of samples
};

inline GainCurve normalized_gain_curve(const IQSignal& u, const IQSignal& y, std::size_t n_bins = 64) {
    if (u.size() != y.size()) throw Error("normalized_gain_curve: length mismatch");
    if (u.empty()) throw Error("empty signal");
    if (n_bins == 0) throw Error("normalized_gain_curve: n_bins must be positive");
    double umax = 0.0;
    for (const auto& v : u.samples) umax = std::max(umax, std::abs(v));
    if (!(umax > 0.0)) throw Error("normalized_gain_curve: zero input");
    std::vector<double> s1(n_bins, 0.0), s2(n_bins, 0.0);
    std::vector<std::size_t> cnt(n_bins, 0);
    for (std::size_t n = 0; n < u.size(); ++n) {
        const double m = std::abs(u.samples[n]);
        if (!(m > 0.0)) continue;
        const auto b = std::min(n_bins - 1, static_cast<std::size_t>(m / umax * static_cast<double>(n_bins)));
        const double g = std::abs(y.samples[n]) / m;
        s1[b] += g;
        s2[b] += g * g;
        ++cnt[b];
    }
    GainCurve c;
    std::size_t total = 0;
    for (std::size_t b = 0; b < n_bins; ++b) {
        if (cnt[b] == 0) continue;
        const double mean = s1[b] / static_cast<double>(cnt[b]);
        const double var = std::max(0.0, s2[b] / static_cast<double>(cnt[b]) - mean * mean);
        c.u_mag.push_back((static_cast<double>(b) + 0.5) / static_cast<double>(n_bins) * umax);
        c.gain_norm.push_back(mean);
        c.spread.push_back(std::sqrt(var));
        c.count.push_back(cnt[b]);
        total += cnt[b];
    }
    if (c.gain_norm.empty() || !(c.gain_norm.back() > 0.0)) throw Error("normalized_gain_curve: zero output");
    const double ref = c.gain_norm.back();
    for (auto& g : c.gain_norm) g /= ref;
    for (auto& s : c.spread) s /= ref;

    std::vector<std::size_t> order(c.count.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return c.count[a] > c.count[b]; });
    std::size_t covered = 0;
    for (std::size_t k : order) {
        c.flatness = std::max(c.flatness, std::abs(c.gain_norm[k] - 1.0));
        covered += c.count[k];
        if (static_cast<double>(covered) >= 0.99 * static_cast<double>(total)) break;
    }
    return c;
}

// -------------------------------------------------------------------- noise

// Complex white noise whose PSD sits `level_dbc` below the mean in-channel
// PSD of sig (average power spread over channel_bw).
inline IQSignal add_noise_floor(const IQSignal& sig, double level_dbc, double channel_bw, std::uint64_t seed) {
    if (sig.empty()) throw Error("empty signal");
    if (!(channel_bw > 0.0)) throw Error("add_noise_floor: channel bandwidth must be positive");
    const double psd = average_power(sig) / channel_bw * std::pow(10.0, level_dbc / 10.0);
    const double sigma = std::sqrt(psd * sig.sample_rate / 2.0); // per quadrature
    std::mt19937_64 eng(seed);
    auto uniform = [&eng] { return (static_cast<double>(eng() >> 11) + 0.5) * 0x1.0p-53; };
    IQSignal out = sig;
    for (auto& v : out.samples) {
        const double r = sigma * std::sqrt(-2.0 * std::log(uniform()));
        const double a = 2.0 * std::numbers::pi * uniform();
        v += cplx{r * std::cos(a), r * std::sin(a)};
    }
    return out;
}

// Floor estimate: median PSD over the out-of-band region [f_lo, 0.45 fs]
// (both sides) relative to the mean in-channel PSD.
inline double estimate_noise_floor(const Spectrum& s, double channel_bw, double f_lo) {
    const double fs = s.df * static_cast<double>(s.nfft);
    if (!(f_lo < 0.45 * fs)) throw Error("estimate_noise_floor: no out-of-band region");
    std::vector<double> oob;
    for (std::size_t k = 0; k < s.freq.size(); ++k) {
        const double f = std::abs(s.freq[k]);
        if (f >= f_lo && f <= 0.45 * fs) oob.push_back(s.psd[k]);
    }
    if (oob.empty()) throw Error("estimate_noise_floor: no out-of-band bins");
    std::nth_element(oob.begin(), oob.begin() + static_cast<long>(oob.size() / 2), oob.end());
    const double floor_psd = oob[oob.size() / 2];
    const double in_band = s.band_power(-channel_bw / 2.0, channel_bw / 2.0) / channel_bw;
    if (!(in_band > 0.0)) throw Error("estimate_noise_floor: no in-channel power");
    return 10.0 * std::log10(floor_psd / in_band);
}

// -------------------------------------------------------------------- report

struct EfficiencyReport {
    double pae_avg = 0.0;
    double drain_eff_avg = 0.0;
    double p_out_avg = 0.0; // W
    double p_in_avg = 0.0;  // W
    double p_dc_avg = 0.0;  // W
    double acpr_low_db = 0.0;
    double acpr_high_db = 0.0;
    double nmse_db = 0.0;
    double saturation_fraction = 0.0;

    double acpr_db() const { return std::min(acpr_low_db, acpr_high_db); }
};

} // namespace dlm
