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
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "fft.hpp"

namespace dlm {

using cplx = std::complex<double>;

// Uniformly sampled complex baseband waveform.
struct IQSignal {
    std::vector<cplx> samples;
    double sample_rate = 1.0; // Hz
    std::string label;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
};

// Varactor control voltage. Default bounds are the 6..27 V swing the
// varactor stack is characterized over.
struct ControlSignal {
    static constexpr double default_v_min = 6.0;
    static constexpr double default_v_max = 27.0;

    std::vector<double> samples; // volts
    double sample_rate = 1.0;    // Hz
    double v_min = default_v_min;
    double v_max = default_v_max;
    std::string label;

    std::size_t size() const noexcept { return samples.size(); }
};

// Number of samples at each end that fractional-delay transients can reach.
inline constexpr std::size_t edge_guard = 64;

inline double average_power(std::span<const cplx> s) {
    if (s.empty()) throw Error("empty signal");
    double acc = 0.0;
    for (const auto& v : s) acc += std::norm(v);
    return acc / static_cast<double>(s.size());
}

inline double average_power(const IQSignal& sig) { return average_power(sig.samples); }

inline double peak_to_average_ratio(const IQSignal& sig) {
    const double avg = average_power(sig);
    if (!(avg > 0.0)) throw Error("peak_to_average_ratio: zero average power");
    double peak = 0.0;
    for (const auto& v : sig.samples) peak = std::max(peak, std::norm(v));
    return 10.0 * std::log10(peak / avg);
}

inline IQSignal scale_to_average_power(const IQSignal& sig, double target) {
    if (!(target > 0.0)) throw Error("scale_to_average_power: target must be positive");
    const double p = average_power(sig);
    if (!(p > 0.0)) throw Error("scale_to_average_power: zero-power input");
    IQSignal out = sig;
    const double g = std::sqrt(target / p);
    for (auto& v : out.samples) v *= g;
    return out;
}

namespace detail {

inline constexpr int fd_half_taps = 32; // 64-tap kernel

// Blackman-Harris window centred on zero with support [-L, L].
inline double blackman_harris(double t, double half) {
    constexpr double a0 = 0.35875, a1 = 0.48829, a2 = 0.14128, a3 = 0.01168;
    if (std::abs(t) >= half) return 0.0;
    const double w = std::numbers::pi * t / half;
    return a0 + a1 * std::cos(w) + a2 * std::cos(2.0 * w) + a3 * std::cos(3.0 * w);
}

inline double sinc(double x) {
    if (x == 0.0) return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

template <typename T>
std::vector<T> fractional_delay(std::span<const T> in, double delay) {
    const auto n = static_cast<long>(in.size());
    if (n == 0) throw Error("empty signal");
    if (!(std::abs(delay) < static_cast<double>(n) / 4.0))
        throw Error("apply_fractional_delay: delay out of range");

    const double whole = std::floor(delay);
    const long shift = static_cast<long>(whole);
    const double frac = delay - whole;
    std::vector<T> out(in.size(), T{});

    if (frac < 1e-12) {
        for (long m = 0; m < n; ++m) {
            const long j = m - shift;
            if (j >= 0 && j < n) out[static_cast<std::size_t>(m)] = in[static_cast<std::size_t>(j)];
        }
        return out;
    }

    // y[m] = sum_k x[m - shift - k] h(k - frac), k in [-L+1, L]
    constexpr int L = fd_half_taps;
    std::array<double, 2 * L> taps{};
    for (int k = -L + 1; k <= L; ++k) {
        const double t = static_cast<double>(k) - frac;
        taps[static_cast<std::size_t>(k + L - 1)] = sinc(t) * blackman_harris(t, L);
    }
    for (long m = 0; m < n; ++m) {
        T acc{};
        for (int k = -L + 1; k <= L; ++k) {
            const long j = m - shift - k;
            if (j < 0 || j >= n) continue;
            acc += in[static_cast<std::size_t>(j)] * taps[static_cast<std::size_t>(k + L - 1)];
        }
        out[static_cast<std::size_t>(m)] = acc;
    }
    return out;
}

} // namespace detail

// Delays by a real number of samples using a 64-tap Blackman-Harris windowed
// sinc. Positive delay moves content later in time; vacated edges are zero.
inline IQSignal apply_fractional_delay(const IQSignal& sig, double delay) {
    IQSignal out{detail::fractional_delay<cplx>(sig.samples, delay), sig.sample_rate, sig.label};
    return out;
}

inline ControlSignal apply_fractional_delay(const ControlSignal& sig, double delay) {
    ControlSignal out = sig;
    // Delay the AC part so the vacated edges hold the mean voltage rather than 0 V.
    if (sig.samples.empty()) throw Error("empty signal");
    double mean = 0.0;
    for (double v : sig.samples) mean += v;
    mean /= static_cast<double>(sig.samples.size());
    std::vector<double> ac(sig.samples.size());
    for (std::size_t i = 0; i < ac.size(); ++i) ac[i] = sig.samples[i] - mean;
    out.samples = detail::fractional_delay<double>(ac, delay);
    for (auto& v : out.samples) v = std::clamp(v + mean, sig.v_min, sig.v_max);
    return out;
}

// Sub-sample delay of `measured` relative to `reference`, from the peak of the
// cross-correlation of mean-removed magnitude envelopes with 3-point parabolic
// refinement. Lags are searched over |lag| <= length/4.
inline double estimate_delay(const IQSignal& reference, const IQSignal& measured,
                             double min_correlation = 0.3) {
    if (reference.empty() || measured.empty()) throw Error("empty signal");
    if (reference.sample_rate != measured.sample_rate)
        throw Error("estimate_delay: sample rate mismatch");

    const std::size_t n = std::max(reference.size(), measured.size());
    const std::size_t m = next_pow2(2 * n);

    auto envelope = [m](const IQSignal& s) {
        double mean = 0.0;
        for (const auto& v : s.samples) mean += std::abs(v);
        mean /= static_cast<double>(s.size());
        std::vector<cplx> e(m, cplx{});
        double energy = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            const double d = std::abs(s.samples[i]) - mean;
            e[i] = d;
            energy += d * d;
        }
        return std::pair{e, energy};
    };
    auto [r, er] = envelope(reference);
    auto [y, ey] = envelope(measured);
    if (!(er > 0.0) || !(ey > 0.0)) throw Error("no alignment found");

    Dft fwd(m, FftDirection::forward);
    Dft inv(m, FftDirection::inverse);
    fwd(r);
    fwd(y);
    for (std::size_t k = 0; k < m; ++k) y[k] *= std::conj(r[k]);
    inv(y);

    // c[l] = sum_n measured[n] reference[n - l]
    const long max_lag = static_cast<long>(std::min(reference.size(), measured.size()) / 4);
    auto corr = [&](long lag) {
        const std::size_t idx = lag >= 0 ? static_cast<std::size_t>(lag) : m - static_cast<std::size_t>(-lag);
        return y[idx].real() / static_cast<double>(m);
    };
    long best = 0;
    double best_val = corr(0);
    for (long lag = -max_lag; lag <= max_lag; ++lag) {
        const double v = corr(lag);
        if (v > best_val) {
            best_val = v;
            best = lag;
        }
    }
    if (best_val / std::sqrt(er * ey) < min_correlation) throw Error("no alignment found");

    double refine = 0.0;
    if (best > -max_lag && best < max_lag) {
        const double a = corr(best - 1), b = best_val, c = corr(best + 1);
        const double den = a - 2.0 * b + c;
        if (den < 0.0) refine = 0.5 * (a - c) / den;
    }
    return static_cast<double>(best) + refine;
}

// Sample-wise arithmetic mean of repeated captures.
inline IQSignal coherent_average(std::span<const IQSignal> captures) {
    if (captures.empty()) throw Error("coherent_average: no captures");
    const auto& first = captures.front();
    if (first.empty()) throw Error("empty signal");
    IQSignal out{std::vector<cplx>(first.size(), cplx{}), first.sample_rate, first.label};
    for (const auto& c : captures) {
        if (c.size() != first.size()) throw Error("coherent_average: mismatched lengths");
        if (c.sample_rate != first.sample_rate) throw Error("coherent_average: mismatched sample rates");
        for (std::size_t i = 0; i < c.size(); ++i) out.samples[i] += c.samples[i];
    }
    const double inv = 1.0 / static_cast<double>(captures.size());
    for (auto& v : out.samples) v *= inv;
    return out;
}

} // namespace dlm
