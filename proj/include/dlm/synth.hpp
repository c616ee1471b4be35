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

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "error.hpp"
#include "extractor.hpp"
#include "fft.hpp"
#include "signal.hpp"
#include "surface.hpp"

namespace dlm {

// WCDMA-like multicode test signal.
struct TestSignalSpec {
    double chip_rate = 3.84e6;    // Hz; 384e3 for the down-scaled experiments
    double rolloff = 0.22;        // root-raised-cosine roll-off
    std::size_t n_chips = 16384;
    std::size_t oversample = 16;  // samples per chip, >= 4
    std::uint64_t seed = 1;
    double target_par = 11.3;     // dB
    double par_tolerance = 0.3;   // dB
    std::size_t spreading_factor = 16;
    std::size_t n_codes = 0;      // 0: search per-code gains for target_par
    std::size_t max_attempts = 64;

    double sample_rate() const { return chip_rate * static_cast<double>(oversample); }
};

inline constexpr std::size_t max_signal_samples = std::size_t{1} << 22;

inline void validate(const TestSignalSpec& s) {
    if (!(s.chip_rate > 0.0)) throw ConfigError("signal: chip_rate must be positive");
    if (!(s.rolloff > 0.0 && s.rolloff <= 1.0)) throw ConfigError("signal: rolloff must be in (0, 1]");
    if (s.oversample < 4) throw ConfigError("signal: oversample must be >= 4");
    if (s.spreading_factor == 0 || (s.spreading_factor & (s.spreading_factor - 1)) != 0)
        throw ConfigError("signal: spreading_factor must be a power of two");
    if (s.n_chips < s.spreading_factor || s.n_chips % s.spreading_factor != 0)
        throw ConfigError("signal: n_chips must be a positive multiple of spreading_factor");
    if (s.n_chips * s.oversample > max_signal_samples) throw ConfigError("signal: exceeds sample budget");
    if (s.n_codes > s.spreading_factor) throw ConfigError("signal: more codes than spreading factor");
    if (s.n_codes == 0 && !(s.target_par >= 3.0 && s.target_par <= 13.0))
        throw ConfigError("signal: target_par must lie in [3, 13] dB");
}

// Unit-energy root-raised-cosine taps spanning +-span chips.
inline std::vector<double> rrc_taps(double rolloff, std::size_t sps, std::size_t span = 8) {
    const long half = static_cast<long>(span * sps);
    std::vector<double> h;
    h.reserve(static_cast<std::size_t>(2 * half + 1));
    const double b = rolloff;
    const double pi = std::numbers::pi;
    for (long k = -half; k <= half; ++k) {
        const double t = static_cast<double>(k) / static_cast<double>(sps);
        double v;
        if (k == 0) v = 1.0 - b + 4.0 * b / pi;
        else if (std::abs(std::abs(4.0 * b * t) - 1.0) < 1e-9)
            v = b / std::sqrt(2.0) *
                ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * b)) + (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * b)));
        else
            v = (std::sin(pi * t * (1.0 - b)) + 4.0 * b * t * std::cos(pi * t * (1.0 + b))) /
                (pi * t * (1.0 - (4.0 * b * t) * (4.0 * b * t)));
        h.push_back(v);
    }
    double e = 0.0;
    for (double v : h) e += v * v;
    for (double& v : h) v /= std::sqrt(e);
    return h;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Two random bits per draw, taken straight from the engine so the stream is
// identical across standard library implementations.
class BitSource {
public:
    explicit BitSource(std::uint64_t seed) : eng_(seed) {}
    unsigned next2() {
        if (left_ == 0) {
            word_ = eng_();
            left_ = 32;
        }
        const unsigned v = static_cast<unsigned>(word_ & 3u);
        word_ >>= 2;
        --left_;
        return v;
    }

private:
    std::mt19937_64 eng_;
    std::uint64_t word_ = 0;
    int left_ = 0;
};

inline cplx qpsk(unsigned two_bits) {
    constexpr double a = std::numbers::sqrt2 / 2.0;
    return {(two_bits & 1u) ? -a : a, (two_bits & 2u) ? -a : a};
}

// Circular pulse shaping (via FFT) keeps the record periodic, so there are
// no edge transients.
struct PulseShaper {
    std::size_t n;
    std::size_t oversample;
    std::vector<double> taps;
    std::vector<cplx> response;
    Dft fwd, inv;

    explicit PulseShaper(const TestSignalSpec& spec)
        : n(spec.n_chips * spec.oversample), oversample(spec.oversample),
          taps(rrc_taps(spec.rolloff, spec.oversample)), response(n, cplx{}), fwd(n, FftDirection::forward),
          inv(n, FftDirection::inverse) {
        if (taps.size() > n) throw ConfigError("signal: record shorter than the pulse");
        const std::size_t half = taps.size() / 2;
        for (std::size_t k = 0; k < taps.size(); ++k) response[(k + n - half) % n] += taps[k];
        fwd(response);
        for (auto& v : response) v /= static_cast<double>(n);
    }

    std::vector<cplx> shape(const std::vector<cplx>& chips) {
        std::vector<cplx> z(n, cplx{});
        for (std::size_t c = 0; c < chips.size(); ++c) z[c * oversample] = chips[c];
        fwd(z);
        for (std::size_t k = 0; k < n; ++k) z[k] *= response[k];
        inv(z);
        return z;
    }

    // Shaped value of a chip stream at one output sample.
    cplx at(const std::vector<cplx>& chips, std::size_t sample) const {
        const long half = static_cast<long>(taps.size() / 2);
        const long nn = static_cast<long>(n);
        cplx acc{};
        for (std::size_t c = 0; c < chips.size(); ++c) {
            long k = static_cast<long>(sample) - static_cast<long>(c * oversample);
            k = ((k % nn) + nn) % nn;
            if (k > nn / 2) k -= nn;
            if (k >= -half && k <= half) acc += chips[c] * taps[static_cast<std::size_t>(k + half)];
        }
        return acc;
    }
};

// Scrambled chip stream of each code channel (unit gain).
inline std::vector<std::vector<cplx>> code_chips(const TestSignalSpec& spec, std::size_t n_codes,
                                                 std::uint64_t stream_seed) {
    const std::size_t sf = spec.spreading_factor;
    const std::size_t n_sym = spec.n_chips / sf;
    BitSource bits(stream_seed);
    // Walsh-Hadamard rows as OVSF codes of length sf.
    auto walsh = [](std::size_t row, std::size_t col) { return (std::popcount(row & col) & 1) ? -1.0 : 1.0; };
    std::vector<std::vector<cplx>> codes(n_codes, std::vector<cplx>(spec.n_chips));
    for (std::size_t k = 0; k < n_codes; ++k)
        for (std::size_t s = 0; s < n_sym; ++s) {
            const cplx d = qpsk(bits.next2());
            for (std::size_t c = 0; c < sf; ++c) codes[k][s * sf + c] = d * walsh(k, c);
        }
    for (std::size_t c = 0; c < spec.n_chips; ++c) {
        const cplx scr = qpsk(bits.next2()) * std::numbers::sqrt2; // unit modulus
        for (auto& code : codes) code[c] *= scr;
    }
    return codes;
}

inline std::vector<cplx> combine(const std::vector<std::vector<cplx>>& codes, const std::vector<double>& gains) {
    std::vector<cplx> chips(codes.front().size(), cplx{});
    for (std::size_t k = 0; k < codes.size(); ++k)
        for (std::size_t c = 0; c < chips.size(); ++c) chips[c] += gains[k] * codes[k][c];
    return chips;
}

inline IQSignal finish(std::vector<cplx> samples, const TestSignalSpec& spec) {
    IQSignal sig{std::move(samples), spec.sample_rate(), "u"};
    return scale_to_average_power(sig, 1.0);
}

} // namespace detail

// Root-raised-cosine multicode QPSK test signal with unit average power.
//
// With n_codes > 0 the codes carry equal gain. Otherwise the per-code gains
// are searched to place the PAR on target: starting from equal gains, the
// gains are blended towards the profile that best aligns the codes at the
// strongest peak, bisecting on the blend factor. Data realizations derived
// from the seed are tried in turn when a realization cannot bracket the target.
inline IQSignal generate_test_signal(const TestSignalSpec& spec) {
    validate(spec);
    detail::PulseShaper shaper(spec);
    if (spec.n_codes > 0) {
        const auto codes = detail::code_chips(spec, spec.n_codes, detail::splitmix64(spec.seed));
        return detail::finish(shaper.shape(detail::combine(codes, std::vector<double>(spec.n_codes, 1.0))), spec);
    }

    const std::size_t k_codes = spec.spreading_factor;
    const double target = spec.target_par;
    double best_par = 0.0;
    std::vector<cplx> best;
    for (std::size_t attempt = 0; attempt < spec.max_attempts; ++attempt) {
        const auto codes = detail::code_chips(spec, k_codes, detail::splitmix64(spec.seed ^ detail::splitmix64(attempt + 1)));
        const std::vector<double> equal(k_codes, 1.0);
        auto base = shaper.shape(detail::combine(codes, equal));
        const double par0 = peak_to_average_ratio(IQSignal{base, 1.0, {}});
        auto keep_best = [&](double par, const std::vector<cplx>& sig) {
            if (std::abs(par - target) < std::abs(best_par - target)) {
                best_par = par;
                best = sig;
            }
        };
        keep_best(par0, base);
        if (std::abs(par0 - target) <= spec.par_tolerance / 4.0) return detail::finish(std::move(base), spec);
        if (par0 > target) continue;

        // Gains aligned with the strongest peak, floored so every code stays active.
        std::size_t peak = 0;
        for (std::size_t n = 1; n < base.size(); ++n)
            if (std::norm(base[n]) > std::norm(base[peak])) peak = n;
        const cplx dir = base[peak] / std::abs(base[peak]);
        std::vector<double> aligned(k_codes);
        double ms = 0.0;
        for (std::size_t k = 0; k < k_codes; ++k) {
            aligned[k] = std::max(0.2, std::real(shaper.at(codes[k], peak) * std::conj(dir)));
            ms += aligned[k] * aligned[k];
        }
        for (auto& g : aligned) g /= std::sqrt(ms / static_cast<double>(k_codes));

        auto blend = [&](double lambda) {
            std::vector<double> g(k_codes);
            for (std::size_t k = 0; k < k_codes; ++k) g[k] = (1.0 - lambda) + lambda * aligned[k];
            return shaper.shape(detail::combine(codes, g));
        };
        auto top = blend(1.0);
        const double par1 = peak_to_average_ratio(IQSignal{top, 1.0, {}});
        keep_best(par1, top);
        if (par1 < target) continue;

        double lo = 0.0, hi = 1.0;
        std::vector<cplx> cand = std::move(top);
        double par = par1;
        for (int it = 0; it < 40 && std::abs(par - target) > spec.par_tolerance / 4.0; ++it) {
            const double mid = 0.5 * (lo + hi);
            cand = blend(mid);
            par = peak_to_average_ratio(IQSignal{cand, 1.0, {}});
            (par < target ? lo : hi) = mid;
        }
        keep_best(par, cand);
        if (std::abs(par - target) <= spec.par_tolerance) return detail::finish(std::move(cand), spec);
    }
    if (std::abs(best_par - target) <= spec.par_tolerance) return detail::finish(std::move(best), spec);
    throw Error("generate_test_signal: target PAR " + std::to_string(target) + " dB unreachable; closest achieved " +
                std::to_string(best_par) + " dB");
}

struct DualInputs {
    IQSignal x;
    ControlSignal vc;
    std::size_t saturated = 0;
    double saturation_fraction = 0.0;
    std::vector<std::string> warnings;
};

inline constexpr double saturation_warn_fraction = 0.01;
inline constexpr double saturation_error_fraction = 0.10;

// Per sample: |x| = f_A(|u|), arg x = arg u + phi_pd(|u|), Vc = f_Z(|u|).
inline DualInputs synthesize_dual_inputs(const IQSignal& u, const ControlLaw& law) {
    if (u.empty()) throw Error("empty signal");
    DualInputs d;
    d.x = {std::vector<cplx>(u.size()), u.sample_rate, "x"};
    d.vc.samples.resize(u.size());
    d.vc.sample_rate = u.sample_rate;
    d.vc.v_min = law.v_min;
    d.vc.v_max = law.v_max;
    d.vc.label = "vc";
    for (std::size_t n = 0; n < u.size(); ++n) {
        const cplx un = u.samples[n];
        const auto o = evaluate_control_law(law, std::abs(un));
        d.saturated += o.saturated ? 1 : 0;
        d.x.samples[n] = std::polar(o.x_mag, std::arg(un) + o.phase);
        d.vc.samples[n] = o.vc;
    }
    d.saturation_fraction = static_cast<double>(d.saturated) / static_cast<double>(u.size());
    if (d.saturation_fraction > saturation_error_fraction)
        throw Error("synthesize_dual_inputs: " + std::to_string(100.0 * d.saturation_fraction) +
                    "% of samples saturated");
    if (d.saturation_fraction > saturation_warn_fraction)
        d.warnings.push_back("synthesize_dual_inputs: " + std::to_string(100.0 * d.saturation_fraction) +
                             "% of samples saturated");
    return d;
}

struct SingleInputDrive {
    IQSignal x;
    ControlSignal vc; // constant
    std::size_t saturated = 0;
    double saturation_fraction = 0.0;
};

// Quasi-static predistortion of the PA alone at a fixed control voltage:
// inverts the AM/AM slice numerically and pre-rotates by the AM/PM, clamping
// at the compression point.
inline SingleInputDrive predistort_single_input(const IQSignal& u, const QuasiStaticSurface& s, double vc_fixed) {
    if (u.empty()) throw Error("empty signal");
    if (vc_fixed < s.vc_grid.front() || vc_fixed > s.vc_grid.back())
        throw Error("predistort_single_input: vc_fixed outside characterized range");
    const ControlSlice slice(s, vc_fixed);
    SingleInputDrive d;
    d.x = {std::vector<cplx>(u.size()), u.sample_rate, "x"};
    d.vc = {std::vector<double>(u.size(), vc_fixed), u.sample_rate, ControlSignal::default_v_min,
            ControlSignal::default_v_max, "vc"};
    d.vc.v_min = std::min(d.vc.v_min, vc_fixed);
    d.vc.v_max = std::max(d.vc.v_max, vc_fixed);
    for (std::size_t n = 0; n < u.size(); ++n) {
        const cplx un = u.samples[n];
        const auto inv = slice.invert(std::abs(un));
        d.saturated += inv.saturated ? 1 : 0;
        d.x.samples[n] = std::polar(inv.x_mag, std::arg(un) + slice.phase_at(inv.x_mag));
    }
    d.saturation_fraction = static_cast<double>(d.saturated) / static_cast<double>(u.size());
    return d;
}

// Relabels the time axis: same samples, sample rate multiplied by factor.
inline IQSignal scale_bandwidth(const IQSignal& sig, double factor) {
    if (!(factor > 0.0)) throw Error("scale_bandwidth: factor must be positive");
    IQSignal out = sig;
    out.sample_rate *= factor;
    return out;
}

inline ControlSignal scale_bandwidth(const ControlSignal& sig, double factor) {
    if (!(factor > 0.0)) throw Error("scale_bandwidth: factor must be positive");
    ControlSignal out = sig;
    out.sample_rate *= factor;
    return out;
}

} // namespace dlm
