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

#include <cmath>
#include <numbers>

#include <catch_amalgamated.hpp>

#include "dlm/dlm.hpp"
#include "property.hpp"
#include "test_util.hpp"

using namespace dlm;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

TEST_CASE("evaluate examples") {
    const auto s = testutil::bilinear_surface();
    SECTION("zero drive") {
        const auto e = evaluate(s, 0.0, 13.0);
        CHECK(e.y_mag == 0.0);
        CHECK(e.p_dc == Approx(1.0 + 1.3));
    }
    SECTION("grid points are exact") {
        for (std::size_t i = 0; i < s.nx(); ++i)
            for (std::size_t j = 0; j < s.nv(); ++j) {
                const auto e = evaluate(s, s.x_grid[i], s.vc_grid[j]);
                const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
                REQUIRE(e.y_mag == s.y_mag(ii, jj));
                REQUIRE(e.phase == s.phase(ii, jj));
                REQUIRE(e.p_dc == s.p_dc(ii, jj));
            }
    }
    SECTION("midpoint between rows is the mean") {
        const auto e = evaluate(s, 0.75, 13.0);
        CHECK(e.y_mag == Approx(0.5 * (s.y_mag(1, 1) + s.y_mag(2, 1))).epsilon(1e-14));
        CHECK(e.p_dc == Approx(0.5 * (s.p_dc(1, 1) + s.p_dc(2, 1))).epsilon(1e-14));
    }
    SECTION("extrapolation to 1.1x and clamping") {
        CHECK(evaluate(s, 2.75, 13.0).y_mag == Approx(2.75 * 2.3).epsilon(1e-12));
        CHECK(evaluate(s, 1.0, 100.0).y_mag == Approx(evaluate(s, 1.0, 27.0).y_mag));
        CHECK(evaluate(s, 1.0, -5.0).y_mag == Approx(evaluate(s, 1.0, 6.0).y_mag));
        CHECK_THROWS_WITH(evaluate(s, 2.5 * 1.1 + 1e-6, 13.0), ContainsSubstring("drive beyond characterized range"));
        CHECK_THROWS_WITH(evaluate(s, -0.1, 13.0), ContainsSubstring("drive beyond characterized range"));
    }
}

TEST_CASE("simulate_transmitter examples") {
    const auto s = make_reference_surface(FixtureKind::class_e);
    SECTION("zero input") {
        const IQSignal x{std::vector<cplx>(32), 1e6, "x"};
        const ControlSignal vc{std::vector<double>(32, 15.0), 1e6, 6.0, 27.0, "vc"};
        const auto out = simulate_transmitter(s, x, vc);
        for (const auto& v : out.y.samples) REQUIRE(v == cplx{});
        CHECK(out.p_out_avg == 0.0);
    }
    SECTION("constant grid-point drive") {
        const double xm = s.x_grid[20];
        const IQSignal x{std::vector<cplx>(16, cplx{xm, 0.0}), 1e6, "x"};
        const ControlSignal vc{std::vector<double>(16, s.vc_grid[5]), 1e6, 6.0, 27.0, "vc"};
        const auto out = simulate_transmitter(s, x, vc);
        for (const auto& v : out.y.samples) {
            REQUIRE(std::abs(v) == Approx(s.y_mag(20, 5)).epsilon(1e-14));
            REQUIRE(std::arg(v) == Approx(-s.phase(20, 5)).margin(1e-14));
        }
        CHECK(out.p_dc_avg == Approx(s.p_dc(20, 5)));
    }
    SECTION("two-tone matches the per-sample scalar oracle") {
        const std::size_t n = 4096;
        IQSignal x{std::vector<cplx>(n), 1e6, "x"};
        const double a = 0.45 * s.x_max();
        for (std::size_t k = 0; k < n; ++k) {
            const double t = static_cast<double>(k);
            x.samples[k] = a * (std::polar(1.0, 2 * std::numbers::pi * 0.01 * t) + std::polar(1.0, -2 * std::numbers::pi * 0.01 * t));
        }
        const ControlSignal vc{std::vector<double>(n, 16.5), 1e6, 6.0, 27.0, "vc"};
        const auto out = simulate_transmitter(s, x, vc);
        IQSignal oracle{std::vector<cplx>(n), 1e6, "o"};
        for (std::size_t k = 0; k < n; ++k) {
            const auto e = evaluate(s, std::abs(x.samples[k]), 16.5);
            oracle.samples[k] = std::polar(e.y_mag, std::arg(x.samples[k]) - e.phase);
        }
        const auto ps = power_spectrum(out.y, 1024), po = power_spectrum(oracle, 1024);
        for (std::size_t k = 0; k < ps.psd.size(); ++k) REQUIRE(ps.psd[k] == Approx(po.psd[k]).epsilon(1e-9).margin(1e-30));
        // Intermodulation products are present (the oracle is not linear).
        const double third = ps.band_power(3 * 0.01e6 - 2e3, 3 * 0.01e6 + 2e3);
        CHECK(third > 1e-6 * ps.total_power());
    }
    SECTION("length mismatch") {
        CHECK_THROWS_AS(simulate_transmitter(s, IQSignal{std::vector<cplx>(4), 1.0, ""},
                                             ControlSignal{std::vector<double>(5, 10.0), 1.0, 6.0, 27.0, ""}),
                        Error);
    }
}

namespace {

double grid_pae(const QuasiStaticSurface& s, Eigen::Index i, Eigen::Index j) {
    const double p = s.y_mag(i, j) * s.y_mag(i, j) / (2.0 * s.z_ref);
    return (p - s.p_in(i, j)) / s.p_dc(i, j);
}

// PAE of column j, linearly interpolated at output power p (negative if out of reach).
double column_pae_at(const QuasiStaticSurface& s, Eigen::Index j, double p) {
    for (Eigen::Index i = 1; i < s.y_mag.rows(); ++i) {
        const double p0 = s.y_mag(i - 1, j) * s.y_mag(i - 1, j) / (2.0 * s.z_ref);
        const double p1 = s.y_mag(i, j) * s.y_mag(i, j) / (2.0 * s.z_ref);
        if (p >= p0 && p <= p1) {
            const double t = (p - p0) / (p1 - p0);
            return grid_pae(s, i - 1, j) + t * (grid_pae(s, i, j) - grid_pae(s, i - 1, j));
        }
    }
    return -1.0;
}

// Best column at output power p: optimal V_c at that level.
double best_pae_at(const QuasiStaticSurface& s, double p) {
    double best = -1.0;
    for (Eigen::Index j = 0; j < s.y_mag.cols(); ++j) best = std::max(best, column_pae_at(s, j, p));
    return best;
}

} // namespace

TEST_CASE("make_reference_surface examples") {
    for (auto k : {FixtureKind::class_e, FixtureKind::class_j}) {
        const auto s = make_reference_surface(k);
        CHECK(validate(s).empty());
        CHECK(s.nv() == 22);
        CHECK(s.vc_grid.front() == 6.0);
        CHECK(s.vc_grid.back() == 27.0);
        for (std::size_t i = 2; i < s.nx(); ++i) // 1 dB drive steps
            REQUIRE(20.0 * std::log10(s.x_grid[i] / s.x_grid[i - 1]) == Approx(1.0).margin(1e-12));
        for (Eigen::Index j = 0; j < s.y_mag.cols(); ++j)
            for (Eigen::Index i = 1; i < s.y_mag.rows(); ++i) REQUIRE(s.y_mag(i, j) >= s.y_mag(i - 1, j));
    }
    const auto e = make_reference_surface(FixtureKind::class_e);
    double max_pae = 0.0;
    for (Eigen::Index i = 0; i < e.y_mag.rows(); ++i)
        for (Eigen::Index j = 0; j < e.y_mag.cols(); ++j) max_pae = std::max(max_pae, grid_pae(e, i, j));
    CHECK(max_pae == Approx(0.60).margin(0.02));
    for (Eigen::Index j = 0; j < e.y_mag.cols(); ++j) CHECK(grid_pae(e, 0, j) == 0.0);

    SECTION("ridge vs fixed-load gap at 10 dB back-off") {
        const double p_top = e.y_mag.maxCoeff() * e.y_mag.maxCoeff() / (2.0 * e.z_ref);
        const double p10 = p_top / 10.0;
        const auto j_fixed = static_cast<Eigen::Index>(e.nv() - 1); // max-power column
        const double gap = best_pae_at(e, p10) - column_pae_at(e, j_fixed, p10);
        CHECK(gap == Approx(0.11).margin(0.02));
    }
    CHECK(make_reference_surface(FixtureKind::class_e).y_mag == e.y_mag); // deterministic
    CHECK_THROWS_AS(parse_fixture("class_ab"), ConfigError);
}

TEST_CASE("class-J compresses less than class-E at the top of the grid") {
    auto compression_db = [](const QuasiStaticSurface& s) {
        const auto j = static_cast<Eigen::Index>(s.nv() - 1);
        const Eigen::Index top = s.y_mag.rows() - 1;
        const double g_top = s.y_mag(top, j) / s.x_grid.back();
        const double g_small = s.y_mag(1, j) / s.x_grid[1];
        return 20.0 * std::log10(g_small / g_top);
    };
    CHECK(compression_db(make_reference_surface(FixtureKind::class_j)) <
          compression_db(make_reference_surface(FixtureKind::class_e)));
}

TEST_CASE("class-E AM/PM spread along the ridge is below the fixed-Vc spread") {
    const auto s = make_reference_surface(FixtureKind::class_e);
    const auto ridge = extract_max_pae_ridge(compute_pae_grid(s));
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& p : ridge.points) {
        const double ph = evaluate(s, p.x_mag, p.vc).phase;
        lo = std::min(lo, ph);
        hi = std::max(hi, ph);
    }
    const double vf = max_power_control_voltage(s);
    const ControlSlice slice(s, vf);
    const double fixed_spread = slice.phase_at(slice.compression_drive()) - slice.phase_at(0.0);
    CHECK(hi - lo < std::abs(fixed_spread));
}

TEST_CASE("rotate_trajectory examples") {
    LoadTrajectory t;
    for (int k = 1; k <= 12; ++k) t.points.push_back({0.5 * k, std::polar(0.05 * k, 0.3 * k)});
    const auto same = rotate_trajectory(t, 0.0);
    for (std::size_t k = 0; k < t.points.size(); ++k) CHECK(same.points[k].gamma == t.points[k].gamma);
    const auto full = rotate_trajectory(t, std::numbers::pi);
    for (std::size_t k = 0; k < t.points.size(); ++k) {
        CHECK(std::abs(full.points[k].gamma - t.points[k].gamma) < 1e-15);
        CHECK(full.points[k].p_out == t.points[k].p_out);
    }
    const auto r = rotate_trajectory(t, 1.234);
    for (std::size_t k = 0; k < t.points.size(); ++k)
        CHECK(std::abs(r.points[k].gamma) == Approx(std::abs(t.points[k].gamma)).epsilon(1e-15));
}

TEST_CASE("fit_rotation examples") {
    LoadTrajectory a;
    for (int k = 1; k <= 20; ++k) a.points.push_back({0.3 * k, std::polar(0.2 + 0.03 * k, 0.1 * k - 1.0)});
    const auto f = fit_rotation(a, rotate_trajectory(a, 0.7));
    CHECK(f.theta == Approx(0.7).margin(1e-6));
    CHECK(f.residual < 1e-20);
    CHECK(fit_rotation(a, a).theta == Approx(0.0).margin(1e-12));

    SECTION("noisy") {
        std::mt19937_64 rng(5);
        std::normal_distribution<double> g(0.0, 0.01);
        auto b = rotate_trajectory(a, 0.7);
        for (auto& p : b.points) p.gamma += cplx{g(rng), g(rng)};
        CHECK(fit_rotation(a, b).theta == Approx(0.7).margin(0.02));
    }
    SECTION("too few matched points") {
        LoadTrajectory c{{{100.0, cplx{0.1, 0}}, {200.0, cplx{0.2, 0}}}};
        CHECK_THROWS_WITH(fit_rotation(a, c), ContainsSubstring("fewer than 2"));
    }
    SECTION("invalid trajectory") {
        LoadTrajectory bad{{{1.0, cplx{1.5, 0}}, {2.0, cplx{0.1, 0}}}};
        CHECK_THROWS_AS(validate(bad), Error);
        LoadTrajectory unsorted{{{2.0, cplx{0.1, 0}}, {1.0, cplx{0.1, 0}}}};
        CHECK_THROWS_AS(validate(unsorted), Error);
    }
}

TEST_CASE("reference VMN map") {
    const auto m = reference_vmn_map(0.4);
    for (const auto& g : m.gamma) REQUIRE(std::abs(g) < 1.0);
    CHECK(m.vc_grid.size() == m.gamma.size());
}

// ----------------------------------------------------------------- properties

TEST_CASE("property: simulate_transmitter equals pointwise evaluate") {
    const auto s = make_reference_surface(FixtureKind::class_j);
    prop::for_all(
        201, prop::default_cases,
        [&](std::mt19937_64& rng) {
            const std::size_t n = 64;
            IQSignal x{std::vector<cplx>(n), 1.0, "x"};
            ControlSignal vc{std::vector<double>(n), 1.0, 6.0, 27.0, "vc"};
            for (std::size_t k = 0; k < n; ++k) {
                x.samples[k] = std::polar(prop::uniform(rng, 0.0, 1.1 * s.x_max()), prop::uniform(rng, -3.14, 3.14));
                vc.samples[k] = prop::uniform(rng, 6.0, 27.0);
            }
            return std::pair{x, vc};
        },
        [&](const auto& in) {
            const auto& [x, vc] = in;
            const auto out = simulate_transmitter(s, x, vc);
            for (std::size_t k = 0; k < x.size(); ++k) {
                const auto e = evaluate(s, std::abs(x.samples[k]), vc.samples[k]);
                const cplx want = std::polar(e.y_mag, std::arg(x.samples[k]) - e.phase);
                REQUIRE(std::abs(out.y.samples[k] - want) <= 1e-12 * (1.0 + std::abs(want)));
            }
        });
}

TEST_CASE("property: rotations compose") {
    prop::for_all(
        202, prop::default_cases,
        [](std::mt19937_64& rng) {
            LoadTrajectory t;
            for (int k = 1; k <= 8; ++k) t.points.push_back({double(k), std::polar(prop::uniform(rng, 0, 0.95), prop::uniform(rng, -3, 3))});
            return std::tuple{t, prop::uniform(rng, -4, 4), prop::uniform(rng, -4, 4)};
        },
        [](const auto& in) {
            const auto& [t, a, b] = in;
            const auto lhs = rotate_trajectory(rotate_trajectory(t, a), b);
            const auto rhs = rotate_trajectory(t, a + b);
            for (std::size_t k = 0; k < t.points.size(); ++k)
                REQUIRE(std::abs(lhs.points[k].gamma - rhs.points[k].gamma) < 1e-14);
        });
}

TEST_CASE("property: fit_rotation recovers random angles") {
    prop::for_all(
        203, prop::default_cases,
        [](std::mt19937_64& rng) {
            LoadTrajectory t;
            double p = 0.1;
            for (int k = 0; k < 15; ++k) {
                p *= prop::uniform(rng, 1.05, 1.5);
                t.points.push_back({p, std::polar(prop::uniform(rng, 0.05, 0.95), prop::uniform(rng, -3, 3))});
            }
            return std::pair{t, prop::uniform(rng, -1.5, 1.5)};
        },
        [](const auto& in) {
            const auto& [t, theta] = in;
            REQUIRE(fit_rotation(t, rotate_trajectory(t, theta)).theta == Approx(theta).margin(1e-6));
        });
}
