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

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace dlm {

// Coefficients are stored lowest order first: c[0] + c[1] t + c[2] t^2 + ...
inline double polyval(std::span<const double> c, double t) {
    double acc = 0.0;
    for (std::size_t k = c.size(); k-- > 0;) acc = acc * t + c[k];
    return acc;
}

inline double polyder_val(std::span<const double> c, double t) {
    double acc = 0.0;
    for (std::size_t k = c.size(); k-- > 1;) acc = acc * t + static_cast<double>(k) * c[k];
    return acc;
}

// Least-squares polynomial fit of the given order. With through_origin the
// constant term is pinned to zero (c[0] == 0 exactly). Optional weights
// multiply each residual.
inline std::vector<double> polyfit(std::span<const double> t, std::span<const double> y, int order,
                                   bool through_origin = false, std::span<const double> w = {}) {
    if (order < 0) throw Error("polyfit: negative order");
    if (t.size() != y.size()) throw Error("polyfit: length mismatch");
    if (!w.empty() && w.size() != t.size()) throw Error("polyfit: weight length mismatch");
    const int first = through_origin ? 1 : 0;
    const int n_coef = order + 1 - first;
    if (n_coef <= 0) return std::vector<double>(static_cast<std::size_t>(order) + 1, 0.0);
    if (t.size() < static_cast<std::size_t>(n_coef)) throw Error("polyfit: insufficient points");

    Eigen::MatrixXd a(static_cast<Eigen::Index>(t.size()), n_coef);
    Eigen::VectorXd b(static_cast<Eigen::Index>(t.size()));
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double wi = w.empty() ? 1.0 : w[i];
        double p = first ? t[i] : 1.0;
        for (int k = 0; k < n_coef; ++k) {
            a(static_cast<Eigen::Index>(i), k) = wi * p;
            p *= t[i];
        }
        b(static_cast<Eigen::Index>(i)) = wi * y[i];
    }
    Eigen::VectorXd sol = a.colPivHouseholderQr().solve(b);

    std::vector<double> c(static_cast<std::size_t>(order) + 1, 0.0);
    for (int k = 0; k < n_coef; ++k) c[static_cast<std::size_t>(k + first)] = sol(k);
    return c;
}

} // namespace dlm
