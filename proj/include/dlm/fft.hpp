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

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <vector>

#include <fftw3.h>

#include "error.hpp"

namespace dlm {

namespace detail {
// FFTW planning is not reentrant; execution on distinct buffers is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}
} // namespace detail

enum class FftDirection { forward = FFTW_FORWARD, inverse = FFTW_BACKWARD };

// In-place complex DFT of fixed length. Unnormalized in both directions.
class Dft {
public:
    Dft(std::size_t n, FftDirection dir) : n_(n) {
        if (n == 0) throw Error("dft: zero length");
        buf_ = fftw_alloc_complex(n);
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan_ = fftw_plan_dft_1d(static_cast<int>(n), buf_, buf_, static_cast<int>(dir), FFTW_ESTIMATE);
    }
    Dft(const Dft&) = delete;
    Dft& operator=(const Dft&) = delete;
    ~Dft() {
        {
            std::lock_guard lock(detail::fftw_planner_mutex());
            fftw_destroy_plan(plan_);
        }
        fftw_free(buf_);
    }

    std::size_t size() const noexcept { return n_; }

    void operator()(std::span<std::complex<double>> data) {
        if (data.size() != n_) throw Error("dft: length mismatch");
        auto* raw = reinterpret_cast<std::complex<double>*>(buf_);
        std::copy(data.begin(), data.end(), raw);
        fftw_execute(plan_);
        std::copy(raw, raw + n_, data.begin());
    }

private:
    std::size_t n_;
    fftw_complex* buf_ = nullptr;
    fftw_plan plan_ = nullptr;
};

inline std::vector<std::complex<double>> fft(std::vector<std::complex<double>> data,
                                             FftDirection dir = FftDirection::forward) {
    Dft plan(data.size(), dir);
    plan(data);
    return data;
}

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

} // namespace dlm
