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

#include "error.hpp"
#include "experiment.hpp"
#include "extractor.hpp"
#include "fft.hpp"
#include "fixtures.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "polynomial.hpp"
#include "signal.hpp"
#include "smith.hpp"
#include "surface.hpp"
#include "synth.hpp"
