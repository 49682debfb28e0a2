// residual_id/fft.hpp

// Copyright 2026 The residual-id Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace residual_id {

/// In-place iterative radix-2 FFT; data.size() must be a power of two.
void fft_inplace(std::span<std::complex<double>> data);

bool is_power_of_two(std::size_t n);

/// |X[k]|^2 for k = 0..n/2 of the frame zero-padded to n points.
std::vector<double> power_spectrum(std::span<const double> frame, std::size_t n);

}  // namespace residual_id
