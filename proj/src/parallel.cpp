// src/parallel.cpp

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

#include "residual_id/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

#include "residual_id/error.hpp"

namespace residual_id {

int configure_threads_from_env() {
  const char *env = std::getenv("RESIDUAL_ID_THREADS");
  if (env != nullptr && *env != '\0') {
    char *end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 0)
      fail(ErrorCode::InvalidArgument,
           std::string("RESIDUAL_ID_THREADS must be a non-negative integer, got '") + env + "'");
    if (n > 0) set_threads(static_cast<int>(n));
  }
  return max_threads();
}

void set_threads(int count) {
  if (count > 0) omp_set_num_threads(count);
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace residual_id
