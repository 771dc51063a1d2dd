/*
 * Copyright (c) The corun-affinity Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Fixed-work CPU spinner used as a contention workload in tests and demos.
// The iteration count, not wall time, is fixed: co-running two spinners on
// one core roughly doubles each one's runtime, which is exactly the signal a
// co-run harness should see.
//
// usage: spin [--iters N] [--pin CPU]

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>

#include <sched.h>

int main(int argc, char** argv) {
  std::uint64_t iters = 150000000ULL;
  int pin = -1;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--iters") == 0 && i + 1 < argc) {
      iters = std::strtoull(argv[++i], nullptr, 10);
    } else if (std::strcmp(argv[i], "--pin") == 0 && i + 1 < argc) {
      pin = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: spin [--iters N] [--pin CPU]\n");
      return 2;
    }
  }
  if (pin >= 0) {
    cpu_set_t set;
    CPU_ZERO(&set);
    CPU_SET(pin, &set);
    if (sched_setaffinity(0, sizeof(set), &set) != 0) {
      std::perror("sched_setaffinity");
      return 1;
    }
  }
  volatile std::uint64_t acc = 0x9E3779B97F4A7C15ULL;
  for (std::uint64_t i = 0; i < iters; ++i) {
    acc = acc * 6364136223846793005ULL + 1442695040888963407ULL;
  }
  return acc == 0 ? 1 : 0;  // keep the loop observable
}
