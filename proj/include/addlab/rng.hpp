/*
 * Copyright 2026 The addlab Authors
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

#ifndef ADDLAB_RNG_HPP
#define ADDLAB_RNG_HPP

#include <cstdint>

namespace addlab {

/// Counter-based generator: output i is a pure function of (key, i), so the
/// whole state is two integers and can be checkpointed exactly.
class CounterRng {
 public:
  struct State {
    std::uint64_t key = 0;
    std::uint64_t counter = 0;
  };

  explicit CounterRng(std::uint64_t seed = 0, std::uint64_t stream = 0);
  explicit CounterRng(State state) : state_(state) {}

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Standard Gumbel(0, 1) draw, -log(-log(U)).
  double gumbel();

  /// Independent generator derived from this one's key.
  CounterRng fork(std::uint64_t stream) const;

  State state() const { return state_; }

 private:
  State state_;
};

}  // namespace addlab

#endif  // ADDLAB_RNG_HPP
