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

#ifndef ADDLAB_TESTS_EXPECT_HPP
#define ADDLAB_TESTS_EXPECT_HPP

#include <optional>
#include <string>

#include "addlab/error.hpp"

namespace expect {

struct Caught {
  addlab::Status status;
  addlab::Reason reason;
  std::string message;
};

/// Runs f and returns the addlab::Error it threw, if any.
template <typename F>
std::optional<Caught> error_of(F&& f) {
  try {
    f();
  } catch (const addlab::Error& e) {
    return Caught{e.status(), e.reason(), e.what()};
  }
  return std::nullopt;
}

template <typename F>
bool fails_with(F&& f, addlab::Reason reason) {
  const auto e = error_of(f);
  return e && e->reason == reason;
}

}  // namespace expect

#endif  // ADDLAB_TESTS_EXPECT_HPP
