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

#ifndef ADDLAB_ERROR_HPP
#define ADDLAB_ERROR_HPP

#include <stdexcept>
#include <string>

namespace addlab {

/// Coarse error category. Values double as CLI exit codes.
enum class Status : int {
  ok = 0,
  usage = 1,
  data = 2,
  runtime = 3,
};

/// Fine-grained reason, so callers and tests can tell failures apart.
enum class Reason {
  generic,
  shape,
  parameter,
  too_short,
  empty_input,
  decode,
  unsupported_format,
  label,
  io,
  magic,
  version,
  checksum,
  truncated,
  format,
  validation,
  nan_loss,
  incompatible,
};

const char* reason_name(Reason r) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Status status, Reason reason, const std::string& message)
      : std::runtime_error(message), status_(status), reason_(reason) {}

  Status status() const noexcept { return status_; }
  Reason reason() const noexcept { return reason_; }

 private:
  Status status_;
  Reason reason_;
};

[[noreturn]] inline void fail(Status status, Reason reason,
                              const std::string& message) {
  throw Error(status, reason, message);
}

[[noreturn]] inline void shape_error(const std::string& message) {
  throw Error(Status::usage, Reason::shape, "shape error: " + message);
}

[[noreturn]] inline void parameter_error(const std::string& message) {
  throw Error(Status::usage, Reason::parameter, "parameter error: " + message);
}

}  // namespace addlab

#endif  // ADDLAB_ERROR_HPP
