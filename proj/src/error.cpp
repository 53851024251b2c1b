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

#include "addlab/error.hpp"

namespace addlab {

const char* reason_name(Reason r) noexcept {
  switch (r) {
    case Reason::generic: return "error";
    case Reason::shape: return "shape";
    case Reason::parameter: return "parameter";
    case Reason::too_short: return "too-short";
    case Reason::empty_input: return "empty-input";
    case Reason::decode: return "decode";
    case Reason::unsupported_format: return "unsupported-format";
    case Reason::label: return "label";
    case Reason::io: return "io";
    case Reason::magic: return "magic";
    case Reason::version: return "version";
    case Reason::checksum: return "checksum";
    case Reason::truncated: return "truncated";
    case Reason::format: return "format";
    case Reason::validation: return "validation";
    case Reason::nan_loss: return "nan-loss";
    case Reason::incompatible: return "incompatible";
  }
  return "error";
}

}  // namespace addlab
