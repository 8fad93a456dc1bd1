// Copyright (c) 2026, The viewdiv Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VIEWDIV_ERROR_HPP_
#define VIEWDIV_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace viewdiv {

enum class ErrorKind {
  // geometry
  InvalidRect,
  ExtentTooSmall,
  // pairgen
  Unsatisfiable,
  MissingPartner,
  NoInstances,
  UnknownImage,
  InvalidConfig,
  // patches
  BadFactor,
  // features
  EmptyPatch,
  BadMagic,
  TruncatedFile,
  DimMismatch,
  NonFiniteValue,
  IoError,
  // transport
  ShapeMismatch,
  NumericalUnderflow,
  NotSquare,
  // losses
  NonFinite,
  InvalidInput,
  // pipeline
  ManifestError,
  EncoderMismatch,
  MissingAnchor,
};

std::string_view to_string(ErrorKind kind);

/// True for failures caused by floating-point breakdown rather than bad input.
bool is_numerical(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define VIEWDIV_ENFORCE(cond, kind, msg)          \
  do {                                            \
    if (!(cond)) throw ::viewdiv::Error((kind), (msg)); \
  } while (0)

}  // namespace viewdiv

#endif  // VIEWDIV_ERROR_HPP_
