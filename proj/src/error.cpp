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

#include "viewdiv/error.hpp"

namespace viewdiv {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidRect: return "InvalidRect";
    case ErrorKind::ExtentTooSmall: return "ExtentTooSmall";
    case ErrorKind::Unsatisfiable: return "Unsatisfiable";
    case ErrorKind::MissingPartner: return "MissingPartner";
    case ErrorKind::NoInstances: return "NoInstances";
    case ErrorKind::UnknownImage: return "UnknownImage";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::BadFactor: return "BadFactor";
    case ErrorKind::EmptyPatch: return "EmptyPatch";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NumericalUnderflow: return "NumericalUnderflow";
    case ErrorKind::NotSquare: return "NotSquare";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::ManifestError: return "ManifestError";
    case ErrorKind::EncoderMismatch: return "EncoderMismatch";
    case ErrorKind::MissingAnchor: return "MissingAnchor";
  }
  return "Unknown";
}

bool is_numerical(ErrorKind kind) {
  return kind == ErrorKind::NumericalUnderflow || kind == ErrorKind::NonFinite;
}

}  // namespace viewdiv
