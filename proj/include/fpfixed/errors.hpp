// Copyright (C) 2026 The fpfixed Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance
// with the License. You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software distributed under the License
// is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express
// or implied. See the License for the specific language governing permissions and limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace fpfixed {

// Bad argument values, shape mismatches, broken invariants of inputs.
class ValidationError : public std::invalid_argument {
 public:
    using std::invalid_argument::invalid_argument;
};

// Non-finite numeric input where a finite value is required.
class DomainError : public std::domain_error {
 public:
    using std::domain_error::domain_error;
};

// Malformed files and byte streams.
class FormatError : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

// Both branch embeddings were zero; there is no direction to normalize.
class DegenerateEmbeddingError : public ValidationError {
 public:
    using ValidationError::ValidationError;
};

// A FAR level below the resolution that the imposter set can support.
class UnsupportedFarLevelError : public ValidationError {
 public:
    using ValidationError::ValidationError;
};

// Training diverged (non-finite loss).
class TrainingFault : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

}  // namespace fpfixed
