/* Copyright 2026 The ASGIR Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <stdexcept>
#include <string>

namespace asgir {

// Root of every error thrown by the library. Callers that only need a
// message can catch this; the subclasses let the CLI and the HTTP service map
// failures onto exit codes and status codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Audio shorter than one classification segment.
class TooShortError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Audio container problems.
class FormatError : public Error {
 public:
  using Error::Error;
};

class UnsupportedCodecError : public Error {
 public:
  using Error::Error;
};

// Binary model/weight files (ASGW, ASGM).
class WeightError : public Error {
 public:
  using Error::Error;
};

class BadMagicError : public WeightError {
 public:
  using WeightError::WeightError;
};

class VersionError : public WeightError {
 public:
  using WeightError::WeightError;
};

class TruncationError : public WeightError {
 public:
  TruncationError(const std::string& what, std::string tensor)
      : WeightError(what), tensor_(std::move(tensor)) {}
  const std::string& tensor() const { return tensor_; }

 private:
  std::string tensor_;
};

class ShapeMismatchError : public WeightError {
 public:
  ShapeMismatchError(const std::string& what, std::string tensor)
      : WeightError(what), tensor_(std::move(tensor)) {}
  const std::string& tensor() const { return tensor_; }

 private:
  std::string tensor_;
};

class DegenerateTrainingError : public Error {
 public:
  using Error::Error;
};

// Region index / label registry lookups.
class UnknownRegionError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

class UnknownSpeciesError : public Error {
 public:
  using Error::Error;
};

// Retrieval.
class NotFoundError : public Error {
 public:
  NotFoundError(const std::string& what, std::string title)
      : Error(what), title_(std::move(title)) {}
  const std::string& title() const { return title_; }

 private:
  std::string title_;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class StatusError : public Error {
 public:
  StatusError(const std::string& what, int status)
      : Error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace asgir
