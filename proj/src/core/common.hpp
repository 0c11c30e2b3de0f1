#pragma once

#include <stdexcept>
#include <string>

namespace fednod {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/layer shape violations; message names the offending axis.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Dataset layout / file content problems.
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradients during training.
class DivergedError : public Error {
 public:
  using Error::Error;
};

class IncompatibleWeightsError : public Error {
 public:
  using Error::Error;
};

class AggregationError : public Error {
 public:
  using Error::Error;
};

// Wire format violations (framing, decode, session order).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// CRC mismatch on a received frame.
class IntegrityError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

}  // namespace fednod
