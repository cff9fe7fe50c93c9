// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace fishrope {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A scalar argument outside the domain of an operation. Carries the value.
class DomainError : public Error {
 public:
  DomainError(const std::string& what, double value)
      : Error(what + " (got " + std::to_string(value) + ")"), value_(value) {}
  double value() const { return value_; }

 private:
  double value_;
};

/// Pixel radius beyond the image circle plus its clamp band.
class OutOfImageCircleError : public Error {
 public:
  OutOfImageCircleError(double radius, double limit)
      : Error("radius " + std::to_string(radius) + " px lies outside the image circle (limit " +
              std::to_string(limit) + " px)"),
        radius_(radius),
        limit_(limit) {}
  double radius() const { return radius_; }
  double limit() const { return limit_; }

 private:
  double radius_;
  double limit_;
};

class BehindCameraError : public Error {
 public:
  explicit BehindCameraError(double depth)
      : Error("point lies behind the camera (z = " + std::to_string(depth) + ")"), depth_(depth) {}
  double depth() const { return depth_; }

 private:
  double depth_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class EmptyAttentionError : public Error {
 public:
  EmptyAttentionError() : Error("attention has no unmasked key") {}
};

/// Invalid calibration document. `field()` names the offending key.
class CalibrationError : public Error {
 public:
  CalibrationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unsupported file contents (bad magic, unknown version).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace fishrope
