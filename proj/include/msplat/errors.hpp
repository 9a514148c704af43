// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace msplat {

// Base class for every error thrown by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct NonPositiveDepth : Error {
  explicit NonPositiveDepth(const std::string& w) : Error(w) {}
};
struct NonPositiveInverseDepth : Error {
  explicit NonPositiveInverseDepth(const std::string& w) : Error(w) {}
};
struct OutOfBounds : Error {
  explicit OutOfBounds(const std::string& w) : Error(w) {}
};
struct ImageTooSmall : Error {
  explicit ImageTooSmall(const std::string& w) : Error(w) {}
};
struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& w) : Error(w) {}
};
struct DegenerateInput : Error {
  explicit DegenerateInput(const std::string& w) : Error(w) {}
};
struct PointBehindCamera : Error {
  explicit PointBehindCamera(const std::string& w) : Error(w) {}
};
struct ReprojectionOutOfBounds : Error {
  explicit ReprojectionOutOfBounds(const std::string& w) : Error(w) {}
};
struct TrackingLost : Error {
  explicit TrackingLost(const std::string& w) : Error(w) {}
};
struct WindowNotOverfull : Error {
  explicit WindowNotOverfull(const std::string& w) : Error(w) {}
};
struct MalformedPly : Error {
  explicit MalformedPly(const std::string& w) : Error(w) {}
};
struct VersionMismatch : Error {
  explicit VersionMismatch(const std::string& w) : Error(w) {}
};
struct TooManyLevels : Error {
  explicit TooManyLevels(const std::string& w) : Error(w) {}
};
struct EmptyMap : Error {
  explicit EmptyMap(const std::string& w) : Error(w) {}
};
struct MismatchedSnapshot : Error {
  explicit MismatchedSnapshot(const std::string& w) : Error(w) {}
};
struct MissingIndexFile : Error {
  explicit MissingIndexFile(const std::string& w) : Error(w) {}
};
struct UnparseableLine : Error {
  explicit UnparseableLine(const std::string& w) : Error(w) {}
};
struct TooFewPoses : Error {
  explicit TooFewPoses(const std::string& w) : Error(w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(w) {}
};
struct BadConfig : Error {
  explicit BadConfig(const std::string& w) : Error(w) {}
};

}  // namespace msplat
