#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace morphshell {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent user input: files, configuration, topology.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A kinematic quantity is undefined at the current configuration
/// (collapsed edge, zero-area triangle).
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Region label for edges and triangles.
enum class Region : std::uint8_t { SingleLayer = 0, Bilayer = 1 };

inline const char* to_string(Region r) {
  return r == Region::Bilayer ? "bilayer" : "single";
}

}  // namespace morphshell
