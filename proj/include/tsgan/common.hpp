#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsgan {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform to an operation's rule.
struct ShapeError : Error {
  using Error::Error;
};

/// A value violates a domain constraint (log of non-positive input,
/// invalid conv geometry, bad config field, ...).
struct ValueError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

/// Shortest decimal representation that parses back to the exact same double.
std::string format_double(double v);

/// FNV-1a over a byte string, hex-encoded. Used for config hashes in manifests.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace tsgan
