#pragma once

#include <stdexcept>
#include <string>

namespace adaqr {

// Error taxonomy mirrors the CLI exit-code contract:
//   validation = 1, I/O = 2, transport (remote scorer) = 3.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Service reachable but the payload is malformed (wrong shape, non-finite
// numbers). Subtype of transport for exit-code purposes.
struct ProtocolError : TransportError {
  using TransportError::TransportError;
};

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const TransportError*>(&e) != nullptr) return 3;
  if (dynamic_cast<const IoError*>(&e) != nullptr) return 2;
  return 1;
}

}  // namespace adaqr
