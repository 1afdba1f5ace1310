#pragma once

#include <cstdint>
#include <string>

#include "taskforge/mlp.hpp"

namespace taskforge {

// A trained (or freshly initialised) model on disk: `manifest.json` describes
// every parameter space (name, layout, offset into the blob) plus the run's
// seed and step count; `params.bin` holds all values as raw little-endian
// float32 in manifest order. Round-trips are bit-exact.
struct Checkpoint {
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  ParamStore params;
};

// Creates `dir` if needed and writes manifest.json + params.bin.
void save_checkpoint(const std::string& dir, const Checkpoint& c);

// errors: IoError (missing files), BadManifest (malformed JSON or layouts),
// TruncatedFile (blob shorter than the manifest claims), NonFinite (a stored
// value is NaN/Inf).
Checkpoint load_checkpoint(const std::string& dir);

// Byte-for-byte equality of two stores (same spaces, layouts and bits).
bool params_identical(const ParamStore& a, const ParamStore& b);

} // namespace taskforge
