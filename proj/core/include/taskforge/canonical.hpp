#pragma once

#include <cstdint>
#include <string>

#include "taskforge/diagram.hpp"

namespace taskforge {

// Canonical textual encoding of a diagram: stable under node renaming and
// node reordering (hence under the re-layerings those induce), sensitive to
// anything semantic (boxes, wiring, interfaces, constants, function args).
// Expects a structurally valid diagram.
std::string canonical_form(const Diagram& d);

std::uint64_t canonical_hash(const Diagram& d);

// FNV-1a over bytes; shared by the proof checker for equation hashing.
std::uint64_t fnv1a(const std::string& s);

} // namespace taskforge
