#pragma once

#include <string>
#include <string_view>

namespace sdoh {

// FIPS 180-4 SHA-256, hex-encoded. Used for content addressing in the replay
// store and for run-manifest provenance hashes.
std::string sha256_hex(std::string_view data);

}  // namespace sdoh
