#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "pinneig/netcalc.hpp"

namespace pinneig {

// Parameter snapshot file: one line of JSON header
//   {"count":N,"format":"pinneig-mlp","seed":S,"version":1,"widths":[d,h1,h2,1]}
// followed by N little-endian IEEE-754 doubles in MlpParams flat order.
inline constexpr int kSnapshotVersion = 1;

struct Snapshot {
  MlpParams params;
  std::uint64_t seed = 0;
};

/// Serialised bytes of a snapshot (header line + payload).
std::string encode_snapshot(const MlpParams& params, std::uint64_t seed);
Snapshot decode_snapshot(const std::string& bytes);

/// Content address: 16 hex digits of the FNV-1a 64-bit hash of the encoded bytes.
std::string snapshot_id(const MlpParams& params, std::uint64_t seed);

/// Writes `<dir>/<id>.snap` atomically and returns the file name.
std::string write_snapshot(const std::filesystem::path& dir, const MlpParams& params, std::uint64_t seed);

/// Throws std::runtime_error naming the path when it is missing or malformed.
Snapshot read_snapshot(const std::filesystem::path& path);

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

std::string read_file(const std::filesystem::path& path);

}  // namespace pinneig
