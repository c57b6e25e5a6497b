// Stage records: the on-disk handoff between pipeline stages. A record is one
// file -- a single JSON header line describing the typed binary blocks that
// follow -- written atomically (temp file + rename) and carrying no
// timestamps, so an unchanged campaign rewrites every record byte for byte.
// Lineage is enforced by content hashing: each stage stores the hashes of the
// parent files it read, and downstream loads re-hash those files and refuse
// to run on a mismatch.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace strat {

// FNV-1a, 64-bit. Not cryptographic; it only has to notice that a file
// changed, and it keeps records free of library dependencies.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hash_hex(std::uint64_t h);

// Hash of a file's raw bytes, as stored in child records' parent maps.
// Throws std::runtime_error if the file cannot be read.
std::string file_hash_hex(const std::string& path);

struct Record {
  std::string stage;                           // "phase1", "prelim", ...
  std::string config_hash;                     // hex of CampaignConfig::hash()
  std::map<std::string, std::string> parents;  // stage name -> parent file hash

  // Small scalar facts (counts, modes, seeds) as stringified values; bulk
  // numeric payloads go in the typed blocks below.
  std::map<std::string, std::string> meta;

  std::map<std::string, std::vector<double>> f64;
  std::map<std::string, std::vector<std::int64_t>> i64;
  std::map<std::string, std::vector<std::uint8_t>> u8;

  // Typed meta readers; missing key or malformed value throws
  // std::runtime_error naming the key.
  std::int64_t meta_int(const std::string& key) const;
  double meta_double(const std::string& key) const;
  const std::string& meta_str(const std::string& key) const;

  // Block readers that throw std::runtime_error on a missing name.
  const std::vector<double>& get_f64(const std::string& name) const;
  const std::vector<std::int64_t>& get_i64(const std::string& name) const;
  const std::vector<std::uint8_t>& get_u8(const std::string& name) const;
};

// Serialize to the exact file bytes / parse them back. Blocks are stored
// little-endian in kind-then-name order; the header JSON has sorted keys.
// Round-tripping is exact, including NaN and infinity payload bits.
std::string encode_record(const Record& rec);
Record decode_record(std::string_view bytes, const std::string& origin = "<memory>");

// Atomic write: encode to <path>.tmp in the same directory, then rename.
void write_record(const std::string& path, const Record& rec);

// Load and decode. expected_stage mismatch or an unreadable/corrupt file
// raises stage_order_error telling the user which stage to run first.
Record load_record(const std::string& path, const std::string& expected_stage);

}  // namespace strat
