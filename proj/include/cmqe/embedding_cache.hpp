#pragma once

// Token-level embedding cache files.
//
//   magic        "CMQE"            4 bytes
//   version      u16 = 1
//   dim          u32
//   record_count u64
//   record_count x {
//     id_len      u16
//     id          id_len bytes, UTF-8
//     token_count u32
//     values      token_count * dim binary32, row-major
//   }
//
// All integers and floats are little-endian. Values are stored as binary32,
// so writing narrows each double to float; a float read back widens exactly.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmqe/binary_io.hpp"
#include "cmqe/embedding.hpp"
#include "cmqe/error.hpp"

namespace cmqe {

inline constexpr std::string_view kCacheMagic = "CMQE";
inline constexpr std::uint16_t kCacheVersion = 1;

struct EmbeddingCache {
  std::size_t dim = 0;
  std::map<std::string, TokenEmbeddingSequence> entries;

  const TokenEmbeddingSequence* find(const std::string& id) const {
    const auto it = entries.find(id);
    return it == entries.end() ? nullptr : &it->second;
  }
};

// Records are written in the order given.
inline std::string encode_embedding_cache(std::span<const TokenEmbeddingSequence> entries) {
  if (entries.empty()) throw DataError("embedding cache needs at least one entry to fix its dim");
  const std::size_t dim = entries.front().dim();
  std::size_t payload = 0;
  for (const auto& e : entries) {
    if (e.dim() != dim) {
      throw DataError("sequence '" + e.sentence_id() + "' has dim " + std::to_string(e.dim()) +
                      ", cache dim is " + std::to_string(dim));
    }
    if (e.sentence_id().size() > std::numeric_limits<std::uint16_t>::max()) {
      throw DataError("sentence id longer than 65535 bytes");
    }
    if (e.token_count() == 0) throw DataError("sequence '" + e.sentence_id() + "' has no tokens");
    payload += 6 + e.sentence_id().size() + e.values().size() * 4;
  }
  if (dim > std::numeric_limits<std::uint32_t>::max()) throw DataError("cache dim exceeds u32");

  std::string out;
  out.reserve(18 + payload);
  io::append_bytes(out, kCacheMagic);
  io::append_le<std::uint16_t>(out, kCacheVersion);
  io::append_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  io::append_le<std::uint64_t>(out, entries.size());
  for (const auto& e : entries) {
    io::append_le<std::uint16_t>(out, static_cast<std::uint16_t>(e.sentence_id().size()));
    io::append_bytes(out, e.sentence_id());
    io::append_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.token_count()));
    for (double v : e.values()) io::append_le<float>(out, static_cast<float>(v));
  }
  return out;
}

inline EmbeddingCache decode_embedding_cache(std::string_view bytes) {
  io::Reader in(bytes);
  if (in.read_bytes(4, "magic") != kCacheMagic) {
    throw FormatError("bad magic, not an embedding cache", 0);
  }
  const auto version_at = in.offset();
  const auto version = in.read<std::uint16_t>("version");
  if (version != kCacheVersion) {
    throw FormatError("unsupported cache version " + std::to_string(version), version_at);
  }
  const auto dim_at = in.offset();
  const auto dim = in.read<std::uint32_t>("dim");
  if (dim == 0) throw FormatError("cache dim must be positive", dim_at);
  const auto count = in.read<std::uint64_t>("record_count");

  EmbeddingCache cache;
  cache.dim = dim;
  for (std::uint64_t r = 0; r < count; ++r) {
    const auto record_at = in.offset();
    const auto id_len = in.read<std::uint16_t>("id_len");
    std::string id(in.read_bytes(id_len, "record id"));
    const auto tokens_at = in.offset();
    const auto token_count = in.read<std::uint32_t>("token_count");
    if (token_count == 0) throw FormatError("record '" + id + "' has no tokens", tokens_at);
    const std::uint64_t n_values = static_cast<std::uint64_t>(token_count) * dim;
    if (n_values > in.remaining() / 4) {
      throw FormatError("truncated record '" + id + "': needs " + std::to_string(n_values * 4) +
                            " value bytes, " + std::to_string(in.remaining()) + " remain",
                        in.offset());
    }
    std::vector<double> values(static_cast<std::size_t>(n_values));
    for (auto& v : values) v = in.read<float>("token values");
    if (cache.entries.contains(id)) throw FormatError("duplicate record id '" + id + "'", record_at);
    auto key = id;
    cache.entries.emplace(std::move(key), TokenEmbeddingSequence(std::move(id), dim, std::move(values)));
  }
  if (!in.at_end()) {
    throw FormatError(std::to_string(in.remaining()) + " trailing bytes after " + std::to_string(count) +
                          " records",
                      in.offset());
  }
  return cache;
}

inline void write_embedding_cache(const std::filesystem::path& path,
                                  std::span<const TokenEmbeddingSequence> entries) {
  io::write_file(path, encode_embedding_cache(entries));
}

inline EmbeddingCache read_embedding_cache(const std::filesystem::path& path) {
  try {
    return decode_embedding_cache(io::read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.message(), e.offset());
  }
}

}  // namespace cmqe
