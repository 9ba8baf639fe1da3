#pragma once

// Sentence vectors: token embedding sequences, mean pooling, the hashed
// character 3-gram reference encoder and triplet feature assembly.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "cmqe/error.hpp"

namespace cmqe {

// Token vectors for one sentence, stored row-major (token_count x dim).
class TokenEmbeddingSequence {
 public:
  TokenEmbeddingSequence() = default;
  TokenEmbeddingSequence(std::string sentence_id, std::size_t dim, std::vector<double> values)
      : sentence_id_(std::move(sentence_id)), dim_(dim), values_(std::move(values)) {
    if (dim_ == 0) throw DataError("embedding dim must be positive");
    if (values_.size() % dim_ != 0) {
      throw DataError("sequence '" + sentence_id_ + "': " + std::to_string(values_.size()) +
                      " values do not form whole tokens of dim " + std::to_string(dim_));
    }
  }

  const std::string& sentence_id() const noexcept { return sentence_id_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t token_count() const noexcept { return dim_ == 0 ? 0 : values_.size() / dim_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> token(std::size_t i) const noexcept {
    return std::span<const double>(values_).subspan(i * dim_, dim_);
  }

  void append_token(std::span<const double> v) {
    if (v.size() != dim_) throw DataError("token dim mismatch in '" + sentence_id_ + "'");
    values_.insert(values_.end(), v.begin(), v.end());
  }

  friend bool operator==(const TokenEmbeddingSequence&, const TokenEmbeddingSequence&) = default;

 private:
  std::string sentence_id_;
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

struct PooledEmbedding {
  std::string sentence_id;
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }
};

struct FeatureVector {
  std::string instance_id;
  std::vector<double> values;
  // English, Hindi, Hinglish
  std::array<std::size_t, 3> segment_dims{};
};

// Component-wise mean over every token of the sequence.
inline PooledEmbedding mean_pool(const TokenEmbeddingSequence& seq) {
  const std::size_t n = seq.token_count();
  if (n == 0) throw DataError("cannot pool sequence '" + seq.sentence_id() + "' with no tokens");
  const std::size_t dim = seq.dim();
  std::vector<double> sum(dim, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const auto tok = seq.token(t);
    for (std::size_t j = 0; j < dim; ++j) {
      if (!std::isfinite(tok[j])) {
        throw DataError("non-finite value in sequence '" + seq.sentence_id() + "' token " +
                        std::to_string(t) + " component " + std::to_string(j));
      }
      sum[j] += tok[j];
    }
  }
  const double count = static_cast<double>(n);
  for (double& v : sum) v /= count;
  return {seq.sentence_id(), std::move(sum)};
}

// English || Hindi || Hinglish.
inline FeatureVector assemble_features(const PooledEmbedding& english, const PooledEmbedding& hindi,
                                       const PooledEmbedding& hinglish, const std::string& instance_id) {
  for (const auto* u : {&english, &hindi, &hinglish}) {
    if (u->sentence_id != instance_id) {
      throw DataError("pooled embedding '" + u->sentence_id + "' does not belong to instance '" +
                      instance_id + "'");
    }
    if (u->values.empty()) throw DataError("empty pooled embedding for instance '" + instance_id + "'");
  }
  FeatureVector fv;
  fv.instance_id = instance_id;
  fv.segment_dims = {english.dim(), hindi.dim(), hinglish.dim()};
  fv.values.reserve(english.dim() + hindi.dim() + hinglish.dim());
  for (const auto* u : {&english, &hindi, &hinglish}) {
    fv.values.insert(fv.values.end(), u->values.begin(), u->values.end());
  }
  return fv;
}

// ---------------------------------------------------------------------------
// Reference encoder
//
// 1. NFC-normalize the text.
// 2. Split into tokens at Unicode White_Space code points.
// 3. Wrap each token as '<' token '>' and take every window of 3 code points.
// 4. Hash each 3-gram (UTF-8 bytes) with FNV-1a 64 seeded by the 8
//    little-endian bytes of the seed, then the splitmix64 finalizer. Bucket
//    = hash mod dim, sign = -1 if bit 63 is set else +1.
// 5. Sum the signed buckets and scale to unit Euclidean norm. If the 3-grams
//    cancel exactly, the token gets the single signed bucket obtained by
//    hashing the whole wrapped token the same way.
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMinReferenceDim = 8;

namespace detail {

inline std::uint64_t fnv1a_seeded(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](unsigned char b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>((seed >> (8 * i)) & 0xFF));
  for (char c : bytes) mix(static_cast<unsigned char>(c));
  return h;
}

inline std::uint64_t splitmix64_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct HashedFeature {
  std::size_t index;
  double sign;
};

inline HashedFeature hash_feature(std::string_view utf8, std::uint64_t seed, std::size_t dim) {
  const std::uint64_t h = splitmix64_finalize(fnv1a_seeded(utf8, seed));
  return {static_cast<std::size_t>(h % dim), (h >> 63) ? -1.0 : 1.0};
}

inline void append_utf8(std::string& out, UChar32 cp) {
  char buf[U8_MAX_LENGTH];
  int32_t len = 0;
  UBool error = false;
  U8_APPEND(reinterpret_cast<uint8_t*>(buf), len, U8_MAX_LENGTH, cp, error);
  if (error) throw DataError("cannot encode code point as UTF-8");
  out.append(buf, static_cast<std::size_t>(len));
}

// NFC normalization followed by White_Space tokenization; tokens as code points.
inline std::vector<std::vector<UChar32>> tokenize_nfc(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw DataError(std::string("ICU NFC unavailable: ") + u_errorName(status));
  const auto source = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  const icu::UnicodeString normalized = nfc->normalize(source, status);
  if (U_FAILURE(status)) throw DataError(std::string("NFC normalization failed: ") + u_errorName(status));

  std::vector<std::vector<UChar32>> tokens;
  std::vector<UChar32> current;
  for (int32_t i = 0; i < normalized.length();) {
    const UChar32 cp = normalized.char32At(i);
    i += U16_LENGTH(cp);
    if (u_isUWhiteSpace(cp)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(cp);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

}  // namespace detail

inline std::vector<double> encode_token(std::span<const UChar32> token, std::size_t dim, std::uint64_t seed) {
  std::vector<UChar32> wrapped;
  wrapped.reserve(token.size() + 2);
  wrapped.push_back(U'<');
  wrapped.insert(wrapped.end(), token.begin(), token.end());
  wrapped.push_back(U'>');

  std::vector<double> v(dim, 0.0);
  std::string gram;
  for (std::size_t i = 0; i + 3 <= wrapped.size(); ++i) {
    gram.clear();
    for (std::size_t k = 0; k < 3; ++k) detail::append_utf8(gram, wrapped[i + k]);
    const auto f = detail::hash_feature(gram, seed, dim);
    v[f.index] += f.sign;
  }
  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  if (norm2 == 0.0) {
    std::string whole;
    for (UChar32 cp : wrapped) detail::append_utf8(whole, cp);
    const auto f = detail::hash_feature(whole, seed, dim);
    v[f.index] = f.sign;
    return v;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

inline TokenEmbeddingSequence encode_reference(std::string_view text, std::size_t dim, std::uint64_t seed,
                                               std::string sentence_id = {}) {
  if (dim < kMinReferenceDim) {
    throw UsageError("reference encoder dim must be at least " + std::to_string(kMinReferenceDim));
  }
  const auto tokens = detail::tokenize_nfc(text);
  if (tokens.empty()) throw DataError("cannot encode empty or whitespace-only text");
  std::vector<double> values;
  values.reserve(tokens.size() * dim);
  for (const auto& tok : tokens) {
    const auto v = encode_token(tok, dim, seed);
    values.insert(values.end(), v.begin(), v.end());
  }
  return TokenEmbeddingSequence(std::move(sentence_id), dim, std::move(values));
}

}  // namespace cmqe
