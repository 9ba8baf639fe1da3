#pragma once

// Triplet corpora: ingestion (JSONL / CSV), validation, rating binning,
// class vocabularies and seeded splits.
//
// Texts are stored exactly as they appear in the source record. Nothing is
// trimmed, case-folded or normalized here.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmqe/binary_io.hpp"
#include "cmqe/error.hpp"
#include "cmqe/random.hpp"

namespace cmqe {

// Class labels are numeric so that MSE is defined on them. Ratings bin to the
// integers 1..10; disagreement values are used as observed.
using Label = double;

enum class LabelKind { rating, disagreement, unlabeled };
enum class CorpusFormat { jsonl, csv };

struct Instance {
  std::string id;
  std::string english;
  std::string hindi;
  std::string hinglish;
  std::optional<double> rating_avg;
  std::optional<double> disagreement;
};

struct Corpus {
  std::vector<Instance> instances;
  std::string source_path;
  LabelKind label_kind = LabelKind::unlabeled;
  CorpusFormat format = CorpusFormat::jsonl;
  // Source text of each record (without its line terminator), parallel to
  // `instances`. Used to write split files that reproduce input records.
  std::vector<std::string> raw_records;
  // CSV header line, kept so split outputs stay loadable.
  std::string csv_header;

  std::size_t size() const noexcept { return instances.size(); }
  bool empty() const noexcept { return instances.empty(); }
};

struct SplitSpec {
  std::array<double, 3> ratios{0.7, 0.1, 0.2};
  std::uint64_t seed = 42;
};

inline constexpr double kMinRating = 1.0;
inline constexpr double kMaxRating = 10.0;

inline std::string_view to_string(LabelKind kind) {
  switch (kind) {
    case LabelKind::rating: return "rating";
    case LabelKind::disagreement: return "disagreement";
    case LabelKind::unlabeled: return "unlabeled";
  }
  return "?";
}

namespace detail {

inline bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  });
}

inline bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // overlong forms, surrogates, out of range
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
      return false;
    }
    i += len;
  }
  return true;
}

inline std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

// Structural and bound checks shared by both formats.
inline void validate_instance(const Instance& inst, LabelKind kind,
                              const std::filesystem::path& path, std::size_t line) {
  const auto ctx = [&] { return where(path, line) + ": record '" + inst.id + "'"; };
  if (inst.id.empty()) throw DataError(where(path, line) + ": empty id");
  const std::array<std::pair<const char*, const std::string*>, 3> texts{
      {{"english", &inst.english}, {"hindi", &inst.hindi}, {"hinglish", &inst.hinglish}}};
  for (const auto& [name, text] : texts) {
    if (is_blank(*text)) throw DataError(ctx() + ": empty " + name + " text");
    if (!valid_utf8(*text)) throw DataError(ctx() + ": " + name + " text is not valid UTF-8");
  }
  if (inst.rating_avg) {
    const double r = *inst.rating_avg;
    if (!std::isfinite(r) || r < kMinRating || r > kMaxRating) {
      throw DataError(ctx() + ": rating_avg " + std::to_string(r) + " outside [1, 10]");
    }
  }
  if (inst.disagreement) {
    const double d = *inst.disagreement;
    if (!std::isfinite(d) || d < 0.0) {
      throw DataError(ctx() + ": disagreement must be a non-negative number");
    }
  }
  if (kind == LabelKind::rating && !inst.rating_avg) {
    throw DataError("no labels for subtask A: " + ctx() + " has no rating_avg");
  }
  if (kind == LabelKind::disagreement && !inst.disagreement) {
    throw DataError("no labels for subtask B: " + ctx() + " has no disagreement");
  }
}

inline std::optional<double> json_number(const nlohmann::json& obj, const char* key,
                                         const std::filesystem::path& path, std::size_t line) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw DataError(where(path, line) + ": field '" + key + "' is not a number");
  return it->get<double>();
}

inline std::string json_text(const nlohmann::json& obj, const char* key,
                             const std::filesystem::path& path, std::size_t line) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw DataError(where(path, line) + ": missing field '" + key + "'");
  if (!it->is_string()) throw DataError(where(path, line) + ": field '" + key + "' is not a string");
  return it->get<std::string>();
}

struct CsvRecord {
  std::vector<std::string> fields;
  std::string raw;
  std::size_t line = 0;
};

// RFC 4180 records: comma separated, double-quoted fields may contain commas,
// quotes ("") and line breaks. Accepts LF or CRLF terminators.
inline std::vector<CsvRecord> parse_csv(std::string_view text, const std::filesystem::path& path) {
  std::vector<CsvRecord> records;
  std::size_t i = 0;
  std::size_t line = 1;
  while (i < text.size()) {
    CsvRecord rec;
    rec.line = line;
    const std::size_t start = i;
    std::string field;
    bool quoted = false;
    bool after_quote = false;
    bool done = false;
    while (!done) {
      if (i == text.size()) {
        if (quoted) throw DataError(where(path, rec.line) + ": unterminated quoted field");
        rec.fields.push_back(std::move(field));
        rec.raw = std::string(text.substr(start, i - start));
        done = true;
        break;
      }
      const char c = text[i];
      if (quoted) {
        if (c == '"') {
          if (i + 1 < text.size() && text[i + 1] == '"') {
            field.push_back('"');
            i += 2;
          } else {
            quoted = false;
            after_quote = true;
            ++i;
          }
        } else {
          if (c == '\n') ++line;
          field.push_back(c);
          ++i;
        }
        continue;
      }
      if (c == ',') {
        rec.fields.push_back(std::move(field));
        field.clear();
        after_quote = false;
        ++i;
      } else if (c == '\n' || (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n')) {
        rec.raw = std::string(text.substr(start, i - start));
        rec.fields.push_back(std::move(field));
        i += (c == '\r') ? 2 : 1;
        ++line;
        done = true;
      } else if (c == '"' && field.empty() && !after_quote) {
        quoted = true;
        ++i;
      } else {
        if (after_quote) {
          throw DataError(where(path, rec.line) + ": characters after closing quote");
        }
        field.push_back(c);
        ++i;
      }
    }
    if (rec.fields.size() == 1 && rec.fields[0].empty() && rec.raw.empty()) continue;  // blank line
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::optional<double> csv_number(const std::string& field, const char* key,
                                        const std::filesystem::path& path, std::size_t line) {
  if (field.empty()) return std::nullopt;
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw DataError(where(path, line) + ": field '" + key + "' is not a number: '" + field + "'");
  }
  return value;
}

}  // namespace detail

inline Corpus load_corpus_from_string(std::string_view text, CorpusFormat format, LabelKind kind,
                                      const std::filesystem::path& source = "<memory>") {
  Corpus corpus;
  corpus.source_path = source.string();
  corpus.label_kind = kind;
  corpus.format = format;
  std::unordered_set<std::string> seen;

  const auto add = [&](Instance inst, std::string raw, std::size_t line) {
    detail::validate_instance(inst, kind, source, line);
    if (!seen.insert(inst.id).second) {
      throw DataError(detail::where(source, line) + ": duplicate id '" + inst.id + "'");
    }
    corpus.instances.push_back(std::move(inst));
    corpus.raw_records.push_back(std::move(raw));
  };

  if (format == CorpusFormat::jsonl) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      std::string_view line = text.substr(pos, end - pos);
      pos = end + 1;
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (detail::is_blank(line)) continue;
      nlohmann::json obj;
      try {
        obj = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw DataError(detail::where(source, line_no) + ": invalid JSON: " + e.what());
      }
      if (!obj.is_object()) throw DataError(detail::where(source, line_no) + ": record is not an object");
      Instance inst;
      inst.id = detail::json_text(obj, "id", source, line_no);
      inst.english = detail::json_text(obj, "english", source, line_no);
      inst.hindi = detail::json_text(obj, "hindi", source, line_no);
      inst.hinglish = detail::json_text(obj, "hinglish", source, line_no);
      inst.rating_avg = detail::json_number(obj, "rating_avg", source, line_no);
      inst.disagreement = detail::json_number(obj, "disagreement", source, line_no);
      add(std::move(inst), std::string(line), line_no);
    }
    return corpus;
  }

  if (!detail::valid_utf8(text)) throw DataError(source.string() + ": file is not valid UTF-8");
  auto records = detail::parse_csv(text, source);
  if (records.empty()) return corpus;
  const auto& header = records.front().fields;
  corpus.csv_header = records.front().raw;
  const auto column = [&](const char* name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto required = [&](const char* name) {
    auto c = column(name);
    if (!c) throw DataError(detail::where(source, 1) + ": header lacks column '" + name + "'");
    return *c;
  };
  const std::size_t c_id = required("id");
  const std::size_t c_en = required("english");
  const std::size_t c_hi = required("hindi");
  const std::size_t c_cm = required("hinglish");
  const auto c_rating = column("rating_avg");
  const auto c_dis = column("disagreement");
  for (std::size_t r = 1; r < records.size(); ++r) {
    auto& rec = records[r];
    if (rec.fields.size() != header.size()) {
      throw DataError(detail::where(source, rec.line) + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(rec.fields.size()));
    }
    Instance inst;
    inst.id = rec.fields[c_id];
    inst.english = rec.fields[c_en];
    inst.hindi = rec.fields[c_hi];
    inst.hinglish = rec.fields[c_cm];
    if (c_rating) inst.rating_avg = detail::csv_number(rec.fields[*c_rating], "rating_avg", source, rec.line);
    if (c_dis) inst.disagreement = detail::csv_number(rec.fields[*c_dis], "disagreement", source, rec.line);
    add(std::move(inst), std::move(rec.raw), rec.line);
  }
  return corpus;
}

inline Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format, LabelKind kind) {
  return load_corpus_from_string(io::read_file(path), format, kind, path);
}

// Picks the format from the file extension: ".csv" is CSV, anything else JSONL.
inline CorpusFormat format_for_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv" ? CorpusFormat::csv : CorpusFormat::jsonl;
}

// Re-emits the records of `corpus` in its source format, byte-for-byte per
// record, one record per line (with a header line for CSV).
inline std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  if (corpus.format == CorpusFormat::csv) {
    out += corpus.csv_header;
    out += '\n';
  }
  for (const auto& raw : corpus.raw_records) {
    out += raw;
    out += '\n';
  }
  return out;
}

inline void validate(const SplitSpec& spec) {
  double sum = 0.0;
  for (double r : spec.ratios) {
    if (!(r > 0.0) || !std::isfinite(r)) throw UsageError("split ratios must all be positive");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw UsageError("split ratios must sum to 1");
}

// floor(n * r) for train and validation, remainder to test. The 1e-9 slack
// keeps products such as 100 * 0.29 (28.999999999999996 in binary64) on the
// integer they denote.
inline std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitSpec& spec) {
  validate(spec);
  const auto part = [n](double r) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * r + 1e-9));
  };
  const std::size_t train = std::min(part(spec.ratios[0]), n);
  const std::size_t val = std::min(part(spec.ratios[1]), n - train);
  return {train, val, n - train - val};
}

inline std::tuple<Corpus, Corpus, Corpus> split_corpus(const Corpus& corpus, const SplitSpec& spec) {
  if (corpus.empty()) throw DataError("cannot split an empty corpus");
  const auto sizes = split_sizes(corpus.size(), spec);
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  seeded_shuffle(std::span<std::size_t>(order), spec.seed);

  std::array<Corpus, 3> parts;
  std::size_t cursor = 0;
  for (std::size_t p = 0; p < 3; ++p) {
    auto& part = parts[p];
    part.source_path = corpus.source_path;
    part.label_kind = corpus.label_kind;
    part.format = corpus.format;
    part.csv_header = corpus.csv_header;
    for (std::size_t k = 0; k < sizes[p]; ++k, ++cursor) {
      const std::size_t src = order[cursor];
      part.instances.push_back(corpus.instances[src]);
      if (src < corpus.raw_records.size()) part.raw_records.push_back(corpus.raw_records[src]);
    }
  }
  return {std::move(parts[0]), std::move(parts[1]), std::move(parts[2])};
}

// Round half away from zero, clamped to the 1..10 scale.
inline int bin_rating(double rating_avg) {
  if (!std::isfinite(rating_avg) || rating_avg < kMinRating || rating_avg > kMaxRating) {
    throw DataError("rating " + std::to_string(rating_avg) + " outside [1, 10]");
  }
  const double rounded = std::round(rating_avg);
  return static_cast<int>(std::clamp(rounded, kMinRating, kMaxRating));
}

// Sorted distinct labels. The position of a label in the result is its class
// index everywhere else in the pipeline.
inline std::vector<Label> class_vocabulary(std::span<const Label> labels) {
  if (labels.empty()) throw DataError("class vocabulary of an empty label list");
  std::vector<Label> vocab(labels.begin(), labels.end());
  std::sort(vocab.begin(), vocab.end());
  vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
  return vocab;
}

// Target labels of a corpus for the given kind; rating labels are binned.
inline std::vector<Label> corpus_labels(const Corpus& corpus, LabelKind kind) {
  std::vector<Label> labels;
  labels.reserve(corpus.size());
  for (const auto& inst : corpus.instances) {
    if (kind == LabelKind::rating) {
      if (!inst.rating_avg) throw DataError("no labels for subtask A: record '" + inst.id + "' has no rating_avg");
      labels.push_back(bin_rating(*inst.rating_avg));
    } else if (kind == LabelKind::disagreement) {
      if (!inst.disagreement) {
        throw DataError("no labels for subtask B: record '" + inst.id + "' has no disagreement");
      }
      labels.push_back(*inst.disagreement);
    } else {
      throw UsageError("unlabeled corpora have no target labels");
    }
  }
  return labels;
}

}  // namespace cmqe
