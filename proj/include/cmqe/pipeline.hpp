#pragma once

// The batch commands behind the cmqe tool: split, encode, train, predict,
// evaluate. Each throws UsageError for bad configuration and DataError for
// bad inputs; the tool maps those to exit codes 2 and 1.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#include <nlohmann/json.hpp>

#include "cmqe/binary_io.hpp"
#include "cmqe/corpus.hpp"
#include "cmqe/embedding.hpp"
#include "cmqe/embedding_cache.hpp"
#include "cmqe/feature_matrix.hpp"
#include "cmqe/gbdt.hpp"
#include "cmqe/metrics.hpp"
#include "cmqe/model_io.hpp"
#include "cmqe/report.hpp"

namespace cmqe {

namespace fs = std::filesystem;

enum class Channel { english = 0, hindi = 1, hinglish = 2 };
inline constexpr std::array<Channel, 3> kChannels{Channel::english, Channel::hindi, Channel::hinglish};

inline std::string_view to_string(Channel c) {
  switch (c) {
    case Channel::english: return "english";
    case Channel::hindi: return "hindi";
    case Channel::hinglish: return "hinglish";
  }
  return "?";
}

inline Channel parse_channel(std::string_view s) {
  for (auto c : kChannels) {
    if (to_string(c) == s) return c;
  }
  throw UsageError("unknown channel '" + std::string(s) + "' (expected english, hindi or hinglish)");
}

inline const std::string& channel_text(const Instance& inst, Channel c) {
  switch (c) {
    case Channel::english: return inst.english;
    case Channel::hindi: return inst.hindi;
    case Channel::hinglish: return inst.hinglish;
  }
  return inst.hinglish;
}

inline Subtask parse_subtask(std::string_view s) {
  if (s == "A" || s == "a") return Subtask::A;
  if (s == "B" || s == "b") return Subtask::B;
  throw UsageError("unknown subtask '" + std::string(s) + "' (expected A or B)");
}

inline LabelKind label_kind_for(Subtask s) { return s == Subtask::A ? LabelKind::rating : LabelKind::disagreement; }

// Where a channel's token embeddings come from.
struct EncoderSource {
  enum class Kind { reference, cache };
  Kind kind = Kind::reference;
  fs::path cache_path;
  std::size_t dim = 0;  // reference only; 0 means "use the default"

  std::string describe() const {
    return kind == Kind::reference ? "reference" : "cache:" + cache_path.string();
  }
};

// "reference" or "cache:<path>".
inline EncoderSource parse_encoder_source(std::string_view spec) {
  EncoderSource src;
  if (spec == "reference") return src;
  if (spec.starts_with("cache:") && spec.size() > 6) {
    src.kind = EncoderSource::Kind::cache;
    src.cache_path = fs::path(std::string(spec.substr(6)));
    return src;
  }
  throw UsageError("encoder must be 'reference' or 'cache:<path>', got '" + std::string(spec) + "'");
}

inline constexpr std::size_t kDefaultEmbeddingDim = 768;

struct RunConfig {
  // Either train_path, or corpus_path plus split (the train part is used).
  fs::path train_path;
  fs::path val_path;
  fs::path corpus_path;
  std::optional<SplitSpec> split;
  std::array<EncoderSource, 3> encoders{};
  TrainConfig train;
  Subtask subtask = Subtask::A;
  fs::path output_dir = "out";
  std::uint64_t seed = 42;
  unsigned threads = 0;
};

// ---------------------------------------------------------------------------
// Hashing and manifests

inline std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw DataError("SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// ---------------------------------------------------------------------------
// Features

namespace detail {

inline void require_file(const fs::path& p, const char* what) {
  if (p.empty()) throw UsageError(std::string(what) + " path is required");
  if (!fs::is_regular_file(p)) throw UsageError(std::string(what) + " '" + p.string() + "' does not exist");
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  const unsigned workers = detail::resolve_threads(threads, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = n * w / workers; i < n * (w + 1) / workers; ++i) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

// Pooled-and-concatenated features for every instance, in corpus order.
inline FeatureMatrix build_features(const Corpus& corpus, const std::array<EncoderSource, 3>& encoders,
                                    std::uint64_t seed, unsigned threads = 0) {
  if (corpus.empty()) throw DataError("corpus '" + corpus.source_path + "' has no instances");
  std::map<fs::path, EmbeddingCache> caches;
  for (const auto& e : encoders) {
    if (e.kind == EncoderSource::Kind::cache && !caches.contains(e.cache_path)) {
      detail::require_file(e.cache_path, "embedding cache");
      caches.emplace(e.cache_path, read_embedding_cache(e.cache_path));
    }
  }

  std::vector<std::string> missing;
  for (std::size_t c = 0; c < 3; ++c) {
    if (encoders[c].kind != EncoderSource::Kind::cache) continue;
    const auto& cache = caches.at(encoders[c].cache_path);
    for (const auto& inst : corpus.instances) {
      if (!cache.find(inst.id)) missing.push_back(std::string(to_string(kChannels[c])) + ":" + inst.id);
    }
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " instance embeddings missing from cache:";
    for (std::size_t i = 0; i < missing.size() && i < 50; ++i) msg += " " + missing[i];
    if (missing.size() > 50) msg += " ...";
    throw DataError(msg);
  }

  std::vector<FeatureVector> rows(corpus.size());
  detail::parallel_for(corpus.size(), threads, [&](std::size_t i) {
    const auto& inst = corpus.instances[i];
    std::array<PooledEmbedding, 3> pooled;
    for (std::size_t c = 0; c < 3; ++c) {
      const auto& enc = encoders[c];
      if (enc.kind == EncoderSource::Kind::reference) {
        const std::size_t dim = enc.dim == 0 ? kDefaultEmbeddingDim : enc.dim;
        pooled[c] = mean_pool(encode_reference(channel_text(inst, kChannels[c]), dim, seed, inst.id));
      } else {
        pooled[c] = mean_pool(*caches.at(enc.cache_path).find(inst.id));
      }
    }
    rows[i] = assemble_features(pooled[0], pooled[1], pooled[2], inst.id);
  });
  return FeatureMatrix::from_rows(rows);
}

// ---------------------------------------------------------------------------
// split

struct SplitOutputs {
  std::array<fs::path, 3> paths;
  std::array<std::size_t, 3> sizes{};
};

inline SplitOutputs cmd_split(const fs::path& corpus_path, const SplitSpec& spec, const fs::path& outdir) {
  validate(spec);
  detail::require_file(corpus_path, "corpus");
  const auto format = format_for_path(corpus_path);
  const auto corpus = load_corpus(corpus_path, format, LabelKind::unlabeled);
  auto [train, val, test] = split_corpus(corpus, spec);
  fs::create_directories(outdir);
  const std::string ext = format == CorpusFormat::csv ? ".csv" : ".jsonl";
  SplitOutputs out;
  const std::array<const Corpus*, 3> parts{&train, &val, &test};
  const std::array<const char*, 3> names{"train", "val", "test"};
  for (std::size_t p = 0; p < 3; ++p) {
    out.paths[p] = outdir / (std::string(names[p]) + ext);
    out.sizes[p] = parts[p]->size();
    io::write_file(out.paths[p], serialize_corpus(*parts[p]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// encode: reference token embeddings for one channel, written as a cache.

inline std::size_t cmd_encode(const fs::path& corpus_path, Channel channel, std::size_t dim, std::uint64_t seed,
                              const fs::path& out_path, unsigned threads = 0) {
  detail::require_file(corpus_path, "corpus");
  if (dim < kMinReferenceDim) throw UsageError("dim must be at least " + std::to_string(kMinReferenceDim));
  const auto corpus = load_corpus(corpus_path, format_for_path(corpus_path), LabelKind::unlabeled);
  if (corpus.empty()) throw DataError("corpus '" + corpus_path.string() + "' has no instances");
  std::vector<TokenEmbeddingSequence> seqs(corpus.size());
  detail::parallel_for(corpus.size(), threads, [&](std::size_t i) {
    const auto& inst = corpus.instances[i];
    seqs[i] = encode_reference(channel_text(inst, channel), dim, seed, inst.id);
  });
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_embedding_cache(out_path, seqs);
  return seqs.size();
}

// ---------------------------------------------------------------------------
// train

struct TrainOutputs {
  fs::path model_path;
  fs::path manifest_path;
  fs::path log_path;
  BoostedEnsemble model;
};

inline void validate(const RunConfig& cfg) {
  validate(cfg.train);
  if (cfg.train_path.empty() == cfg.corpus_path.empty()) {
    throw UsageError("give exactly one of a training corpus or a corpus to split");
  }
  if (!cfg.corpus_path.empty() && !cfg.split) throw UsageError("a corpus to split needs split ratios");
  if (cfg.split) validate(*cfg.split);
  detail::require_file(cfg.train_path.empty() ? cfg.corpus_path : cfg.train_path, "training corpus");
  if (!cfg.val_path.empty()) detail::require_file(cfg.val_path, "validation corpus");
  for (const auto& e : cfg.encoders) {
    if (e.kind == EncoderSource::Kind::cache) detail::require_file(e.cache_path, "embedding cache");
    if (e.kind == EncoderSource::Kind::reference && e.dim != 0 && e.dim < kMinReferenceDim) {
      throw UsageError("reference encoder dim must be at least " + std::to_string(kMinReferenceDim));
    }
  }
}

inline nlohmann::ordered_json config_to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["subtask"] = std::string(to_string(cfg.subtask));
  j["seed"] = cfg.seed;
  if (!cfg.train_path.empty()) j["train"] = cfg.train_path.string();
  if (!cfg.corpus_path.empty()) j["corpus"] = cfg.corpus_path.string();
  if (cfg.split) j["split"] = {{"ratios", cfg.split->ratios}, {"seed", cfg.split->seed}};
  if (!cfg.val_path.empty()) j["val"] = cfg.val_path.string();
  auto& enc = j["encoders"];
  for (std::size_t c = 0; c < 3; ++c) {
    nlohmann::ordered_json e;
    e["source"] = cfg.encoders[c].describe();
    if (cfg.encoders[c].kind == EncoderSource::Kind::reference) {
      e["dim"] = cfg.encoders[c].dim == 0 ? kDefaultEmbeddingDim : cfg.encoders[c].dim;
    }
    enc[std::string(to_string(kChannels[c]))] = std::move(e);
  }
  const auto& t = cfg.train;
  j["gbdt"] = {{"iterations", t.iterations},         {"learning_rate", t.learning_rate},
               {"max_depth", t.max_depth},           {"min_samples_leaf", t.min_samples_leaf},
               {"l2_leaf_reg", t.l2_leaf_reg},       {"seed", t.seed}};
  return j;
}

inline TrainOutputs cmd_train(const RunConfig& cfg) {
  validate(cfg);
  const LabelKind kind = label_kind_for(cfg.subtask);
  std::vector<fs::path> inputs;
  Corpus train;
  if (!cfg.train_path.empty()) {
    train = load_corpus(cfg.train_path, format_for_path(cfg.train_path), kind);
    inputs.push_back(cfg.train_path);
  } else {
    auto full = load_corpus(cfg.corpus_path, format_for_path(cfg.corpus_path), kind);
    train = std::get<0>(split_corpus(full, *cfg.split));
    inputs.push_back(cfg.corpus_path);
  }
  if (train.empty()) throw DataError("training corpus has no instances");
  const auto labels = corpus_labels(train, kind);
  const auto features = build_features(train, cfg.encoders, cfg.seed, cfg.threads);

  std::vector<IterationLog> log;
  FitOptions options;
  options.threads = cfg.threads;
  options.on_iteration = [&log](const IterationLog& entry) { log.push_back(entry); };
  TrainOutputs out;
  out.model = fit(features, labels, cfg.train, options);

  fs::create_directories(cfg.output_dir);
  out.model_path = cfg.output_dir / "model.cmqm";
  out.log_path = cfg.output_dir / "train_log.tsv";
  out.manifest_path = cfg.output_dir / "manifest.json";
  save_model(out.model, out.model_path);

  std::string log_text = "iteration\ttrain_logloss\n";
  for (const auto& e : log) log_text += std::to_string(e.iteration) + "\t" + format_number(e.train_logloss) + "\n";

  nlohmann::ordered_json manifest;
  manifest["command"] = "train";
  manifest["created_utc"] = utc_timestamp();
  manifest["config"] = config_to_json(cfg);
  manifest["train_instances"] = train.size();
  manifest["classes"] = out.model.class_labels;
  manifest["feature_dim"] = out.model.feature_dim;

  if (!cfg.val_path.empty()) {
    const auto val = load_corpus(cfg.val_path, format_for_path(cfg.val_path), kind);
    const auto val_labels = corpus_labels(val, kind);
    const auto val_x = build_features(val, cfg.encoders, cfg.seed, cfg.threads);
    std::vector<Label> preds(val.size());
    double val_logloss = 0.0;
    for (std::size_t i = 0; i < val.size(); ++i) {
      const auto p = predict_proba(out.model, val_x.row(i));
      preds[i] = out.model.class_labels[argmax_index(p)];
      const auto it = std::find(out.model.class_labels.begin(), out.model.class_labels.end(), val_labels[i]);
      const double p_true = it == out.model.class_labels.end()
                                ? std::numeric_limits<double>::min()
                                : p[static_cast<std::size_t>(it - out.model.class_labels.begin())];
      val_logloss -= std::log(p_true);
    }
    val_logloss /= static_cast<double>(val.size());
    const auto report = evaluate(val_labels, preds, cfg.subtask);
    manifest["validation"] = {{"instances", val.size()}, {"logloss", val_logloss}, {"report", report_to_json(report)}};
    log_text += "# validation\tlogloss=" + format_number(val_logloss) + "\tf1_weighted=" +
                format_fixed5(report.f1_weighted) + "\n";
    inputs.push_back(cfg.val_path);
  }

  for (const auto& e : cfg.encoders) {
    if (e.kind == EncoderSource::Kind::cache &&
        std::find(inputs.begin(), inputs.end(), e.cache_path) == inputs.end()) {
      inputs.push_back(e.cache_path);
    }
  }
  auto& hashes = manifest["inputs"];
  hashes = nlohmann::ordered_json::array();
  for (const auto& p : inputs) {
    const auto bytes = io::read_file(p);
    hashes.push_back({{"path", p.string()}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
  }
  manifest["outputs"] = {{"model", out.model_path.string()}, {"model_sha256", sha256_hex(io::read_file(out.model_path))}};

  io::write_file(out.log_path, log_text);
  io::write_file(out.manifest_path, manifest.dump(2) + "\n");
  return out;
}

// ---------------------------------------------------------------------------
// predict
//
// Predictions file: a header line, then one line per instance in corpus order:
//   id<TAB>label<TAB>p1,...,pK
// with probabilities in class-label order, as listed in the header.

struct Prediction {
  std::string id;
  Label label = 0.0;
  std::vector<double> probabilities;
};

inline std::string predictions_header(const BoostedEnsemble& model) {
  std::string h = "id\tlabel\t";
  for (std::size_t k = 0; k < model.num_classes(); ++k) {
    if (k) h += ',';
    h += "p_" + format_number(model.class_labels[k]);
  }
  return h;
}

inline std::string format_predictions(const BoostedEnsemble& model, std::span<const Prediction> preds) {
  std::string out = predictions_header(model) + "\n";
  for (const auto& p : preds) {
    out += p.id + "\t" + format_number(p.label) + "\t";
    for (std::size_t k = 0; k < p.probabilities.size(); ++k) {
      if (k) out += ',';
      out += format_number(p.probabilities[k]);
    }
    out += '\n';
  }
  return out;
}

// Encoders default to the reference encoder at the widths recorded in the model.
inline std::vector<Prediction> cmd_predict(const fs::path& model_path, const fs::path& corpus_path,
                                           const fs::path& out_path, std::array<EncoderSource, 3> encoders = {},
                                           std::uint64_t seed = 42, unsigned threads = 0) {
  detail::require_file(model_path, "model");
  detail::require_file(corpus_path, "corpus");
  const auto model = load_model(model_path);
  for (std::size_t c = 0; c < 3; ++c) {
    if (encoders[c].kind == EncoderSource::Kind::reference && encoders[c].dim == 0) {
      encoders[c].dim = model.segment_dims[c] != 0 ? model.segment_dims[c] : kDefaultEmbeddingDim;
    }
  }
  const auto corpus = load_corpus(corpus_path, format_for_path(corpus_path), LabelKind::unlabeled);
  if (corpus.empty()) throw DataError("corpus '" + corpus_path.string() + "' has no instances");
  const auto x = build_features(corpus, encoders, seed, threads);
  if (x.cols() != model.feature_dim) {
    throw DataError("feature dim mismatch: model expects " + std::to_string(model.feature_dim) + ", corpus gives " +
                    std::to_string(x.cols()));
  }
  const auto seg_sum = model.segment_dims[0] + model.segment_dims[1] + model.segment_dims[2];
  if (seg_sum != 0 && x.segment_dims() != model.segment_dims) {
    const auto fmt = [](const std::array<std::size_t, 3>& d) {
      return std::to_string(d[0]) + "/" + std::to_string(d[1]) + "/" + std::to_string(d[2]);
    };
    throw DataError("channel dims mismatch: model expects " + fmt(model.segment_dims) + ", corpus gives " +
                    fmt(x.segment_dims()));
  }
  std::vector<Prediction> preds(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto& p = preds[i];
    p.id = corpus.instances[i].id;
    p.probabilities = predict_proba(model, x.row(i));
    p.label = model.class_labels[argmax_index(p.probabilities)];
  }
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  io::write_file(out_path, format_predictions(model, preds));
  return preds;
}

// Reads (id, label) pairs from a predictions file.
inline std::vector<std::pair<std::string, Label>> read_predictions(const fs::path& path) {
  const auto text = io::read_file(path);
  std::vector<std::pair<std::string, Label>> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1) {
      if (!line.starts_with("id\tlabel")) throw DataError(path.string() + ": missing predictions header");
      continue;
    }
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t1 == std::string_view::npos) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected id<TAB>label<TAB>probabilities");
    }
    const auto label_text = line.substr(t1 + 1, t2 == std::string_view::npos ? std::string_view::npos : t2 - t1 - 1);
    try {
      out.emplace_back(std::string(line.substr(0, t1)), parse_label(label_text));
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOutputs {
  EvaluationReport report;
  fs::path text_path;
  fs::path json_path;
};

// Gold and prediction rows must carry the same ids in the same order.
inline EvaluateOutputs cmd_evaluate(const fs::path& golds_path, const fs::path& preds_path, Subtask subtask,
                                    const fs::path& outdir, std::ostream* console = nullptr) {
  detail::require_file(golds_path, "gold corpus");
  detail::require_file(preds_path, "predictions");
  const LabelKind kind = label_kind_for(subtask);
  const auto gold = load_corpus(golds_path, format_for_path(golds_path), kind);
  const auto golds = corpus_labels(gold, kind);
  const auto preds = read_predictions(preds_path);
  const std::size_t common = std::min(gold.size(), preds.size());
  for (std::size_t i = 0; i < common; ++i) {
    if (gold.instances[i].id != preds[i].first) {
      throw DataError("id mismatch at row " + std::to_string(i + 1) + ": gold '" + gold.instances[i].id +
                      "' vs prediction '" + preds[i].first + "'");
    }
  }
  if (gold.size() != preds.size()) {
    const std::string first = gold.size() > preds.size() ? gold.instances[common].id : preds[common].first;
    throw DataError("id mismatch: gold has " + std::to_string(gold.size()) + " rows, predictions " +
                    std::to_string(preds.size()) + "; first unmatched id '" + first + "'");
  }
  std::vector<Label> predicted(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) predicted[i] = preds[i].second;

  EvaluateOutputs out;
  out.report = evaluate(golds, predicted, subtask);
  fs::create_directories(outdir);
  out.text_path = outdir / "report.txt";
  out.json_path = outdir / "report.json";
  io::write_file(out.text_path, report_to_text(out.report));
  io::write_file(out.json_path, report_to_json(out.report).dump(2) + "\n");
  if (console) *console << report_summary(out.report);
  return out;
}

}  // namespace cmqe
