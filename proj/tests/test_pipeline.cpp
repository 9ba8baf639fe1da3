#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <unistd.h>

#include <gtest/gtest.h>

#include "cmqe/pipeline.hpp"
#include "synthetic.hpp"

using namespace cmqe;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("cmqe_pipeline_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::vector<std::string> lines(const fs::path& p) {
  std::istringstream in(io::read_file(p));
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::array<EncoderSource, 3> reference_encoders(std::size_t dim) {
  std::array<EncoderSource, 3> e;
  for (auto& x : e) x.dim = dim;
  return e;
}

RunConfig small_run(const fs::path& train, const fs::path& out) {
  RunConfig cfg;
  cfg.train_path = train;
  cfg.encoders = reference_encoders(32);
  cfg.output_dir = out;
  cfg.train.iterations = 30;
  return cfg;
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(CMQE_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(CmdSplit, PaperSizesAndPermutation) {
  TempDir dir;
  std::string text;
  for (int i = 0; i < 3952; ++i) {
    text += R"({"id":"h)" + std::to_string(i) + R"(","english":"e","hindi":"h","hinglish":"c )" + std::to_string(i) +
            "\"}\n";
  }
  io::write_file(dir / "all.jsonl", text);
  const auto out = cmd_split(dir / "all.jsonl", SplitSpec{}, dir / "s1");
  EXPECT_EQ(lines(out.paths[0]).size(), 2766u);
  EXPECT_EQ(lines(out.paths[1]).size(), 395u);
  EXPECT_EQ(lines(out.paths[2]).size(), 791u);

  const auto again = cmd_split(dir / "all.jsonl", SplitSpec{}, dir / "s2");
  for (std::size_t p = 0; p < 3; ++p) EXPECT_EQ(io::read_file(out.paths[p]), io::read_file(again.paths[p]));

  std::vector<std::string> joined;
  for (const auto& p : out.paths) {
    const auto l = lines(p);
    joined.insert(joined.end(), l.begin(), l.end());
  }
  auto input = lines(dir / "all.jsonl");
  std::sort(joined.begin(), joined.end());
  std::sort(input.begin(), input.end());
  EXPECT_EQ(joined, input);
}

TEST(CmdSplit, CsvKeepsHeader) {
  TempDir dir;
  io::write_file(dir / "c.csv", "id,english,hindi,hinglish\n1,a,b,c\n2,\"d, e\",f,g\n3,h,i,j\n4,k,l,m\n");
  const auto out = cmd_split(dir / "c.csv", SplitSpec{{0.5, 0.25, 0.25}, 1}, dir / "o");
  EXPECT_EQ(out.paths[0].extension(), ".csv");
  const auto reread = load_corpus(out.paths[0], CorpusFormat::csv, LabelKind::unlabeled);
  EXPECT_EQ(reread.size(), 2u);
}

TEST(CmdTrain, WritesArtifactsAndIsDeterministic) {
  TempDir dir;
  io::write_file(dir / "train.jsonl", synthetic::planted_corpus_jsonl(100, 5));
  const auto a = cmd_train(small_run(dir / "train.jsonl", dir / "a"));
  const auto b = cmd_train(small_run(dir / "train.jsonl", dir / "b"));
  EXPECT_TRUE(fs::exists(a.model_path));
  EXPECT_TRUE(fs::exists(a.manifest_path));
  EXPECT_EQ(io::read_file(a.model_path), io::read_file(b.model_path));
  EXPECT_EQ(io::read_file(a.log_path), io::read_file(b.log_path));
  EXPECT_EQ(lines(a.log_path).size(), 1u + 31u);
  EXPECT_EQ(a.model.feature_dim, 96u);

  const auto manifest = nlohmann::json::parse(io::read_file(a.manifest_path));
  EXPECT_EQ(manifest["config"]["seed"], 42);
  EXPECT_EQ(manifest["inputs"][0]["sha256"], sha256_hex(io::read_file(dir / "train.jsonl")));
}

TEST(CmdTrain, ManifestHashTracksInputBytes) {
  TempDir dir;
  auto text = synthetic::planted_corpus_jsonl(60, 6);
  io::write_file(dir / "t.jsonl", text);
  auto cfg = small_run(dir / "t.jsonl", dir / "a");
  cfg.train.iterations = 2;
  const auto h1 = nlohmann::json::parse(io::read_file(cmd_train(cfg).manifest_path))["inputs"][0]["sha256"];
  text.back() = ' ';
  text += "\n";
  io::write_file(dir / "t.jsonl", text);
  const auto h2 = nlohmann::json::parse(io::read_file(cmd_train(cfg).manifest_path))["inputs"][0]["sha256"];
  EXPECT_NE(h1, h2);
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(CmdTrain, UnlabeledCorpusFails) {
  TempDir dir;
  io::write_file(dir / "u.jsonl", R"({"id":"1","english":"a","hindi":"b","hinglish":"c"})" "\n"
                                  R"({"id":"2","english":"d","hindi":"e","hinglish":"f"})" "\n");
  try {
    cmd_train(small_run(dir / "u.jsonl", dir / "o"));
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("no labels for subtask A"), std::string::npos);
  }
}

TEST(CmdTrain, ConfigErrorsAreUsageErrors) {
  TempDir dir;
  RunConfig cfg;
  cfg.output_dir = dir / "o";
  EXPECT_THROW(cmd_train(cfg), UsageError);
  cfg.train_path = dir / "missing.jsonl";
  EXPECT_THROW(cmd_train(cfg), UsageError);
  io::write_file(dir / "t.jsonl", synthetic::planted_corpus_jsonl(20, 1));
  cfg.train_path = dir / "t.jsonl";
  cfg.train.learning_rate = 2.0;
  EXPECT_THROW(cmd_train(cfg), UsageError);
  EXPECT_THROW(parse_encoder_source("bert"), UsageError);
  EXPECT_THROW(parse_subtask("C"), UsageError);
}

TEST(CmdTrain, CacheEncodersAndMissingIds) {
  TempDir dir;
  io::write_file(dir / "t.jsonl", synthetic::planted_corpus_jsonl(40, 2));
  for (auto c : kChannels) {
    cmd_encode(dir / "t.jsonl", c, 16, 42, dir / (std::string(to_string(c)) + ".cache"));
  }
  auto cfg = small_run(dir / "t.jsonl", dir / "cached");
  cfg.train.iterations = 5;
  for (std::size_t c = 0; c < 3; ++c) {
    cfg.encoders[c] = parse_encoder_source("cache:" + (dir / (std::string(to_string(kChannels[c])) + ".cache")).string());
  }
  const auto cached = cmd_train(cfg);
  EXPECT_EQ(cached.model.feature_dim, 48u);

  // Reference features are cast to binary32 by the cache; the pooled values
  // differ slightly, so only the shape is compared here.
  const auto corpus = load_corpus(dir / "t.jsonl", CorpusFormat::jsonl, LabelKind::rating);
  const auto from_cache = build_features(corpus, cfg.encoders, 42);
  const auto from_reference = build_features(corpus, reference_encoders(16), 42);
  ASSERT_EQ(from_cache.cols(), from_reference.cols());
  for (std::size_t i = 0; i < from_cache.data().size(); ++i) {
    EXPECT_NEAR(from_cache.data()[i], from_reference.data()[i], 1e-6);
  }

  // cache without the last two instances
  const auto full = read_embedding_cache(dir / "english.cache");
  std::vector<TokenEmbeddingSequence> partial;
  for (const auto& inst : corpus.instances) {
    if (inst.id != "s38" && inst.id != "s39") partial.push_back(*full.find(inst.id));
  }
  write_embedding_cache(dir / "partial.cache", partial);
  cfg.encoders[0] = parse_encoder_source("cache:" + (dir / "partial.cache").string());
  try {
    cmd_train(cfg);
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("english:s38"), std::string::npos) << msg;
    EXPECT_NE(msg.find("english:s39"), std::string::npos) << msg;
  }
}

TEST(CmdPredict, RecoversTrainingLabelsAndKeepsOrder) {
  TempDir dir;
  io::write_file(dir / "t.jsonl", synthetic::planted_corpus_jsonl(120, 3));
  auto cfg = small_run(dir / "t.jsonl", dir / "m");
  cfg.train.iterations = 200;
  const auto trained = cmd_train(cfg);
  const auto preds = cmd_predict(trained.model_path, dir / "t.jsonl", dir / "p.tsv");
  const auto corpus = load_corpus(dir / "t.jsonl", CorpusFormat::jsonl, LabelKind::rating);
  const auto golds = corpus_labels(corpus, LabelKind::rating);
  ASSERT_EQ(preds.size(), corpus.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    EXPECT_EQ(preds[i].id, corpus.instances[i].id);
    EXPECT_EQ(preds[i].label, golds[i]) << preds[i].id;
  }
  const auto out = lines(dir / "p.tsv");
  ASSERT_EQ(out.size(), corpus.size() + 1);
  EXPECT_EQ(out[0], "id\tlabel\tp_3,p_6,p_9");
  EXPECT_TRUE(out[1].starts_with(corpus.instances[0].id + "\t"));
}

TEST(CmdPredict, Errors) {
  TempDir dir;
  io::write_file(dir / "t.jsonl", synthetic::planted_corpus_jsonl(30, 4));
  auto cfg = small_run(dir / "t.jsonl", dir / "m");
  cfg.train.iterations = 2;
  const auto trained = cmd_train(cfg);
  io::write_file(dir / "empty.jsonl", "");
  EXPECT_THROW(cmd_predict(trained.model_path, dir / "empty.jsonl", dir / "p.tsv"), DataError);
  try {
    cmd_predict(trained.model_path, dir / "t.jsonl", dir / "p.tsv", reference_encoders(24));
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("96"), std::string::npos) << msg;
    EXPECT_NE(msg.find("72"), std::string::npos) << msg;
  }
}

TEST(CmdEvaluate, PerfectPredictions) {
  TempDir dir;
  io::write_file(dir / "g.jsonl", synthetic::planted_corpus_jsonl(50, 8));
  const auto corpus = load_corpus(dir / "g.jsonl", CorpusFormat::jsonl, LabelKind::rating);
  const auto golds = corpus_labels(corpus, LabelKind::rating);
  std::string preds = "id\tlabel\tp_3,p_6,p_9\n";
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    preds += corpus.instances[i].id + "\t" + format_number(golds[i]) + "\t0.2,0.3,0.5\n";
  }
  io::write_file(dir / "p.tsv", preds);
  std::ostringstream console;
  const auto out = cmd_evaluate(dir / "g.jsonl", dir / "p.tsv", Subtask::A, dir / "r", &console);
  EXPECT_NE(console.str().find("FS  1.00000"), std::string::npos) << console.str();
  EXPECT_NE(console.str().find("CK  1.00000"), std::string::npos);
  EXPECT_NE(console.str().find("MSE 0.00000"), std::string::npos);
  EXPECT_TRUE(fs::exists(out.text_path));
  EXPECT_TRUE(fs::exists(out.json_path));
  EXPECT_EQ(out.report.f1_weighted, 1.0);
}

TEST(CmdEvaluate, ShuffledIdsAreRejected) {
  TempDir dir;
  io::write_file(dir / "g.jsonl", synthetic::planted_corpus_jsonl(10, 8));
  const auto corpus = load_corpus(dir / "g.jsonl", CorpusFormat::jsonl, LabelKind::rating);
  std::string preds = "id\tlabel\tp\n";
  preds += corpus.instances[1].id + "\t3\t1\n" + corpus.instances[0].id + "\t3\t1\n";
  for (std::size_t i = 2; i < corpus.size(); ++i) preds += corpus.instances[i].id + "\t3\t1\n";
  io::write_file(dir / "p.tsv", preds);
  try {
    cmd_evaluate(dir / "g.jsonl", dir / "p.tsv", Subtask::A, dir / "r");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("'" + corpus.instances[0].id + "'"), std::string::npos) << e.what();
  }
}

TEST(CmdEvaluate, ReportMatchesMetricsModule) {
  TempDir dir;
  io::write_file(dir / "t.jsonl", synthetic::planted_corpus_jsonl(80, 9));
  auto cfg = small_run(dir / "t.jsonl", dir / "m");
  cfg.subtask = Subtask::B;
  cfg.train.iterations = 5;
  const auto trained = cmd_train(cfg);
  const auto preds = cmd_predict(trained.model_path, dir / "t.jsonl", dir / "p.tsv");
  const auto out = cmd_evaluate(dir / "t.jsonl", dir / "p.tsv", Subtask::B, dir / "r");
  const auto golds = corpus_labels(load_corpus(dir / "t.jsonl", CorpusFormat::jsonl, LabelKind::disagreement),
                                   LabelKind::disagreement);
  std::vector<Label> predicted;
  for (const auto& p : preds) predicted.push_back(p.label);
  EXPECT_EQ(out.report.f1_weighted, f1_weighted(golds, predicted));
  EXPECT_EQ(out.report.cohens_kappa, cohens_kappa(golds, predicted));
  EXPECT_EQ(out.report.mse, mse(golds, predicted));
  EXPECT_FALSE(out.report.kappa_official);
  const auto text = io::read_file(out.text_path);
  EXPECT_NE(text.find("f1_weighted=" + format_fixed5(out.report.f1_weighted)), std::string::npos);
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  io::write_file(dir / "t.jsonl", synthetic::planted_corpus_jsonl(30, 2));
  io::write_file(dir / "broken.jsonl", "{\"id\":1}\n");
  const auto d = dir.path().string();
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("train --bogus-flag"), 2);
  EXPECT_EQ(run_cli("train --train " + d + "/t.jsonl --encoder-en bert"), 2);
  EXPECT_EQ(run_cli("train --train " + d + "/missing.jsonl"), 2);
  EXPECT_EQ(run_cli("split --corpus " + d + "/broken.jsonl --out " + d + "/s"), 1);
  EXPECT_EQ(run_cli("train --train " + d + "/t.jsonl --dim 16 --iterations 3 --out " + d + "/m"), 0);
  EXPECT_TRUE(fs::exists(dir / "m/model.cmqm"));
  EXPECT_EQ(run_cli("predict --model " + d + "/m/model.cmqm --corpus " + d + "/t.jsonl --out " + d + "/p.tsv"), 0);
  EXPECT_EQ(run_cli("evaluate --gold " + d + "/t.jsonl --pred " + d + "/p.tsv --out " + d + "/r"), 0);
  EXPECT_EQ(run_cli("predict --model " + d + "/m/model.cmqm --corpus " + d + "/t.jsonl --dim 8 --out " + d + "/q.tsv"),
            1);
}

TEST(Cli, ConfigFile) {
  TempDir dir;
  io::write_file(dir / "t.jsonl", synthetic::planted_corpus_jsonl(30, 2));
  const auto d = dir.path().string();
  io::write_file(dir / "run.toml", "[train]\ntrain = \"" + d + "/t.jsonl\"\ndim = 8\niterations = 2\nout = \"" + d +
                                       "/from_config\"\n");
  EXPECT_EQ(run_cli("--config " + d + "/run.toml train"), 0);
  const auto manifest = nlohmann::json::parse(io::read_file(dir / "from_config/manifest.json"));
  EXPECT_EQ(manifest["config"]["gbdt"]["iterations"], 2);
  // flags override the file
  EXPECT_EQ(run_cli("--config " + d + "/run.toml train --iterations 3"), 0);
  EXPECT_EQ(nlohmann::json::parse(io::read_file(dir / "from_config/manifest.json"))["config"]["gbdt"]["iterations"], 3);
}
