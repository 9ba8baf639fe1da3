// cmqe: split, encode, train, predict and evaluate code-mixed quality models.
//
// Exit codes: 0 success, 1 runtime or data error, 2 usage or configuration error.

#include <array>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cmqe/pipeline.hpp"

namespace {

constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

struct EncoderFlags {
  std::array<std::string, 3> source{"reference", "reference", "reference"};
  std::array<std::size_t, 3> dim{0, 0, 0};
  std::size_t all_dims = 0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--encoder-en", source[0], "English encoder: reference | cache:<path>");
    cmd->add_option("--encoder-hi", source[1], "Hindi encoder: reference | cache:<path>");
    cmd->add_option("--encoder-cm", source[2], "Hinglish encoder: reference | cache:<path>");
    cmd->add_option("--dim", all_dims, "Reference encoder width for every channel");
    cmd->add_option("--dim-en", dim[0], "Reference encoder width, English");
    cmd->add_option("--dim-hi", dim[1], "Reference encoder width, Hindi");
    cmd->add_option("--dim-cm", dim[2], "Reference encoder width, Hinglish");
  }

  std::array<cmqe::EncoderSource, 3> resolve() const {
    std::array<cmqe::EncoderSource, 3> out;
    for (std::size_t c = 0; c < 3; ++c) {
      out[c] = cmqe::parse_encoder_source(source[c]);
      out[c].dim = dim[c] != 0 ? dim[c] : all_dims;
    }
    return out;
  }
};

cmqe::SplitSpec make_split(const std::vector<double>& ratios, std::uint64_t seed) {
  if (ratios.size() != 3) throw cmqe::UsageError("--ratios takes exactly three values");
  cmqe::SplitSpec spec;
  spec.ratios = {ratios[0], ratios[1], ratios[2]};
  spec.seed = seed;
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Code-mixed sentence quality estimation: mean-pooled embeddings + boosted trees"};
  app.set_config("--config", "", "TOML/INI config file; flags override its values");
  app.require_subcommand(1);

  std::uint64_t seed = 42;
  unsigned threads = 0;

  // split
  auto* split = app.add_subcommand("split", "Shuffle a corpus and write train/val/test files");
  std::string split_corpus;
  std::vector<double> split_ratios{0.7, 0.1, 0.2};
  std::string split_out = "splits";
  split->add_option("--corpus", split_corpus, "Input corpus (.jsonl or .csv)")->required();
  split->add_option("--ratios", split_ratios, "Train/val/test ratios")->expected(3);
  split->add_option("--seed", seed, "Shuffle seed");
  split->add_option("--out", split_out, "Output directory");

  // encode
  auto* encode = app.add_subcommand("encode", "Write reference token embeddings for one channel as a cache");
  std::string encode_corpus, encode_channel, encode_out;
  std::size_t encode_dim = cmqe::kDefaultEmbeddingDim;
  encode->add_option("--corpus", encode_corpus, "Input corpus")->required();
  encode->add_option("--channel", encode_channel, "english | hindi | hinglish")->required();
  encode->add_option("--dim", encode_dim, "Embedding width");
  encode->add_option("--seed", seed, "Hash seed");
  encode->add_option("--out", encode_out, "Output cache file")->required();
  encode->add_option("--threads", threads, "Worker threads (0 = all cores)");

  // train
  auto* train = app.add_subcommand("train", "Fit a boosted-tree model");
  cmqe::RunConfig run;
  std::string train_path, val_path, corpus_path, subtask = "A", train_out = "out";
  std::vector<double> train_ratios;
  EncoderFlags train_enc;
  train->add_option("--train", train_path, "Training corpus");
  train->add_option("--corpus", corpus_path, "Corpus to split; its train part is used");
  train->add_option("--ratios", train_ratios, "Split ratios for --corpus")->expected(3);
  train->add_option("--val", val_path, "Validation corpus, scored after training");
  train->add_option("--subtask", subtask, "A (rating) or B (disagreement)");
  train_enc.add_to(train);
  train->add_option("--iterations", run.train.iterations, "Boosting rounds");
  train->add_option("--learning-rate", run.train.learning_rate, "Shrinkage");
  train->add_option("--max-depth", run.train.max_depth, "Tree depth");
  train->add_option("--min-samples-leaf", run.train.min_samples_leaf, "Minimum rows per leaf");
  train->add_option("--l2-leaf-reg", run.train.l2_leaf_reg, "L2 penalty on leaf values");
  train->add_option("--seed", seed, "Root seed");
  train->add_option("--threads", threads, "Worker threads (0 = all cores)");
  train->add_option("--out", train_out, "Output directory");

  // predict
  auto* predict = app.add_subcommand("predict", "Predict labels and class probabilities");
  std::string predict_model, predict_corpus, predict_out;
  EncoderFlags predict_enc;
  predict->add_option("--model", predict_model, "Model file")->required();
  predict->add_option("--corpus", predict_corpus, "Corpus to predict")->required();
  predict->add_option("--out", predict_out, "Predictions file")->required();
  predict_enc.add_to(predict);
  predict->add_option("--seed", seed, "Root seed used at training time");
  predict->add_option("--threads", threads, "Worker threads (0 = all cores)");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against gold labels");
  std::string eval_gold, eval_pred, eval_subtask = "A", eval_out = "report";
  evaluate->add_option("--gold", eval_gold, "Gold corpus")->required();
  evaluate->add_option("--pred", eval_pred, "Predictions file")->required();
  evaluate->add_option("--subtask", eval_subtask, "A or B");
  evaluate->add_option("--out", eval_out, "Report directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*split) {
      const auto out = cmqe::cmd_split(split_corpus, make_split(split_ratios, seed), split_out);
      for (std::size_t p = 0; p < 3; ++p) std::cout << out.paths[p].string() << "\t" << out.sizes[p] << "\n";
    } else if (*encode) {
      const auto n = cmqe::cmd_encode(encode_corpus, cmqe::parse_channel(encode_channel), encode_dim, seed,
                                      encode_out, threads);
      std::cout << "wrote " << n << " records to " << encode_out << "\n";
    } else if (*train) {
      run.train_path = train_path;
      run.corpus_path = corpus_path;
      run.val_path = val_path;
      if (!corpus_path.empty()) {
        run.split = make_split(train_ratios.empty() ? std::vector<double>{0.7, 0.1, 0.2} : train_ratios, seed);
      }
      run.encoders = train_enc.resolve();
      run.subtask = cmqe::parse_subtask(subtask);
      run.output_dir = train_out;
      run.seed = seed;
      run.train.seed = static_cast<std::int64_t>(seed);
      run.threads = threads;
      const auto out = cmqe::cmd_train(run);
      std::cout << "model    " << out.model_path.string() << "\n"
                << "manifest " << out.manifest_path.string() << "\n"
                << "log      " << out.log_path.string() << "\n";
    } else if (*predict) {
      const auto preds = cmqe::cmd_predict(predict_model, predict_corpus, predict_out, predict_enc.resolve(), seed,
                                           threads);
      std::cout << "wrote " << preds.size() << " predictions to " << predict_out << "\n";
    } else if (*evaluate) {
      cmqe::cmd_evaluate(eval_gold, eval_pred, cmqe::parse_subtask(eval_subtask), eval_out, &std::cout);
    }
  } catch (const cmqe::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
