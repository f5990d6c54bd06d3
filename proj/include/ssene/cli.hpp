#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ssene/corpus.hpp"
#include "ssene/model.hpp"
#include "ssene/synattn.hpp"
#include "ssene/trainer.hpp"

namespace ssene::cli {

// Exit-code contract, stable for CI:
// 0 success, 1 domain failure, 2 input error, 3 runtime abort.
inline constexpr int kOk = 0;
inline constexpr int kDomainFailure = 1;
inline constexpr int kInputError = 2;
inline constexpr int kRuntimeAbort = 3;

// Merged view of model + training + path settings. Precedence when
// assembling: built-in defaults, then the config file, then flags.
struct Settings {
  ModelConfig model;
  TrainConfig train;
  std::string data_path;
  std::string out_dir = "run";
};

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

// key = value lines; '#' starts a comment; unknown keys are rejected.
inline void apply_config_entry(Settings& s, const std::string& key, const std::string& value) {
  try {
    if (key == "d_model") s.model.d_model = std::stoi(value);
    else if (key == "head_count") s.model.head_count = std::stoi(value);
    else if (key == "enc_layers") s.model.enc_layers = std::stoi(value);
    else if (key == "dec_layers") s.model.dec_layers = std::stoi(value);
    else if (key == "ffn_hidden") s.model.ffn_hidden = std::stoi(value);
    else if (key == "max_len") s.model.max_len = std::stoi(value);
    else if (key == "alpha") s.model.alpha = std::stod(value);
    else if (key == "gamma1") s.model.transform.gamma1 = std::stod(value);
    else if (key == "gamma2") s.model.transform.gamma2 = std::stod(value);
    else if (key == "use_da") s.model.use_da = parse_bool(value, key);
    else if (key == "use_aux") s.model.use_aux = parse_bool(value, key);
    else if (key == "use_positional") s.model.use_positional = parse_bool(value, key);
    else if (key == "aux_reverse_kl") s.model.aux_reverse_kl = parse_bool(value, key);
    else if (key == "epochs") s.train.epochs = std::stoi(value);
    else if (key == "batch_size") s.train.batch_size = std::stoi(value);
    else if (key == "learning_rate") s.train.learning_rate = std::stod(value);
    else if (key == "seed") s.train.seed = std::stoull(value);
    else if (key == "patience") s.train.patience = std::stoi(value);
    else if (key == "eval_every") s.train.eval_every = std::stoi(value);
    else if (key == "max_steps") s.train.max_steps = std::stoll(value);
    else if (key == "max_out_len") s.train.max_out_len = std::stoi(value);
    else if (key == "matrix") s.train.matrix_kind = matrix_kind_from_string(value);
    else if (key == "noise_var") s.train.noise_var = std::stod(value);
    else if (key == "data") s.data_path = value;
    else if (key == "out_dir") s.out_dir = value;
    else throw ConfigError("config: unknown key '" + key + "'");
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config: bad value for '" + key + "': " + e.what());
  }
}

inline void load_config_file(Settings& s, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto trim = [](std::string t) {
      const auto b = t.find_first_not_of(" \t\r");
      const auto e = t.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : t.substr(b, e - b + 1);
    };
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    apply_config_entry(s, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
}

inline Vocabulary vocabulary_from(const std::vector<AnnotatedSentence>& sentences) {
  Vocabulary v;
  for (const auto& s : sentences)
    for (const auto& t : s.tokens) v.add_token(t);
  return v;
}

// ---- generate-data ----

inline int cmd_generate_data(const std::string& out_path, int n, const std::string& difficulty,
                             std::uint64_t seed) {
  std::vector<AnnotatedSentence> sentences;
  try {
    sentences = generate_synthetic(n, difficulty_from_string(difficulty), seed);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  try {
    save(out_path, sentences);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  const GeneratorStats st = audit_corpus(sentences);
  std::cout << "wrote " << st.sentences << " sentences (" << st.triplets << " triplets) to "
            << out_path << "\n"
            << "long_distance_triplets: " << st.long_distance_triplets << "\n"
            << "long_distance_share: " << st.long_distance_share << "\n"
            << "max_token_gap: " << st.max_token_gap << "\n"
            << "max_gap_over_tree_distance: " << st.max_gap_over_tree_distance << "\n";
  return kOk;
}

// ---- validate ----

inline int cmd_validate(const std::string& data_path, const std::string& other_path) {
  std::vector<AnnotatedSentence> sentences;
  try {
    sentences = load_lenient(data_path);
  } catch (const std::exception& e) {
    std::cerr << "load error: " << e.what() << "\n";
    return kInputError;
  }
  const ValidationReport report = validate_annotations(sentences);
  std::cout << "sentences: " << report.sentences_checked << "\n"
            << "violations: " << report.violations.size() << "\n";
  for (const auto& v : report.violations)
    std::cout << "line " << (v.sentence + 2) << ": " << v.code << ": " << v.detail << "\n";

  if (!other_path.empty()) {
    std::vector<AnnotatedSentence> other;
    try {
      other = load_lenient(other_path);
    } catch (const std::exception& e) {
      std::cerr << "load error: " << e.what() << "\n";
      return kInputError;
    }
    if (other.size() != sentences.size()) {
      std::cerr << "error: annotation files cover different sentence counts\n";
      return kInputError;
    }
    // items are candidate triplets (union over both annotators, per
    // sentence); agreement is exact surface match
    std::vector<int> labels_a, labels_b;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      std::vector<TripletSurface> candidates;
      const auto add_candidates = [&](const std::vector<NegTriplet>& ts) {
        for (const auto& t : ts) {
          const TripletSurface s{t.subject_text, t.cue_text, t.scope_text};
          if (std::find(candidates.begin(), candidates.end(), s) == candidates.end())
            candidates.push_back(s);
        }
      };
      add_candidates(sentences[i].triplets);
      add_candidates(other[i].triplets);
      const auto has = [](const std::vector<NegTriplet>& ts, const TripletSurface& s) {
        for (const auto& t : ts)
          if (t.subject_text == s.subject && t.cue_text == s.cue && t.scope_text == s.scope)
            return true;
        return false;
      };
      for (const auto& c : candidates) {
        labels_a.push_back(has(sentences[i].triplets, c) ? 1 : 0);
        labels_b.push_back(has(other[i].triplets, c) ? 1 : 0);
      }
    }
    if (labels_a.empty()) {
      std::cout << "kappa: undefined (no candidate triplets)\n";
    } else {
      const auto kappa = cohens_kappa(labels_a, labels_b);
      if (kappa)
        std::cout << "kappa: " << *kappa << "\n";
      else
        std::cout << "kappa: undefined (constant labels)\n";
    }
  }
  return report.ok() ? kOk : kDomainFailure;
}

// ---- train ----

inline int cmd_train(const Settings& settings, const std::string& resume_path) {
  Settings s = settings;
  std::vector<AnnotatedSentence> sentences;
  try {
    sentences = load(s.data_path);
  } catch (const std::exception& e) {
    std::cerr << "load error: " << e.what() << "\n";
    return kInputError;
  }
  SplitResult parts;
  try {
    parts = split(sentences, SplitSpec{8, 1, 1, s.train.seed});
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }

  std::filesystem::create_directories(s.out_dir);
  const std::string ckpt_path = s.out_dir + "/model.ckpt";
  const std::string record_path = s.out_dir + "/run_record.jsonl";

  std::optional<Model> model;
  Vocabulary vocab;
  TrainState state;
  try {
    if (!resume_path.empty()) {
      LoadedCheckpoint loaded = load_checkpoint(resume_path);
      ModelConfig expected = s.model;
      expected.vocab_size = loaded.config.vocab_size;
      if (!loaded.config.same_shape_as(expected) || loaded.config.use_aux != expected.use_aux)
        throw CheckpointError("checkpoint configuration disagrees with the requested one");
      vocab = loaded.vocab;
      model.emplace(std::move(loaded.model));
      if (loaded.train_state) state = *loaded.train_state;
    } else {
      vocab = vocabulary_from(sentences);
      s.model.vocab_size = vocab.size();
      s.model.validate();
      model.emplace(s.model, s.train.seed);
    }
    s.train.validate();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }

  RunRecord rec;
  try {
    rec = train(*model, parts.train, parts.val, vocab, s.train, &state);
  } catch (const DivergenceError& e) {
    const std::string diag_path = s.out_dir + "/diagnostics.txt";
    std::ofstream diag(diag_path);
    diag << e.what() << "\n"
         << "learning_rate: " << s.train.learning_rate << "\n"
         << "batch_size: " << s.train.batch_size << "\n"
         << "seed: " << s.train.seed << "\n";
    std::cerr << "aborted: " << e.what() << "\ndiagnostics: " << diag_path << "\n";
    return kRuntimeAbort;
  }

  save_checkpoint(ckpt_path, *model, vocab, &state);
  write_run_record(record_path, rec, model->config(), s.train);
  EvalResult test_eval = evaluate_checkpoint(*model, vocab, parts.test, s.train);
  std::cout << "best_val_f1: " << rec.best_f1 << " (epoch " << rec.best_epoch << ")\n"
            << "steps: " << rec.final_step << "\n"
            << "checkpoint: " << ckpt_path << "\n"
            << "record: " << record_path << "\n"
            << "test metrics:\n"
            << metrics_report(test_eval.overall);
  return kOk;
}

// ---- extract ----

inline int cmd_extract(const std::string& model_path, const std::string& data_path,
                       const std::string& attention_dir, int max_out_len) {
  std::optional<LoadedCheckpoint> loaded;
  try {
    loaded.emplace(load_checkpoint(model_path));
  } catch (const std::exception& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kInputError;
  }
  std::vector<AnnotatedSentence> sentences;
  try {
    sentences = load(data_path);
  } catch (const std::exception& e) {
    std::cerr << "load error: " << e.what() << "\n";
    return kInputError;
  }
  Model& model = loaded->model;
  const Vocabulary& vocab = loaded->vocab;
  const bool export_attention_maps = !attention_dir.empty();
  if (export_attention_maps) {
    if (!model.config().use_da) {
      std::cerr << "error: checkpoint has no dependency-attention layer to export\n";
      return kInputError;
    }
    std::filesystem::create_directories(attention_dir);
  }
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const AnnotatedSentence& s = sentences[i];
    const DistanceMatrix dist = tree_distances(validate_tree(s.heads));
    const Matrix m = assoc_matrix(dist, model.config().transform);
    AttentionCapture capture;
    const std::vector<int> out_ids =
        model.generate(vocab.encode(s.tokens), m, max_out_len,
                       export_attention_maps ? &capture : nullptr);
    auto [surfaces, diag] = parse(vocab.decode(out_ids));
    std::cout << "sentence " << i << ": " << join_tokens(s.tokens, Span{0, static_cast<int>(s.tokens.size())})
              << "\n";
    for (const auto& t : surfaces)
      std::cout << "  triplet: " << t.subject << " | " << t.cue << " | " << t.scope << "\n";
    if (diag.malformed) std::cout << "  malformed_fragments: " << diag.malformed << "\n";
    if (export_attention_maps && capture.has) {
      const std::string base = attention_dir + "/sent" + std::to_string(i);
      export_attention(capture.before, base + "_before.csv");
      export_attention(capture.after, base + "_after.csv");
    }
  }
  return kOk;
}

// ---- ablate ----

inline int cmd_ablate(const Settings& settings, const std::vector<std::uint64_t>& seeds,
                      const std::string& csv_path) {
  Settings s = settings;
  std::vector<AnnotatedSentence> sentences;
  try {
    sentences = load(s.data_path);
  } catch (const std::exception& e) {
    std::cerr << "load error: " << e.what() << "\n";
    return kInputError;
  }
  AblationResult result;
  try {
    Vocabulary vocab = vocabulary_from(sentences);
    s.model.vocab_size = vocab.size();
    s.model.validate();
    s.train.validate();
    result = run_ablation_suite(sentences, vocab, s.model, s.train, seeds);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  std::filesystem::create_directories(std::filesystem::path(csv_path).parent_path().string().empty()
                                          ? "."
                                          : std::filesystem::path(csv_path).parent_path().string());
  write_ablation_csv(csv_path, result);
  std::cout << "table: " << csv_path << "\n";
  for (const auto& v : result.variants)
    std::cout << v.name << ": mean_f1=" << result.mean_f1(v.name)
              << " std_f1=" << result.std_f1(v.name)
              << " mean_ld_f1=" << result.mean_ld_f1(v.name) << "\n";
  for (const auto& r : result.runs)
    if (r.failed)
      std::cout << "failed: " << r.variant << " seed " << r.seed << ": " << r.error << "\n";
  return result.any_failed() ? kDomainFailure : kOk;
}

// ---- entry point ----

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{
      "ssene: desk-scale negation triplet extraction with a syntax-aware "
      "encoder, multi-task training, and a synthetic corpus generator"};
  app.require_subcommand(1);

  // generate-data
  auto* gen_cmd = app.add_subcommand("generate-data", "emit a synthetic annotated corpus");
  std::string gen_out;
  int gen_n = 500;
  std::string gen_difficulty = "medium";
  std::uint64_t gen_seed = 7;
  gen_cmd->add_option("--out", gen_out, "output corpus file")->required();
  gen_cmd->add_option("--n", gen_n, "number of sentences (default 500)");
  gen_cmd->add_option("--difficulty", gen_difficulty, "easy | medium | hard (default medium)");
  gen_cmd->add_option("--seed", gen_seed, "generator seed (default 7)");

  // validate
  auto* val_cmd = app.add_subcommand("validate", "check annotation constraints, optionally kappa");
  std::string val_data, val_other;
  val_cmd->add_option("--data", val_data, "corpus file")->required();
  val_cmd->add_option("--other", val_other,
                      "second annotator's file; also prints Cohen's kappa over candidate triplets");

  // shared config/override options for train and ablate
  const auto add_settings_options = [](CLI::App* cmd, std::string& config_path) {
    cmd->add_option("--config", config_path,
                    "config file (key = value lines; flags override file values)");
    cmd->add_option("--data", "corpus file (overrides config 'data')");
    cmd->add_option("--out-dir", "output directory (default 'run')");
    cmd->add_option("--epochs", "training epochs (default 30)");
    cmd->add_option("--batch-size", "batch size (default 16)");
    cmd->add_option("--lr", "learning rate (default 3e-4)");
    cmd->add_option("--seed", "seed (default 42)");
    cmd->add_option("--alpha", "auxiliary loss weight in (0,1) (default 0.5)");
    cmd->add_option("--gamma1", "distance transform numerator (default 2)");
    cmd->add_option("--gamma2", "distance transform offset (default 0.5)");
    cmd->add_option("--matrix", "association matrix: paper | random | noisy (default paper)");
    cmd->add_option("--noise-var", "variance for --matrix noisy (default 0.01)");
    cmd->add_option("--max-steps", "stop after this many optimizer steps (0 = no cap)");
    cmd->add_option("--max-out-len", "generation length budget (default 40)");
    cmd->add_option("--d-model", "model width (default 64)");
    cmd->add_option("--heads", "attention heads (default 4)");
    cmd->add_option("--enc-layers", "encoder layers (default 2)");
    cmd->add_option("--dec-layers", "decoder layers (default 2)");
  };
  const auto settings_from = [](CLI::App* cmd, const std::string& config_path) {
    Settings s;
    if (!config_path.empty()) load_config_file(s, config_path);
    const auto override_int = [&](const char* flag, int& dst) {
      if (cmd->count(flag)) dst = std::stoi(cmd->get_option(flag)->as<std::string>());
    };
    const auto override_double = [&](const char* flag, double& dst) {
      if (cmd->count(flag)) dst = std::stod(cmd->get_option(flag)->as<std::string>());
    };
    if (cmd->count("--data")) s.data_path = cmd->get_option("--data")->as<std::string>();
    if (cmd->count("--out-dir")) s.out_dir = cmd->get_option("--out-dir")->as<std::string>();
    override_int("--epochs", s.train.epochs);
    override_int("--batch-size", s.train.batch_size);
    override_double("--lr", s.train.learning_rate);
    if (cmd->count("--seed"))
      s.train.seed = std::stoull(cmd->get_option("--seed")->as<std::string>());
    override_double("--alpha", s.model.alpha);
    override_double("--gamma1", s.model.transform.gamma1);
    override_double("--gamma2", s.model.transform.gamma2);
    if (cmd->count("--matrix"))
      s.train.matrix_kind =
          matrix_kind_from_string(cmd->get_option("--matrix")->as<std::string>());
    override_double("--noise-var", s.train.noise_var);
    if (cmd->count("--max-steps"))
      s.train.max_steps = std::stoll(cmd->get_option("--max-steps")->as<std::string>());
    override_int("--max-out-len", s.train.max_out_len);
    override_int("--d-model", s.model.d_model);
    override_int("--heads", s.model.head_count);
    override_int("--enc-layers", s.model.enc_layers);
    override_int("--dec-layers", s.model.dec_layers);
    return s;
  };

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model and checkpoint the best epoch");
  std::string train_config, train_resume;
  bool no_sd = false, no_sc = false;
  add_settings_options(train_cmd, train_config);
  train_cmd->add_flag("--no-sd", no_sd, "ablate syntactic dependency attention (SSENE-SD)");
  train_cmd->add_flag("--no-sc", no_sc, "ablate the semantic-consistency auxiliary task (SSENE-SC)");
  train_cmd->add_option("--resume", train_resume, "checkpoint to resume from");

  // extract
  auto* ex_cmd = app.add_subcommand("extract", "run triplet extraction with a trained model");
  std::string ex_model, ex_data, ex_attention;
  int ex_max_out = 40;
  ex_cmd->add_option("--model", ex_model, "checkpoint file")->required();
  ex_cmd->add_option("--data", ex_data, "corpus file")->required();
  ex_cmd->add_option("--export-attention", ex_attention,
                     "directory for first-layer attention CSVs (before/after the association "
                     "matrix is applied)");
  ex_cmd->add_option("--max-out-len", ex_max_out, "generation length budget (default 40)");

  // ablate
  auto* ab_cmd = app.add_subcommand("ablate", "train and compare all ablation variants");
  std::string ab_config, ab_seeds = "1,2,3", ab_csv;
  add_settings_options(ab_cmd, ab_config);
  ab_cmd->add_option("--seeds", ab_seeds, "comma-separated seeds (default 1,2,3)");
  ab_cmd->add_option("--out", ab_csv, "comparison table CSV path (default <out-dir>/ablation.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (gen_cmd->parsed()) return cmd_generate_data(gen_out, gen_n, gen_difficulty, gen_seed);
    if (val_cmd->parsed()) return cmd_validate(val_data, val_other);
    if (train_cmd->parsed()) {
      Settings s = settings_from(train_cmd, train_config);
      if (no_sd) s.model.use_da = false;
      if (no_sc) s.model.use_aux = false;
      if (s.data_path.empty()) {
        std::cerr << "error: no corpus given (--data or config 'data')\n";
        return kInputError;
      }
      return cmd_train(s, train_resume);
    }
    if (ex_cmd->parsed()) return cmd_extract(ex_model, ex_data, ex_attention, ex_max_out);
    if (ab_cmd->parsed()) {
      Settings s = settings_from(ab_cmd, ab_config);
      if (s.data_path.empty()) {
        std::cerr << "error: no corpus given (--data or config 'data')\n";
        return kInputError;
      }
      std::vector<std::uint64_t> seeds;
      std::stringstream ss(ab_seeds);
      std::string item;
      while (std::getline(ss, item, ','))
        if (!item.empty()) seeds.push_back(std::stoull(item));
      const std::string csv = ab_csv.empty() ? s.out_dir + "/ablation.csv" : ab_csv;
      std::filesystem::create_directories(s.out_dir);
      return cmd_ablate(s, seeds, csv);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const DivergenceError& e) {
    std::cerr << "aborted: " << e.what() << "\n";
    return kRuntimeAbort;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace ssene::cli
