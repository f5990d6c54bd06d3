#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssene/corpus.hpp"
#include "ssene/model.hpp"
#include "ssene/synattn.hpp"
#include "ssene/triplets.hpp"
#include "ssene/vocab.hpp"

namespace ssene {

struct DivergenceError : std::runtime_error {
  long long step;
  DivergenceError(long long at_step, const std::string& what)
      : std::runtime_error("training diverged at step " + std::to_string(at_step) + ": " + what),
        step(at_step) {}
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 16;
  double learning_rate = 3e-4;
  std::uint64_t seed = 42;
  int patience = 5;     // early stopping on validation F1
  int eval_every = 1;   // epochs between validation passes
  long long max_steps = 0;  // 0 = no cap
  int max_out_len = 40;
  MatrixKind matrix_kind = MatrixKind::paper;
  double noise_var = 0.01;

  void validate() const {
    if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("train config: learning_rate must be > 0");
    if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
    if (patience < 1) throw ConfigError("train config: patience must be >= 1");
    if (eval_every < 1) throw ConfigError("train config: eval_every must be >= 1");
    if (max_out_len < 0) throw ConfigError("train config: max_out_len must be >= 0");
  }
};

// A sentence prepared for the model: ids, its association matrix (fixed for
// the whole run, including for the perturbed variants), gold surfaces.
struct EncodedSentence {
  std::vector<int> x_ids;
  std::vector<int> y_ids;
  Matrix m;
  std::vector<TripletSurface> gold;
  bool long_distance = false;
  int n_tokens = 0;
};

inline EncodedSentence encode_sentence(const AnnotatedSentence& s, const Vocabulary& vocab,
                                       const TransformParams& transform, MatrixKind kind,
                                       double noise_var, std::uint64_t matrix_seed) {
  EncodedSentence e;
  e.x_ids = vocab.encode(s.tokens);
  e.y_ids = vocab.encode(serialize(s.tokens, s.triplets));
  const DistanceMatrix dist = tree_distances(validate_tree(s.heads));
  e.m = matrix_variant(kind, dist, transform, matrix_seed, noise_var);
  for (const auto& t : s.triplets)
    e.gold.push_back(TripletSurface{t.subject_text, t.cue_text, t.scope_text});
  e.long_distance = has_long_distance_triplet(s);
  e.n_tokens = static_cast<int>(s.tokens.size());
  return e;
}

inline std::vector<EncodedSentence> encode_corpus(const std::vector<AnnotatedSentence>& sentences,
                                                  const Vocabulary& vocab,
                                                  const TransformParams& transform,
                                                  MatrixKind kind, double noise_var,
                                                  std::uint64_t seed, std::uint64_t salt) {
  std::vector<EncodedSentence> out;
  out.reserve(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i)
    out.push_back(encode_sentence(sentences[i], vocab, transform, kind, noise_var,
                                  Rng::mix(seed ^ salt, i)));
  return out;
}

// ---- evaluation ----

struct EvalResult {
  Metrics overall;
  Metrics long_distance;  // restricted to sentences with a long-distance gold triplet
  int long_distance_sentences = 0;
  std::vector<std::vector<TripletSurface>> predictions;
};

// Generates with the syntax-aware encoder only, parses, scores exactly.
inline EvalResult evaluate_model(Model& model, const std::vector<EncodedSentence>& data,
                                 const Vocabulary& vocab, int max_out_len) {
  EvalResult res;
  std::vector<std::vector<TripletSurface>> pred_all, gold_all, pred_ld, gold_ld;
  long long malformed = 0;
  for (const auto& s : data) {
    const std::vector<int> out_ids = model.generate(s.x_ids, s.m, max_out_len);
    auto [surfaces, diag] = parse(vocab.decode(out_ids));
    malformed += diag.malformed;
    pred_all.push_back(surfaces);
    gold_all.push_back(s.gold);
    if (s.long_distance) {
      pred_ld.push_back(surfaces);
      gold_ld.push_back(s.gold);
      ++res.long_distance_sentences;
    }
  }
  res.overall = evaluate(pred_all, gold_all);
  res.overall.malformed_count = malformed;
  if (!pred_ld.empty()) res.long_distance = evaluate(pred_ld, gold_ld);
  res.predictions = std::move(pred_all);
  return res;
}

inline EvalResult evaluate_checkpoint(Model& model, const Vocabulary& vocab,
                                      const std::vector<AnnotatedSentence>& sentences,
                                      const TrainConfig& cfg) {
  const auto data = encode_corpus(sentences, vocab, model.config().transform, cfg.matrix_kind,
                                  cfg.noise_var, cfg.seed, 0x6576616cull);
  return evaluate_model(model, data, vocab, cfg.max_out_len);
}

// ---- run records ----

struct StepRecord {
  long long step = 0;
  double l1 = 0.0, l2 = 0.0, l = 0.0;
  bool operator==(const StepRecord&) const = default;
};

struct EpochRecord {
  int epoch = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0, ld_f1 = 0.0;
  long long malformed = 0;
  bool operator==(const EpochRecord&) const = default;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::string variant = "SSENE";
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  double best_f1 = 0.0;
  int best_epoch = -1;
  long long final_step = 0;
  bool operator==(const RunRecord&) const = default;
};

inline void write_run_record(const std::string& path, const RunRecord& rec,
                             const ModelConfig& mc, const TrainConfig& tc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write run record: " + path);
  nlohmann::ordered_json cfg{{"type", "config"},
                             {"variant", rec.variant},
                             {"seed", rec.seed},
                             {"epochs", tc.epochs},
                             {"batch_size", tc.batch_size},
                             {"learning_rate", tc.learning_rate},
                             {"matrix", to_string(tc.matrix_kind)},
                             {"noise_var", tc.noise_var},
                             {"alpha", mc.alpha},
                             {"gamma1", mc.transform.gamma1},
                             {"gamma2", mc.transform.gamma2},
                             {"d_model", mc.d_model},
                             {"head_count", mc.head_count},
                             {"enc_layers", mc.enc_layers},
                             {"dec_layers", mc.dec_layers},
                             {"use_da", mc.use_da},
                             {"use_aux", mc.use_aux}};
  out << cfg.dump() << "\n";
  for (const auto& s : rec.steps)
    out << nlohmann::ordered_json{
               {"type", "step"}, {"step", s.step}, {"l1", s.l1}, {"l2", s.l2}, {"l", s.l}}
               .dump()
        << "\n";
  for (const auto& e : rec.epochs)
    out << nlohmann::ordered_json{{"type", "epoch"},
                                  {"epoch", e.epoch},
                                  {"precision", e.precision},
                                  {"recall", e.recall},
                                  {"f1", e.f1},
                                  {"ld_f1", e.ld_f1},
                                  {"malformed", e.malformed}}
               .dump()
        << "\n";
  out << nlohmann::ordered_json{{"type", "final"},
                                {"best_f1", rec.best_f1},
                                {"best_epoch", rec.best_epoch},
                                {"steps", rec.final_step}}
             .dump()
      << "\n";
}

// ---- training ----

// Joint multi-task loop: per batch the main teacher-forced loss and (when
// active) the auxiliary consistency loss are combined and backpropagated
// once through the shared graph, then one Adam step. Deterministic given
// the seed.
inline RunRecord train(Model& model, const std::vector<AnnotatedSentence>& train_sentences,
                       const std::vector<AnnotatedSentence>& val_sentences,
                       const Vocabulary& vocab, const TrainConfig& cfg,
                       TrainState* state = nullptr) {
  cfg.validate();
  const ModelConfig& mc = model.config();
  const auto train_data = encode_corpus(train_sentences, vocab, mc.transform, cfg.matrix_kind,
                                        cfg.noise_var, cfg.seed, 0x7261696eull);
  const auto val_data = encode_corpus(val_sentences, vocab, mc.transform, cfg.matrix_kind,
                                      cfg.noise_var, cfg.seed, 0x76616cull);
  RunRecord rec;
  rec.seed = cfg.seed;
  TrainState local_state;
  TrainState& ts = state ? *state : local_state;
  Rng shuffle_rng(Rng::mix(cfg.seed, 0x5348ull));

  std::vector<Matrix> best_values;
  const auto snapshot = [&] {
    best_values.clear();
    for (const auto& e : model.params().entries()) best_values.push_back(e.value);
  };
  const auto restore = [&] {
    if (best_values.empty()) return;
    auto& entries = model.params().entries();
    for (std::size_t i = 0; i < entries.size(); ++i) entries[i].value = best_values[i];
  };

  int epochs_since_best = 0;
  bool stop = false;
  const int start_epoch = ts.epoch;
  for (int epoch = start_epoch; epoch < cfg.epochs && !stop; ++epoch) {
    std::vector<std::size_t> order(train_data.size());
    std::iota(order.begin(), order.end(), 0);
    shuffle_rng.shuffle(order);
    for (std::size_t pos = 0; pos < order.size() && !stop;) {
      const std::size_t batch_end =
          std::min(order.size(), pos + static_cast<std::size_t>(cfg.batch_size));
      const double inv = 1.0 / static_cast<double>(batch_end - pos);
      model.params().zero_grads();
      double l1_sum = 0.0, l2_sum = 0.0;
      for (; pos < batch_end; ++pos) {
        const EncodedSentence& s = train_data[order[pos]];
        Graph g(model.params());
        Model::LossParts parts = model.build_losses(g, s.x_ids, s.m, s.y_ids);
        l1_sum += g.tape().value(parts.main)(0, 0);
        if (parts.has_aux) l2_sum += g.tape().value(parts.aux)(0, 0);
        g.backward_and_accumulate(parts.total, inv);
      }
      const double l1 = l1_sum * inv;
      const double l2 = l2_sum * inv;
      const double l = l1 + mc.alpha * l2;
      if (!std::isfinite(l))
        throw DivergenceError(ts.step + 1, "batch loss is not finite (l1=" +
                                               std::to_string(l1) + ", l2=" + std::to_string(l2) +
                                               ")");
      model.params().adam_step_all(cfg.learning_rate);
      ++ts.step;
      rec.steps.push_back(StepRecord{ts.step, l1, mc.use_aux ? l2 : 0.0, l});
      if (cfg.max_steps > 0 && ts.step >= cfg.max_steps) stop = true;
    }
    ts.epoch = epoch + 1;
    const bool last_epoch = stop || epoch + 1 >= cfg.epochs;
    if (!val_data.empty() && ((epoch + 1) % cfg.eval_every == 0 || last_epoch)) {
      EvalResult ev = evaluate_model(model, val_data, vocab, cfg.max_out_len);
      rec.epochs.push_back(EpochRecord{epoch, ev.overall.precision, ev.overall.recall,
                                       ev.overall.f1, ev.long_distance.f1,
                                       ev.overall.malformed_count});
      if (ev.overall.f1 > ts.best_f1 || best_values.empty()) {
        ts.best_f1 = ev.overall.f1;
        rec.best_f1 = ev.overall.f1;
        rec.best_epoch = epoch;
        epochs_since_best = 0;
        snapshot();
      } else if (++epochs_since_best >= cfg.patience) {
        stop = true;
      }
    }
  }
  restore();
  rec.final_step = ts.step;
  if (rec.best_epoch < 0) rec.best_f1 = 0.0;
  return rec;
}

// ---- ablation suite ----

struct AblationVariant {
  std::string name;
  bool use_da = true;
  bool use_aux = true;
  MatrixKind kind = MatrixKind::paper;
  double noise_var = 0.0;
};

// Fixed table order; the full model comes last.
inline std::vector<AblationVariant> standard_variants() {
  return {
      {"SSENE-SD", false, true, MatrixKind::paper, 0.0},
      {"SSENE-SC", true, false, MatrixKind::paper, 0.0},
      {"SSENE-SD&SC", false, false, MatrixKind::paper, 0.0},
      {"Random", true, true, MatrixKind::random, 0.0},
      {"Noise(s=0.01)", true, true, MatrixKind::noisy, 0.01},
      {"Noise(s=0.1)", true, true, MatrixKind::noisy, 0.1},
      {"SSENE", true, true, MatrixKind::paper, 0.0},
  };
}

struct AblationRun {
  std::string variant;
  std::uint64_t seed = 0;
  Metrics metrics;
  Metrics long_distance;
  bool failed = false;
  std::string error;
};

struct AblationResult {
  std::vector<AblationVariant> variants;
  std::vector<AblationRun> runs;

  bool any_failed() const {
    for (const auto& r : runs)
      if (r.failed) return true;
    return false;
  }

  std::vector<const AblationRun*> runs_of(const std::string& variant) const {
    std::vector<const AblationRun*> out;
    for (const auto& r : runs)
      if (r.variant == variant && !r.failed) out.push_back(&r);
    return out;
  }

  double mean_f1(const std::string& variant) const {
    return mean_of(variant, [](const AblationRun& r) { return r.metrics.f1; });
  }
  double std_f1(const std::string& variant) const {
    return std_of(variant, [](const AblationRun& r) { return r.metrics.f1; });
  }
  double mean_ld_f1(const std::string& variant) const {
    return mean_of(variant, [](const AblationRun& r) { return r.long_distance.f1; });
  }

  template <class F>
  double mean_of(const std::string& variant, F field) const {
    const auto rs = runs_of(variant);
    if (rs.empty()) return 0.0;
    double s = 0.0;
    for (const auto* r : rs) s += field(*r);
    return s / static_cast<double>(rs.size());
  }

  template <class F>
  double std_of(const std::string& variant, F field) const {
    const auto rs = runs_of(variant);
    if (rs.size() < 2) return 0.0;
    const double mu = mean_of(variant, field);
    double s = 0.0;
    for (const auto* r : rs) s += (field(*r) - mu) * (field(*r) - mu);
    return std::sqrt(s / static_cast<double>(rs.size() - 1));
  }
};

// Trains every variant with every seed on one shared split and scores the
// held-out test portion. A diverging run is recorded as failed; the rest of
// the suite continues.
inline AblationResult run_ablation_suite(const std::vector<AnnotatedSentence>& sentences,
                                         const Vocabulary& vocab, const ModelConfig& base_config,
                                         const TrainConfig& base,
                                         const std::vector<std::uint64_t>& seeds,
                                         std::vector<AblationVariant> variants = {}) {
  if (seeds.empty()) throw ConfigError("ablation: need at least one seed");
  if (variants.empty()) variants = standard_variants();
  const SplitResult parts = split(sentences, SplitSpec{8, 1, 1, base.seed});
  AblationResult result;
  result.variants = variants;
  for (const auto& variant : variants) {
    for (std::uint64_t seed : seeds) {
      AblationRun run;
      run.variant = variant.name;
      run.seed = seed;
      try {
        ModelConfig mc = base_config;
        mc.use_da = variant.use_da;
        mc.use_aux = variant.use_aux;
        TrainConfig tc = base;
        tc.seed = seed;
        tc.matrix_kind = variant.kind;
        tc.noise_var = variant.noise_var;
        Model model(mc, seed);
        train(model, parts.train, parts.val, vocab, tc);
        const auto test_data = encode_corpus(parts.test, vocab, mc.transform, tc.matrix_kind,
                                             tc.noise_var, tc.seed, 0x74657374ull);
        EvalResult ev = evaluate_model(model, test_data, vocab, tc.max_out_len);
        run.metrics = ev.overall;
        run.long_distance = ev.long_distance;
      } catch (const std::exception& e) {
        run.failed = true;
        run.error = e.what();
      }
      result.runs.push_back(std::move(run));
    }
  }
  return result;
}

// Comparison table: one row per run, then mean/std rows per variant.
inline void write_ablation_csv(const std::string& path, const AblationResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write ablation table: " + path);
  out << "variant,seed,f1,precision,recall\n";
  char buf[64];
  const auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
  };
  for (const auto& v : result.variants) {
    for (const auto& r : result.runs) {
      if (r.variant != v.name) continue;
      if (r.failed)
        out << r.variant << "," << r.seed << ",failed,failed,failed\n";
      else
        out << r.variant << "," << r.seed << "," << fmt(r.metrics.f1) << ","
            << fmt(r.metrics.precision) << "," << fmt(r.metrics.recall) << "\n";
    }
    out << v.name << ",mean," << fmt(result.mean_f1(v.name)) << ","
        << fmt(result.mean_of(v.name, [](const AblationRun& r) { return r.metrics.precision; }))
        << ","
        << fmt(result.mean_of(v.name, [](const AblationRun& r) { return r.metrics.recall; }))
        << "\n";
    out << v.name << ",std," << fmt(result.std_f1(v.name)) << ","
        << fmt(result.std_of(v.name, [](const AblationRun& r) { return r.metrics.precision; }))
        << ","
        << fmt(result.std_of(v.name, [](const AblationRun& r) { return r.metrics.recall; }))
        << "\n";
  }
}

}  // namespace ssene
