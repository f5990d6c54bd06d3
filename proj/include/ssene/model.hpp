#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ssene/autodiff.hpp"
#include "ssene/matrix.hpp"
#include "ssene/rng.hpp"
#include "ssene/synattn.hpp"
#include "ssene/vocab.hpp"

namespace ssene {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct CheckpointError : std::runtime_error {
  explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 64;
  int head_count = 4;
  int enc_layers = 2;
  int dec_layers = 2;
  int ffn_hidden = 128;
  int max_len = 48;
  double alpha = 0.5;  // weight of the auxiliary loss
  TransformParams transform;
  bool use_da = true;          // dependency-attention sublayers
  bool use_aux = true;         // semantic-consistency auxiliary task
  bool use_positional = true;  // learned absolute position embeddings
  bool aux_reverse_kl = false; // study knob: swap the KL arguments

  void validate() const {
    if (vocab_size <= 0) throw ConfigError("config: vocab_size must be positive");
    if (d_model <= 0 || head_count <= 0 || d_model % head_count != 0)
      throw ConfigError("config: d_model must be a positive multiple of head_count");
    if (enc_layers <= 0 || dec_layers <= 0) throw ConfigError("config: need at least one layer");
    if (ffn_hidden <= 0) throw ConfigError("config: ffn_hidden must be positive");
    if (max_len <= 0) throw ConfigError("config: max_len must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("config: alpha must lie in (0,1)");
    transform.check();
  }

  bool same_shape_as(const ModelConfig& o) const {
    return vocab_size == o.vocab_size && d_model == o.d_model && head_count == o.head_count &&
           enc_layers == o.enc_layers && dec_layers == o.dec_layers &&
           ffn_hidden == o.ffn_hidden && max_len == o.max_len && use_da == o.use_da &&
           use_positional == o.use_positional;
  }
};

// Named parameter tensors with gradient accumulators and Adam state.
// Insertion order is fixed by construction, which keeps updates and
// checkpoints deterministic.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Matrix value;
    Matrix grad;
    AdamState adam;
  };

  Matrix& create(const std::string& name, int rows, int cols, Rng& rng, double stddev) {
    Entry e;
    e.name = name;
    e.value = Matrix::random_normal(rows, cols, rng, stddev);
    e.grad = Matrix(rows, cols);
    return insert(std::move(e));
  }

  Matrix& create_const(const std::string& name, int rows, int cols, double fill) {
    Entry e;
    e.name = name;
    e.value = Matrix(rows, cols, fill);
    e.grad = Matrix(rows, cols);
    return insert(std::move(e));
  }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  Matrix& value(const std::string& name) { return entry(name).value; }
  const Matrix& value(const std::string& name) const { return entry(name).value; }
  Matrix& grad(const std::string& name) { return entry(name).grad; }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  void zero_grads() {
    for (auto& e : entries_) e.grad.fill(0.0);
  }

  void adam_step_all(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    for (auto& e : entries_) adam_step(e.value, e.grad, e.adam, lr, beta1, beta2, eps);
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

 private:
  Entry& entry_ref(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return entries_[it->second];
  }
  Entry& entry(const std::string& name) { return entry_ref(name); }
  const Entry& entry(const std::string& name) const {
    return const_cast<ParamStore*>(this)->entry_ref(name);
  }

  Matrix& insert(Entry&& e) {
    if (index_.count(e.name)) throw ConfigError("duplicate parameter: " + e.name);
    index_.emplace(e.name, entries_.size());
    entries_.push_back(std::move(e));
    return entries_.back().value;
  }

  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// One forward computation over a parameter store: a tape plus a cache that
// maps each parameter to a single leaf, so every use of a shared weight
// accumulates into one gradient.
class Graph {
 public:
  explicit Graph(ParamStore& store) : store_(&store) {}

  Tape& tape() { return tape_; }

  Var param(const std::string& name) {
    auto it = leaves_.find(name);
    if (it != leaves_.end()) return it->second;
    Var v = tape_.leaf(store_->value(name));
    leaves_.emplace(name, v);
    return v;
  }

  // Backward from a scalar loss; leaf gradients are scaled and added into
  // the store's accumulators.
  void backward_and_accumulate(Var loss, double scale = 1.0) {
    tape_.backward(loss);
    for (const auto& [name, var] : leaves_) {
      Matrix& dst = store_->grad(name);
      const Matrix& src = tape_.grad(var);
      auto& d = dst.data();
      const auto& s = src.data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += scale * s[i];
    }
  }

  const Matrix& leaf_grad(const std::string& name) { return tape_.grad(param(name)); }

 private:
  Tape tape_;
  ParamStore* store_;
  std::unordered_map<std::string, Var> leaves_;
};

// Captured first-layer dependency-attention maps, averaged over heads:
// `before` is softmax(QK^T) on its own, `after` the association-biased
// attention actually used.
struct AttentionCapture {
  Matrix before;
  Matrix after;
  bool has = false;
};

struct TrainState {
  long long step = 0;
  int epoch = 0;
  double best_f1 = 0.0;
};

// The full network. E_dep (syntax-aware) and E_sa (plain) share every
// self-attention / FFN / layer-norm weight; dependency-attention weights
// exist only on the E_dep path. The decoder is a standard causal
// transformer with cross-attention over the encoder output.
class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(init_seed);
    const int d = cfg_.d_model;
    const double sd = 0.02;
    store_.create("tok_embed", cfg_.vocab_size, d, rng, sd);
    store_.create("pos_embed", cfg_.max_len, d, rng, sd);
    for (int l = 0; l < cfg_.enc_layers; ++l) {
      const std::string p = "enc" + std::to_string(l);
      add_layer_norm(p + ".ln_sa");
      add_attention(p + ".sa", rng);
      add_layer_norm(p + ".ln_da");
      add_attention(p + ".da", rng);
      add_layer_norm(p + ".ln_ffn");
      add_ffn(p + ".ffn", rng);
    }
    add_layer_norm("enc.ln_out");
    for (int l = 0; l < cfg_.dec_layers; ++l) {
      const std::string p = "dec" + std::to_string(l);
      add_layer_norm(p + ".ln_self");
      add_attention(p + ".self", rng);
      add_layer_norm(p + ".ln_cross");
      add_attention(p + ".cross", rng);
      add_layer_norm(p + ".ln_ffn");
      add_ffn(p + ".ffn", rng);
    }
    add_layer_norm("dec.ln_out");
    store_.create("out_proj.w", d, cfg_.vocab_size, rng, sd);
    store_.create_const("out_proj.b", 1, cfg_.vocab_size, 0.0);
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  long long dep_forward_count() const { return dep_forwards_; }
  long long plain_forward_count() const { return plain_forwards_; }

  // ---- encoders ----

  Var encode_dep(Graph& g, const std::vector<int>& tokens, const Matrix& m,
                 AttentionCapture* capture = nullptr) {
    ++dep_forwards_;
    return encode(g, tokens, cfg_.use_da ? &m : nullptr, capture);
  }

  Var encode_plain(Graph& g, const std::vector<int>& tokens) {
    ++plain_forwards_;
    return encode(g, tokens, nullptr, nullptr);
  }

  // Mean over positions, then a softmax so the result is a distribution the
  // KL term can consume.
  Var pool(Graph& g, Var h) { return g.tape().softmax_rows(g.tape().mean_rows(h)); }

  // ---- decoder ----

  // Teacher-forced pass: next-token distributions at every prefix position.
  Var decode(Graph& g, Var encoder_out, const std::vector<int>& target_prefix) {
    Tape& t = g.tape();
    Var h = embed(g, target_prefix);
    for (int l = 0; l < cfg_.dec_layers; ++l) {
      const std::string p = "dec" + std::to_string(l);
      Var normed = layer_norm(g, p + ".ln_self", h);
      h = t.add(h, attention(g, p + ".self", normed, normed, AttnMode::causal, nullptr, nullptr));
      normed = layer_norm(g, p + ".ln_cross", h);
      h = t.add(h, attention(g, p + ".cross", normed, encoder_out, AttnMode::plain, nullptr, nullptr));
      normed = layer_norm(g, p + ".ln_ffn", h);
      h = t.add(h, ffn(g, p + ".ffn", normed));
    }
    h = layer_norm(g, "dec.ln_out", h);
    Var logits = t.add_row(t.matmul(h, g.param("out_proj.w")), g.param("out_proj.b"));
    return t.softmax_rows(logits);
  }

  // ---- losses ----

  struct LossParts {
    Var main;
    Var aux;   // invalid when the auxiliary path is off
    Var total;
    bool has_aux = false;
  };

  LossParts build_losses(Graph& g, const std::vector<int>& x_tokens, const Matrix& m,
                         const std::vector<int>& y_tokens) {
    Tape& t = g.tape();
    LossParts parts;
    Var enc = encode_dep(g, x_tokens, m);
    std::vector<int> dec_input{Vocabulary::kBos};
    dec_input.insert(dec_input.end(), y_tokens.begin(), y_tokens.end());
    std::vector<int> targets = y_tokens;
    targets.push_back(Vocabulary::kEos);
    Var probs = decode(g, enc, dec_input);
    parts.main = t.cross_entropy(probs, targets);
    if (cfg_.use_aux && !y_tokens.empty()) {
      Var triplet_emb = pool(g, encode_plain(g, y_tokens));
      Var sentence_emb = pool(g, enc);
      parts.aux = cfg_.aux_reverse_kl ? t.kl_divergence(sentence_emb, triplet_emb)
                                      : t.kl_divergence(triplet_emb, sentence_emb);
      parts.total = t.add(parts.main, t.scale(parts.aux, cfg_.alpha));
      parts.has_aux = true;
    } else {
      parts.total = parts.main;
    }
    return parts;
  }

  double loss_main(const std::vector<int>& x, const Matrix& m, const std::vector<int>& y) {
    Graph g(store_);
    return g.tape().value(build_losses(g, x, m, y).main)(0, 0);
  }

  double loss_aux(const std::vector<int>& x, const Matrix& m, const std::vector<int>& y) {
    Graph g(store_);
    LossParts p = build_losses(g, x, m, y);
    return p.has_aux ? g.tape().value(p.aux)(0, 0) : 0.0;
  }

  double loss_total(const std::vector<int>& x, const Matrix& m, const std::vector<int>& y) {
    Graph g(store_);
    return g.tape().value(build_losses(g, x, m, y).total)(0, 0);
  }

  // ---- inference ----

  // Greedy decoding from [BOS] until [EOS] or the length budget runs out.
  // Only the syntax-aware encoder runs here.
  std::vector<int> generate(const std::vector<int>& x_tokens, const Matrix& m, int max_out_len,
                            AttentionCapture* capture = nullptr) {
    Graph g(store_);
    Var enc = encode_dep(g, x_tokens, m, capture);
    std::vector<int> prefix{Vocabulary::kBos};
    std::vector<int> out;
    while (static_cast<int>(out.size()) < max_out_len &&
           static_cast<int>(prefix.size()) < cfg_.max_len) {
      Var probs = decode(g, enc, prefix);
      const Matrix& pm = g.tape().value(probs);
      const int last = pm.rows() - 1;
      int best = 0;
      for (int j = 1; j < pm.cols(); ++j)
        if (pm(last, j) > pm(last, best)) best = j;
      if (best == Vocabulary::kEos) break;
      out.push_back(best);
      prefix.push_back(best);
    }
    return out;
  }

 private:
  enum class AttnMode { plain, causal, dep };

  void add_layer_norm(const std::string& name) {
    store_.create_const(name + ".g", 1, cfg_.d_model, 1.0);
    store_.create_const(name + ".b", 1, cfg_.d_model, 0.0);
  }

  void add_attention(const std::string& name, Rng& rng) {
    const int d = cfg_.d_model;
    store_.create(name + ".wq", d, d, rng, 0.02);
    store_.create(name + ".wk", d, d, rng, 0.02);
    store_.create(name + ".wv", d, d, rng, 0.02);
    store_.create(name + ".wo", d, d, rng, 0.02);
  }

  void add_ffn(const std::string& name, Rng& rng) {
    store_.create(name + ".w1", cfg_.d_model, cfg_.ffn_hidden, rng, 0.02);
    store_.create_const(name + ".b1", 1, cfg_.ffn_hidden, 0.0);
    store_.create(name + ".w2", cfg_.ffn_hidden, cfg_.d_model, rng, 0.02);
    store_.create_const(name + ".b2", 1, cfg_.d_model, 0.0);
  }

  Var layer_norm(Graph& g, const std::string& name, Var x) {
    return g.tape().layer_norm(x, g.param(name + ".g"), g.param(name + ".b"));
  }

  Var ffn(Graph& g, const std::string& name, Var x) {
    Tape& t = g.tape();
    Var h = t.add_row(t.matmul(x, g.param(name + ".w1")), g.param(name + ".b1"));
    h = t.gelu(h);
    return t.add_row(t.matmul(h, g.param(name + ".w2")), g.param(name + ".b2"));
  }

  // Multi-head attention. The association matrix applies identically to
  // every head's scores; it biases logits multiplicatively and is not
  // learned.
  Var attention(Graph& g, const std::string& name, Var x_q, Var x_kv, AttnMode mode,
                const Matrix* m, AttentionCapture* capture) {
    Tape& t = g.tape();
    const int d_head = cfg_.d_model / cfg_.head_count;
    Var q = t.matmul(x_q, g.param(name + ".wq"));
    Var k = t.matmul(x_kv, g.param(name + ".wk"));
    Var v = t.matmul(x_kv, g.param(name + ".wv"));
    std::vector<Var> heads;
    heads.reserve(static_cast<std::size_t>(cfg_.head_count));
    for (int h = 0; h < cfg_.head_count; ++h) {
      const int c0 = h * d_head, c1 = (h + 1) * d_head;
      Var qh = t.slice_cols(q, c0, c1);
      Var kh = t.slice_cols(k, c0, c1);
      Var vh = t.slice_cols(v, c0, c1);
      if (mode == AttnMode::dep) {
        if (capture) {
          Var scores = t.matmul_nt(qh, kh);
          accumulate_capture(capture->before, t.value(t.softmax_rows(scores)));
          Var biased = t.hadamard_const(scores, *m);
          Var attn = t.softmax_rows(biased);
          accumulate_capture(capture->after, t.value(attn));
          heads.push_back(t.matmul(attn, vh));
        } else {
          heads.push_back(dep_attention(t, qh, kh, vh, *m));
        }
      } else {
        heads.push_back(self_attention(t, qh, kh, vh, mode == AttnMode::causal));
      }
    }
    return t.matmul(t.concat_cols(heads), g.param(name + ".wo"));
  }

  static void accumulate_capture(Matrix& dst, const Matrix& head_attn) {
    if (dst.size() == 0)
      dst = head_attn;
    else
      for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += head_attn.data()[i];
  }

  Var embed(Graph& g, const std::vector<int>& tokens) {
    if (tokens.empty()) throw DimensionError("encode: empty token sequence");
    if (static_cast<int>(tokens.size()) > cfg_.max_len)
      throw DimensionError("sequence length " + std::to_string(tokens.size()) +
                           " exceeds max_len " + std::to_string(cfg_.max_len));
    for (int id : tokens)
      if (id < 0 || id >= cfg_.vocab_size)
        throw VocabError("token id " + std::to_string(id) + " outside vocabulary of " +
                         std::to_string(cfg_.vocab_size));
    Tape& t = g.tape();
    Var h = t.gather_rows(g.param("tok_embed"), tokens);
    if (cfg_.use_positional) {
      std::vector<int> pos(tokens.size());
      for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<int>(i);
      h = t.add(h, t.gather_rows(g.param("pos_embed"), pos));
    }
    return h;
  }

  // Shared encoder stack. With an association matrix each layer runs
  // SA -> DA -> FFN; without one the DA sublayer (and its norm) vanish,
  // which is exactly the plain encoder.
  Var encode(Graph& g, const std::vector<int>& tokens, const Matrix* m,
             AttentionCapture* capture) {
    if (m) {
      const int n = static_cast<int>(tokens.size());
      if (m->rows() != n || m->cols() != n)
        throw DimensionError("association matrix must be n x n for the token count");
    }
    Tape& t = g.tape();
    Var h = embed(g, tokens);
    for (int l = 0; l < cfg_.enc_layers; ++l) {
      const std::string p = "enc" + std::to_string(l);
      Var normed = layer_norm(g, p + ".ln_sa", h);
      h = t.add(h, attention(g, p + ".sa", normed, normed, AttnMode::plain, nullptr, nullptr));
      if (m) {
        normed = layer_norm(g, p + ".ln_da", h);
        h = t.add(h, attention(g, p + ".da", normed, normed, AttnMode::dep, m,
                               l == 0 ? capture : nullptr));
      }
      normed = layer_norm(g, p + ".ln_ffn", h);
      h = t.add(h, ffn(g, p + ".ffn", normed));
    }
    if (capture && capture->before.size() != 0) {
      const double inv = 1.0 / cfg_.head_count;
      for (double& v : capture->before.data()) v *= inv;
      for (double& v : capture->after.data()) v *= inv;
      capture->has = true;
    }
    return layer_norm(g, "enc.ln_out", h);
  }

  ModelConfig cfg_;
  ParamStore store_;
  long long dep_forwards_ = 0;
  long long plain_forwards_ = 0;
};

// ---- checkpoint io ----
//
// Versioned binary dump: config, vocabulary, then every named tensor.
// Optionally carries optimizer state so runs can resume with an intact
// step counter.

namespace ckpt {

inline constexpr char kMagic[8] = {'S', 'S', 'E', 'N', 'E', 'C', 'K', '1'};
inline constexpr std::uint32_t kVersion = 1;

inline void write_u32(std::ostream& o, std::uint32_t v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_i64(std::ostream& o, std::int64_t v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_f64(std::ostream& o, double v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_str(std::ostream& o, const std::string& s) {
  write_u32(o, static_cast<std::uint32_t>(s.size()));
  o.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline void write_matrix(std::ostream& o, const Matrix& m) {
  write_u32(o, static_cast<std::uint32_t>(m.rows()));
  write_u32(o, static_cast<std::uint32_t>(m.cols()));
  o.write(reinterpret_cast<const char*>(m.data().data()),
          static_cast<std::streamsize>(m.size() * sizeof(double)));
}

inline std::uint32_t read_u32(std::istream& i) {
  std::uint32_t v = 0;
  i.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!i) throw CheckpointError("checkpoint truncated");
  return v;
}
inline std::int64_t read_i64(std::istream& i) {
  std::int64_t v = 0;
  i.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!i) throw CheckpointError("checkpoint truncated");
  return v;
}
inline double read_f64(std::istream& i) {
  double v = 0;
  i.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!i) throw CheckpointError("checkpoint truncated");
  return v;
}
inline std::string read_str(std::istream& i) {
  const std::uint32_t n = read_u32(i);
  if (n > (1u << 20)) throw CheckpointError("checkpoint string too large");
  std::string s(n, '\0');
  i.read(s.data(), n);
  if (!i) throw CheckpointError("checkpoint truncated");
  return s;
}
inline Matrix read_matrix(std::istream& i) {
  const int rows = static_cast<int>(read_u32(i));
  const int cols = static_cast<int>(read_u32(i));
  Matrix m(rows, cols);
  i.read(reinterpret_cast<char*>(m.data().data()),
         static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!i) throw CheckpointError("checkpoint truncated");
  return m;
}

}  // namespace ckpt

inline void save_checkpoint(const std::string& path, const Model& model, const Vocabulary& vocab,
                            const TrainState* train_state = nullptr) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path);
  out.write(ckpt::kMagic, sizeof ckpt::kMagic);
  ckpt::write_u32(out, ckpt::kVersion);
  const ModelConfig& c = model.config();
  for (int v : {c.vocab_size, c.d_model, c.head_count, c.enc_layers, c.dec_layers, c.ffn_hidden,
                c.max_len})
    ckpt::write_u32(out, static_cast<std::uint32_t>(v));
  ckpt::write_f64(out, c.alpha);
  ckpt::write_f64(out, c.transform.gamma1);
  ckpt::write_f64(out, c.transform.gamma2);
  std::uint32_t flags = 0;
  if (c.use_da) flags |= 1u;
  if (c.use_aux) flags |= 2u;
  if (c.use_positional) flags |= 4u;
  if (c.aux_reverse_kl) flags |= 8u;
  ckpt::write_u32(out, flags);
  ckpt::write_u32(out, static_cast<std::uint32_t>(vocab.size()));
  for (const auto& t : vocab.tokens()) ckpt::write_str(out, t);
  const auto& entries = model.params().entries();
  ckpt::write_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    ckpt::write_str(out, e.name);
    ckpt::write_matrix(out, e.value);
  }
  if (train_state) {
    out.put(1);
    ckpt::write_i64(out, train_state->step);
    ckpt::write_i64(out, train_state->epoch);
    ckpt::write_f64(out, train_state->best_f1);
    for (const auto& e : entries) {
      ckpt::write_i64(out, e.adam.t);
      if (e.adam.t > 0) {
        ckpt::write_matrix(out, e.adam.m);
        ckpt::write_matrix(out, e.adam.v);
      }
    }
  } else {
    out.put(0);
  }
  if (!out) throw CheckpointError("write failed: " + path);
}

struct LoadedCheckpoint {
  ModelConfig config;
  Vocabulary vocab;
  Model model;
  std::optional<TrainState> train_state;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, ckpt::kMagic, sizeof magic) != 0)
    throw CheckpointError("not a checkpoint file: " + path);
  if (ckpt::read_u32(in) != ckpt::kVersion)
    throw CheckpointError("unsupported checkpoint version in " + path);
  ModelConfig c;
  c.vocab_size = static_cast<int>(ckpt::read_u32(in));
  c.d_model = static_cast<int>(ckpt::read_u32(in));
  c.head_count = static_cast<int>(ckpt::read_u32(in));
  c.enc_layers = static_cast<int>(ckpt::read_u32(in));
  c.dec_layers = static_cast<int>(ckpt::read_u32(in));
  c.ffn_hidden = static_cast<int>(ckpt::read_u32(in));
  c.max_len = static_cast<int>(ckpt::read_u32(in));
  c.alpha = ckpt::read_f64(in);
  c.transform.gamma1 = ckpt::read_f64(in);
  c.transform.gamma2 = ckpt::read_f64(in);
  const std::uint32_t flags = ckpt::read_u32(in);
  c.use_da = flags & 1u;
  c.use_aux = flags & 2u;
  c.use_positional = flags & 4u;
  c.aux_reverse_kl = flags & 8u;
  Vocabulary vocab;
  const std::uint32_t vocab_count = ckpt::read_u32(in);
  for (std::uint32_t i = 0; i < vocab_count; ++i) {
    const std::string tok = ckpt::read_str(in);
    if (static_cast<int>(i) < vocab.size()) {
      if (vocab.token(static_cast<int>(i)) != tok)
        throw CheckpointError("reserved token mismatch at id " + std::to_string(i));
    } else {
      vocab.add_token(tok);
    }
  }
  if (vocab.size() != c.vocab_size)
    throw CheckpointError("vocabulary size disagrees with config");
  Model model(c, 0);
  const std::uint32_t param_count = ckpt::read_u32(in);
  if (param_count != model.params().entries().size())
    throw CheckpointError("parameter count disagrees with config");
  for (auto& e : model.params().entries()) {
    const std::string name = ckpt::read_str(in);
    if (name != e.name) throw CheckpointError("parameter order mismatch at " + e.name);
    Matrix m = ckpt::read_matrix(in);
    if (!m.same_shape(e.value)) throw CheckpointError("parameter shape mismatch at " + e.name);
    e.value = std::move(m);
  }
  LoadedCheckpoint loaded{c, std::move(vocab), std::move(model), std::nullopt};
  const int has_state = in.get();
  if (has_state != 0 && has_state != 1) throw CheckpointError("checkpoint truncated");
  if (has_state == 1) {
    TrainState ts;
    ts.step = ckpt::read_i64(in);
    ts.epoch = static_cast<int>(ckpt::read_i64(in));
    ts.best_f1 = ckpt::read_f64(in);
    for (auto& e : loaded.model.params().entries()) {
      e.adam.t = ckpt::read_i64(in);
      if (e.adam.t > 0) {
        e.adam.m = ckpt::read_matrix(in);
        e.adam.v = ckpt::read_matrix(in);
      }
    }
    loaded.train_state = ts;
  }
  return loaded;
}

}  // namespace ssene
