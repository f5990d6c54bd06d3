#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssene/deptree.hpp"
#include "ssene/rng.hpp"
#include "ssene/triplets.hpp"

namespace ssene {

// A tokenized sentence with its dependency heads and gold triplets.
struct AnnotatedSentence {
  std::vector<std::string> tokens;
  std::vector<int> heads;
  std::vector<NegTriplet> triplets;
};

struct LoadError : std::runtime_error {
  int line;
  LoadError(int line_no, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + what), line(line_no) {}
};

// ---- annotation constraints ----

struct Violation {
  int sentence = 0;
  std::string code;
  std::string detail;
};

namespace detail {

inline void check_span(const Span& s, int n, const std::string& name,
                       std::vector<Violation>& out, int sent) {
  if (s.end < s.start) {
    out.push_back({sent, "NONCONTIGUOUS", name + " span [" + std::to_string(s.start) + "," +
                                              std::to_string(s.end) + ") is reversed"});
    return;
  }
  if (s.start == s.end) {
    out.push_back({sent, "EMPTY_ELEMENT", name + " span is empty"});
    return;
  }
  if (s.start < 0 || s.end > n)
    out.push_back({sent, "OUT_OF_BOUNDS", name + " span [" + std::to_string(s.start) + "," +
                                              std::to_string(s.end) + ") exceeds " +
                                              std::to_string(n) + " tokens"});
}

inline std::vector<Violation> check_sentence(const AnnotatedSentence& s, int index) {
  std::vector<Violation> out;
  try {
    validate_tree(s.heads);
    if (s.heads.size() != s.tokens.size())
      out.push_back({index, "INVALID_TREE", "head count differs from token count"});
  } catch (const TreeError& e) {
    out.push_back({index, "INVALID_TREE", e.what()});
  }
  const int n = static_cast<int>(s.tokens.size());
  for (std::size_t t = 0; t < s.triplets.size(); ++t) {
    const NegTriplet& tr = s.triplets[t];
    const std::string tag = "triplet " + std::to_string(t);
    check_span(tr.subject, n, tag + " subject", out, index);
    check_span(tr.cue, n, tag + " cue", out, index);
    check_span(tr.scope, n, tag + " scope", out, index);
    const std::pair<const Span*, const char*> spans[] = {
        {&tr.subject, "subject"}, {&tr.cue, "cue"}, {&tr.scope, "scope"}};
    for (int a = 0; a < 3; ++a)
      for (int b = a + 1; b < 3; ++b)
        if (spans[a].first->length() > 0 && spans[b].first->length() > 0 &&
            spans[a].first->overlaps(*spans[b].first))
          out.push_back({index, "OVERLAP", tag + " " + std::string(spans[a].second) +
                                               " overlaps " + spans[b].second});
  }
  return out;
}

}  // namespace detail

struct ValidationReport {
  std::vector<Violation> violations;
  int sentences_checked = 0;

  bool ok() const { return violations.empty(); }
};

// Report-only pass over already-loaded sentences; the same checks gate load.
inline ValidationReport validate_annotations(const std::vector<AnnotatedSentence>& sentences) {
  ValidationReport report;
  report.sentences_checked = static_cast<int>(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    auto v = detail::check_sentence(sentences[i], static_cast<int>(i));
    report.violations.insert(report.violations.end(), v.begin(), v.end());
  }
  return report;
}

// ---- file format ----
//
// Line-delimited records, UTF-8. The first line is a header object carrying
// format_version; each following line is one sentence:
//   {"tokens":[...],"heads":[...],"triplets":[{"subject":[s,e),...},...]}

inline constexpr int kFormatVersion = 1;

inline void save(const std::string& path, const std::vector<AnnotatedSentence>& sentences) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write corpus file: " + path);
  out << nlohmann::ordered_json{{"format_version", kFormatVersion}}.dump() << "\n";
  for (const auto& s : sentences) {
    nlohmann::ordered_json rec;
    rec["tokens"] = s.tokens;
    rec["heads"] = s.heads;
    rec["triplets"] = nlohmann::ordered_json::array();
    for (const auto& t : s.triplets) {
      rec["triplets"].push_back(nlohmann::ordered_json{{"subject", {t.subject.start, t.subject.end}},
                                                       {"cue", {t.cue.start, t.cue.end}},
                                                       {"scope", {t.scope.start, t.scope.end}}});
    }
    out << rec.dump() << "\n";
  }
}

namespace detail {

// Spans of structurally broken records can point anywhere; surfaces are
// still wanted for reporting, so clamp just for the text.
inline std::string clamped_surface(const std::vector<std::string>& toks, const Span& s) {
  const int n = static_cast<int>(toks.size());
  const Span c{std::clamp(s.start, 0, n), std::clamp(s.end, 0, n)};
  return c.start < c.end ? join_tokens(toks, c) : std::string();
}

inline std::vector<AnnotatedSentence> load_records(const std::string& path, bool strict) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  std::vector<AnnotatedSentence> sentences;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(line_no, std::string("malformed record: ") + e.what());
    }
    if (!header_seen) {
      if (!j.is_object() || !j.contains("format_version") ||
          !j["format_version"].is_number_integer())
        throw LoadError(line_no, "missing format_version header");
      if (j["format_version"].get<int>() != kFormatVersion)
        throw LoadError(line_no, "unsupported format_version " +
                                     std::to_string(j["format_version"].get<int>()));
      header_seen = true;
      continue;
    }
    AnnotatedSentence s;
    try {
      s.tokens = j.at("tokens").get<std::vector<std::string>>();
      s.heads = j.at("heads").get<std::vector<int>>();
      for (const auto& jt : j.at("triplets")) {
        auto span_of = [&](const char* key) {
          const auto arr = jt.at(key).get<std::vector<int>>();
          if (arr.size() != 2) throw std::runtime_error(std::string(key) + " span needs 2 ints");
          return Span{arr[0], arr[1]};
        };
        NegTriplet t;
        t.subject = span_of("subject");
        t.cue = span_of("cue");
        t.scope = span_of("scope");
        s.triplets.push_back(t);
      }
    } catch (const std::exception& e) {
      throw LoadError(line_no, std::string("malformed record: ") + e.what());
    }
    if (strict) {
      const auto violations = detail::check_sentence(s, static_cast<int>(sentences.size()));
      if (!violations.empty())
        throw LoadError(line_no, violations[0].code + ": " + violations[0].detail);
    }
    for (auto& t : s.triplets) {
      t.subject_text = clamped_surface(s.tokens, t.subject);
      t.cue_text = clamped_surface(s.tokens, t.cue);
      t.scope_text = clamped_surface(s.tokens, t.scope);
    }
    sentences.push_back(std::move(s));
  }
  return sentences;
}

}  // namespace detail

// Strict loading: the file is rejected atomically at the first record that
// violates the annotation constraints, citing the line.
inline std::vector<AnnotatedSentence> load(const std::string& path) {
  return detail::load_records(path, true);
}

// Parses without constraint checking so validate_annotations can report
// every violation instead of stopping at the first.
inline std::vector<AnnotatedSentence> load_lenient(const std::string& path) {
  return detail::load_records(path, false);
}

// ---- inter-annotator agreement ----

// Cohen's kappa over aligned categorical judgments. Returns nullopt when the
// expected agreement is 1 (constant labels on both sides), where kappa is
// undefined.
inline std::optional<double> cohens_kappa(const std::vector<int>& ann_a,
                                          const std::vector<int>& ann_b) {
  if (ann_a.size() != ann_b.size())
    throw std::invalid_argument("cohens_kappa: label sequences differ in length");
  if (ann_a.empty()) throw std::invalid_argument("cohens_kappa: empty label sequences");
  const double n = static_cast<double>(ann_a.size());
  double observed = 0.0;
  std::vector<int> cats;
  for (std::size_t i = 0; i < ann_a.size(); ++i) {
    if (ann_a[i] == ann_b[i]) observed += 1.0;
    cats.push_back(ann_a[i]);
    cats.push_back(ann_b[i]);
  }
  std::sort(cats.begin(), cats.end());
  cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
  double expected = 0.0;
  for (int c : cats) {
    double pa = 0.0, pb = 0.0;
    for (std::size_t i = 0; i < ann_a.size(); ++i) {
      pa += ann_a[i] == c ? 1.0 : 0.0;
      pb += ann_b[i] == c ? 1.0 : 0.0;
    }
    expected += (pa / n) * (pb / n);
  }
  const double po = observed / n;
  if (expected >= 1.0 - 1e-15) return std::nullopt;
  return (po - expected) / (1.0 - expected);
}

// ---- splitting ----

struct SplitSpec {
  int train = 8, val = 1, test = 1;
  std::uint64_t seed = 0;
};

struct SplitResult {
  std::vector<AnnotatedSentence> train, val, test;
};

// Seeded shuffle, then contiguous cuts at the ratio boundaries.
inline SplitResult split(const std::vector<AnnotatedSentence>& sentences, const SplitSpec& spec) {
  if (spec.train <= 0 || spec.val <= 0 || spec.test <= 0)
    throw std::invalid_argument("split: ratios must be positive");
  if (sentences.size() < 10) throw std::invalid_argument("split: need at least 10 sentences");
  std::vector<std::size_t> order(sentences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(spec.seed);
  rng.shuffle(order);
  const std::size_t total = static_cast<std::size_t>(spec.train + spec.val + spec.test);
  const std::size_t n_train = sentences.size() * static_cast<std::size_t>(spec.train) / total;
  const std::size_t n_val = sentences.size() * static_cast<std::size_t>(spec.val) / total;
  SplitResult out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const AnnotatedSentence& s = sentences[order[i]];
    if (i < n_train)
      out.train.push_back(s);
    else if (i < n_train + n_val)
      out.val.push_back(s);
    else
      out.test.push_back(s);
  }
  return out;
}

// ---- long-distance bookkeeping ----

inline int token_gap(const Span& subject, const Span& cue) {
  if (subject.end <= cue.start) return cue.start - subject.end;
  if (cue.end <= subject.start) return subject.start - cue.end;
  return 0;
}

inline int min_span_tree_distance(const DistanceMatrix& d, const Span& a, const Span& b) {
  int best = d.n;
  for (int i = a.start; i < a.end; ++i)
    for (int j = b.start; j < b.end; ++j) best = std::min(best, d.at(i, j));
  return best;
}

// A triplet is long-distance when the subject sits linearly far from the cue
// (gap >= 4 tokens) yet close on the tree (path <= 3 edges) — the situation
// the dependency-attention layer is built for.
inline bool is_long_distance(const DistanceMatrix& d, const NegTriplet& t) {
  return token_gap(t.subject, t.cue) >= 4 && min_span_tree_distance(d, t.subject, t.cue) <= 3;
}

inline bool has_long_distance_triplet(const AnnotatedSentence& s) {
  const DistanceMatrix d = tree_distances(validate_tree(s.heads));
  for (const auto& t : s.triplets)
    if (is_long_distance(d, t)) return true;
  return false;
}

// ---- synthetic corpus generator ----

enum class Difficulty { easy, medium, hard };

inline Difficulty difficulty_from_string(const std::string& s) {
  if (s == "easy") return Difficulty::easy;
  if (s == "medium") return Difficulty::medium;
  if (s == "hard") return Difficulty::hard;
  throw std::invalid_argument("unknown difficulty: " + s);
}

struct GeneratorStats {
  int sentences = 0;
  int triplets = 0;
  int adjacent = 0;
  int long_filler = 0;
  int appositive_far = 0;
  int appositive_near = 0;
  int multi_clause = 0;
  int long_distance_triplets = 0;
  double long_distance_share = 0.0;
  int max_token_gap = 0;
  double max_gap_over_tree_distance = 0.0;
};

// Audit computed from an emitted corpus (any corpus in the record format).
inline GeneratorStats audit_corpus(const std::vector<AnnotatedSentence>& sentences) {
  GeneratorStats st;
  st.sentences = static_cast<int>(sentences.size());
  for (const auto& s : sentences) {
    const DistanceMatrix d = tree_distances(validate_tree(s.heads));
    for (const auto& t : s.triplets) {
      ++st.triplets;
      const int gap = token_gap(t.subject, t.cue);
      const int dist = min_span_tree_distance(d, t.subject, t.cue);
      st.max_token_gap = std::max(st.max_token_gap, gap);
      if (dist > 0)
        st.max_gap_over_tree_distance =
            std::max(st.max_gap_over_tree_distance, static_cast<double>(gap) / dist);
      if (is_long_distance(d, t)) ++st.long_distance_triplets;
    }
  }
  st.long_distance_share =
      st.triplets ? static_cast<double>(st.long_distance_triplets) / st.triplets : 0.0;
  return st;
}

namespace gen {

struct Entity {
  std::vector<std::string> toks;
};

inline const std::vector<Entity>& entities() {
  static const std::vector<Entity> v = [] {
    std::vector<Entity> e;
    for (const char* w :
         {"hotel",    "room",   "pool",     "staff",   "breakfast", "wifi",   "view",
          "lobby",    "garden", "spa",      "bar",     "menu",      "parking", "balcony",
          "shower",   "bed",    "kitchen",  "terrace", "gym",       "sauna",  "elevator",
          "corridor", "reception", "bathroom", "window", "sofa",    "fridge", "heater",
          "curtain",  "buffet"})
      e.push_back(Entity{{w}});
    e.push_back(Entity{{"front", "desk"}});
    e.push_back(Entity{{"room", "service"}});
    e.push_back(Entity{{"tour", "guide"}});
    e.push_back(Entity{{"night", "shift"}});
    e.push_back(Entity{{"wine", "list"}});
    e.push_back(Entity{{"coffee", "machine"}});
    return e;
  }();
  return v;
}

inline const std::vector<std::string>& cues() {
  static const std::vector<std::string> v = {"not", "never", "no", "hardly", "barely", "cannot"};
  return v;
}

inline const std::vector<std::string>& scope_words() {
  static const std::vector<std::string> v = {
      "clean",    "quiet",   "friendly", "fresh",     "tasty", "comfortable", "reliable",
      "spacious", "helpful", "modern",   "bright",    "working", "heated",    "stable",
      "affordable", "polite", "tidy",    "cozy",      "soft",  "warm",        "fast",
      "open",     "available", "stocked", "maintained"};
  return v;
}

inline const std::vector<std::string>& intensifiers() {
  static const std::vector<std::string> v = {"very", "quite", "really"};
  return v;
}

// Filler segment: tokens plus parent links. rel_heads[i] is the in-segment
// parent index, or -1 to attach to the noun the segment modifies.
struct FillerSeg {
  std::vector<std::string> toks;
  std::vector<int> rel_heads;
};

inline const std::vector<FillerSeg>& filler_segments() {
  static const std::vector<FillerSeg> v = {
      {{"famous", "with", "visitors"}, {-1, 0, 1}},
      {{"praised", "by", "guests"}, {-1, 0, 1}},
      {{"loved", "by", "visitors"}, {-1, 0, 1}},
      {{"recently", "renovated"}, {1, -1}},
      {{"located", "upstairs"}, {-1, 0}},
      {{"mentioned", "in", "reviews"}, {-1, 0, 1}},
  };
  return v;
}

struct Builder {
  std::vector<std::string> toks;
  std::vector<int> heads;

  int add(const std::string& tok, int head) {
    toks.push_back(tok);
    heads.push_back(head);
    return static_cast<int>(toks.size()) - 1;
  }

  // entity NP without determiner handling: returns span of entity tokens;
  // internal structure is head-final
  Span add_entity(const Entity& e) {
    const int start = static_cast<int>(toks.size());
    const int head = start + static_cast<int>(e.toks.size()) - 1;
    for (std::size_t i = 0; i < e.toks.size(); ++i)
      add(e.toks[i], static_cast<int>(start + i) == head ? -2 : head);
    return Span{start, head + 1};
  }

  // scope phrase: optional intensifier plus scope word, head-final
  Span add_scope(Rng& rng, bool allow_intensifier) {
    const int start = static_cast<int>(toks.size());
    const bool with_int = allow_intensifier && rng.uniform() < 0.3;
    if (with_int) add(intensifiers()[rng.below(intensifiers().size())], start + 1);
    const int head = add(scope_words()[rng.below(scope_words().size())], -2);
    return Span{start, head + 1};
  }

  int add_filler(Rng& rng, int attach_to, bool allow_distractor,
                 const Entity* distractor) {
    if (allow_distractor && distractor && rng.uniform() < 0.5) {
      // "near the E2" with the distractor entity under the preposition
      const int near_idx = add("near", attach_to);
      const int the_idx = add("the", -2);
      const Span e2 = add_entity(*distractor);
      heads[static_cast<std::size_t>(the_idx)] = e2.end - 1;
      heads[static_cast<std::size_t>(e2.end - 1)] = near_idx;
      return e2.end - 1;
    }
    const FillerSeg& seg = filler_segments()[rng.below(filler_segments().size())];
    const int base = static_cast<int>(toks.size());
    for (std::size_t i = 0; i < seg.toks.size(); ++i) {
      const int rel = seg.rel_heads[i];
      add(seg.toks[i], rel < 0 ? attach_to : base + rel);
    }
    return -1;
  }
};

}  // namespace gen

// Template-grammar corpus with dependency heads and gold triplets emitted by
// construction. Difficulty shifts the pattern mix: `easy` is mostly
// adjacent subject-cue pairs, `hard` is dominated by long-distance subjects
// (filler or appositive material between subject and cue) and multi-triplet
// sentences with distractor entities. Appositive sentences come in two tree
// variants over an identical surface, so the attachment — not the word
// order — decides which entity is the subject.
inline std::vector<AnnotatedSentence> generate_synthetic(int n_sentences, Difficulty difficulty,
                                                         std::uint64_t seed) {
  using namespace gen;
  Rng rng(seed);
  std::vector<AnnotatedSentence> out;
  out.reserve(static_cast<std::size_t>(n_sentences));

  // pattern mix per difficulty: adjacent, long-filler, appositive, multi
  double p_adjacent = 0.8, p_filler = 0.1, p_appositive = 0.05, far_ratio = 0.4;
  int max_clauses = 2;
  bool multi_leads_long = false;
  switch (difficulty) {
    case Difficulty::easy:
      p_adjacent = 0.8;
      p_filler = 0.15;
      p_appositive = 0.0;
      max_clauses = 2;
      break;
    case Difficulty::medium:
      p_adjacent = 0.5;
      p_filler = 0.18;
      p_appositive = 0.12;
      max_clauses = 2;
      break;
    case Difficulty::hard:
      p_adjacent = 0.2;
      p_filler = 0.25;
      p_appositive = 0.30;
      max_clauses = 3;
      multi_leads_long = true;
      break;
  }

  auto pick_entity = [&](const Entity* avoid) -> const Entity& {
    for (;;) {
      const Entity& e = entities()[rng.below(entities().size())];
      if (!avoid || e.toks != avoid->toks) return e;
    }
  };

  auto add_plain_clause = [&](gen::Builder& b, const Entity& ent,
                              int attach_root_to) -> std::pair<NegTriplet, int> {
    const int the_idx = b.add("the", -2);
    const Span subj = b.add_entity(ent);
    b.heads[static_cast<std::size_t>(the_idx)] = subj.end - 1;
    const int was_idx = b.add("was", attach_root_to);
    b.heads[static_cast<std::size_t>(subj.end - 1)] = was_idx;
    const int cue_idx = b.add(cues()[rng.below(cues().size())], -2);
    const Span scope = b.add_scope(rng, true);
    b.heads[static_cast<std::size_t>(cue_idx)] = scope.end - 1;
    b.heads[static_cast<std::size_t>(scope.end - 1)] = was_idx;
    NegTriplet t;
    t.subject = subj;
    t.cue = Span{cue_idx, cue_idx + 1};
    t.scope = scope;
    return {t, was_idx};
  };

  auto add_filler_clause = [&](gen::Builder& b, const Entity& ent,
                               int attach_root_to) -> std::pair<NegTriplet, int> {
    const int the_idx = b.add("the", -2);
    const Span subj = b.add_entity(ent);
    const int subj_head = subj.end - 1;
    b.heads[static_cast<std::size_t>(the_idx)] = subj_head;
    b.add(",", subj_head);
    const Entity& distractor = pick_entity(&ent);
    b.add_filler(rng, subj_head, true, &distractor);
    if (rng.uniform() < 0.35) {
      const int and_idx = b.add("and", -2);
      const int before = static_cast<int>(b.toks.size());
      b.add_filler(rng, subj_head, false, nullptr);
      b.heads[static_cast<std::size_t>(and_idx)] = before;  // head of second segment
    }
    b.add(",", subj_head);
    const int was_idx = b.add("was", attach_root_to);
    b.heads[static_cast<std::size_t>(subj_head)] = was_idx;
    const int cue_idx = b.add(cues()[rng.below(cues().size())], -2);
    const Span scope = b.add_scope(rng, true);
    b.heads[static_cast<std::size_t>(cue_idx)] = scope.end - 1;
    b.heads[static_cast<std::size_t>(scope.end - 1)] = was_idx;
    NegTriplet t;
    t.subject = subj;
    t.cue = Span{cue_idx, cue_idx + 1};
    t.scope = scope;
    return {t, was_idx};
  };

  for (int n = 0; n < n_sentences; ++n) {
    gen::Builder b;
    std::vector<NegTriplet> triplets;
    const double roll = rng.uniform();

    if (roll < p_adjacent) {
      auto [t, root] = add_plain_clause(b, pick_entity(nullptr), -1);
      b.add(".", root);
      triplets.push_back(t);
    } else if (roll < p_adjacent + p_filler) {
      auto [t, root] = add_filler_clause(b, pick_entity(nullptr), -1);
      b.add(".", root);
      triplets.push_back(t);
    } else if (roll < p_adjacent + p_filler + p_appositive) {
      // identical surface, two possible attachments; the tree picks the subject
      const Entity& e1 = pick_entity(nullptr);
      const Entity& e2 = pick_entity(&e1);
      const bool far_subject = rng.uniform() < far_ratio;
      const int the1 = b.add("the", -2);
      const Span s1 = b.add_entity(e1);
      b.heads[static_cast<std::size_t>(the1)] = s1.end - 1;
      const int comma1 = b.add(",", -2);
      const int the2 = b.add("the", -2);
      const Span s2 = b.add_entity(e2);
      b.heads[static_cast<std::size_t>(the2)] = s2.end - 1;
      const int comma2 = b.add(",", -2);
      const int was_idx = b.add("was", -1);
      const int cue_idx = b.add(cues()[rng.below(cues().size())], -2);
      const Span scope = b.add_scope(rng, true);
      b.heads[static_cast<std::size_t>(cue_idx)] = scope.end - 1;
      b.heads[static_cast<std::size_t>(scope.end - 1)] = was_idx;
      b.add(".", was_idx);
      const int h1 = s1.end - 1, h2 = s2.end - 1;
      if (far_subject) {
        // e2 is an apposition under e1
        b.heads[static_cast<std::size_t>(h1)] = was_idx;
        b.heads[static_cast<std::size_t>(h2)] = h1;
        b.heads[static_cast<std::size_t>(comma1)] = h2;
        b.heads[static_cast<std::size_t>(comma2)] = h2;
      } else {
        // e1 is a fronted apposition of e2
        b.heads[static_cast<std::size_t>(h2)] = was_idx;
        b.heads[static_cast<std::size_t>(h1)] = h2;
        b.heads[static_cast<std::size_t>(comma1)] = h1;
        b.heads[static_cast<std::size_t>(comma2)] = h1;
      }
      NegTriplet t;
      t.subject = far_subject ? s1 : s2;
      t.cue = Span{cue_idx, cue_idx + 1};
      t.scope = scope;
      triplets.push_back(t);
    } else {
      // multi-triplet sentence, clauses joined under the first verb
      const int k = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_clauses - 1)));
      std::vector<const Entity*> used;
      int first_root = -1;
      for (int c = 0; c < k; ++c) {
        const Entity* avoid = used.empty() ? nullptr : used.back();
        const Entity& ent = pick_entity(avoid);
        used.push_back(&ent);
        int joiner = -1;
        if (c > 0) joiner = b.add(rng.uniform() < 0.5 ? "and" : "but", -2);
        const bool lead_long = multi_leads_long && c == 0;
        auto [t, root] = lead_long ? add_filler_clause(b, ent, -2)
                                   : add_plain_clause(b, ent, -2);
        if (c == 0) {
          b.heads[static_cast<std::size_t>(root)] = -1;
          first_root = root;
        } else {
          b.heads[static_cast<std::size_t>(root)] = first_root;
          b.heads[static_cast<std::size_t>(joiner)] = root;
        }
        triplets.push_back(t);
      }
      b.add(".", first_root);
    }

    AnnotatedSentence s;
    s.tokens = b.toks;
    s.heads = b.heads;
    for (auto& t : triplets) s.triplets.push_back(make_triplet(s.tokens, t.subject, t.cue, t.scope));
    std::stable_sort(s.triplets.begin(), s.triplets.end(),
                     [](const NegTriplet& a, const NegTriplet& b) {
                       if (a.subject.start != b.subject.start)
                         return a.subject.start < b.subject.start;
                       return a.cue.start < b.cue.start;
                     });
    out.push_back(std::move(s));
  }
  return out;
}

// Every token the generator can emit, in a fixed order. Model vocabularies
// built from this set are stable across corpora drawn from it.
inline std::vector<std::string> synthetic_vocabulary() {
  using namespace gen;
  std::vector<std::string> v = {"the", "was", "and", "but", "near", ",", "."};
  for (const auto& e : entities())
    for (const auto& t : e.toks) v.push_back(t);
  for (const auto& c : cues()) v.push_back(c);
  for (const auto& s : scope_words()) v.push_back(s);
  for (const auto& i : intensifiers()) v.push_back(i);
  for (const auto& seg : filler_segments())
    for (const auto& t : seg.toks) v.push_back(t);
  std::vector<std::string> uniq;
  for (const auto& t : v)
    if (std::find(uniq.begin(), uniq.end(), t) == uniq.end()) uniq.push_back(t);
  return uniq;
}

}  // namespace ssene
