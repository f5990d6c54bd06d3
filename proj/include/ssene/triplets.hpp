#pragma once

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssene {

// Half-open token span [start, end).
struct Span {
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
  bool overlaps(const Span& o) const { return start < o.end && o.start < end; }
  bool operator==(const Span& o) const = default;
};

// One negation triplet: the negated entity, the trigger, and the span whose
// meaning the trigger negates. Spans index into the source sentence; the
// surface strings are what generation and scoring operate on.
struct NegTriplet {
  Span subject, cue, scope;
  std::string subject_text, cue_text, scope_text;

  bool operator==(const NegTriplet& o) const = default;
};

// Surface-only view used for parsed decoder output.
struct TripletSurface {
  std::string subject, cue, scope;

  bool operator==(const TripletSurface& o) const = default;
};

inline std::string join_tokens(const std::vector<std::string>& toks, const Span& s) {
  std::string out;
  for (int i = s.start; i < s.end; ++i) {
    if (i > s.start) out += ' ';
    out += toks[static_cast<std::size_t>(i)];
  }
  return out;
}

inline NegTriplet make_triplet(const std::vector<std::string>& sentence, Span subject, Span cue,
                               Span scope) {
  NegTriplet t;
  t.subject = subject;
  t.cue = cue;
  t.scope = scope;
  t.subject_text = join_tokens(sentence, subject);
  t.cue_text = join_tokens(sentence, cue);
  t.scope_text = join_tokens(sentence, scope);
  return t;
}

inline const std::string kSepToken = "[S]";
inline const std::string kSeqToken = "[SEQ]";

// Target serialization: subject [S] cue [S] scope, triplets joined by [SEQ],
// ordered by subject start (cue start breaks ties). An empty triplet list
// serializes to an empty sequence.
inline std::vector<std::string> serialize(const std::vector<std::string>& sentence,
                                          std::vector<NegTriplet> triplets) {
  std::stable_sort(triplets.begin(), triplets.end(), [](const NegTriplet& a, const NegTriplet& b) {
    if (a.subject.start != b.subject.start) return a.subject.start < b.subject.start;
    return a.cue.start < b.cue.start;
  });
  std::vector<std::string> out;
  for (std::size_t k = 0; k < triplets.size(); ++k) {
    if (k) out.push_back(kSeqToken);
    const NegTriplet& t = triplets[k];
    for (const Span* s : {&t.subject, &t.cue, &t.scope}) {
      if (s != &t.subject) out.push_back(kSepToken);
      for (int i = s->start; i < s->end; ++i) out.push_back(sentence[static_cast<std::size_t>(i)]);
    }
  }
  return out;
}

struct ParseDiagnostics {
  int parsed = 0;
  int malformed = 0;
};

// Inverse of serialize on surfaces. Decoder output can be arbitrary, so this
// never throws: fragments that do not split into exactly three nonempty
// parts are counted as malformed and dropped.
inline std::pair<std::vector<TripletSurface>, ParseDiagnostics> parse(
    const std::vector<std::string>& seq) {
  std::vector<TripletSurface> out;
  ParseDiagnostics diag;
  std::vector<std::vector<std::string>> fragments(1);
  for (const auto& tok : seq) {
    if (tok == kSeqToken)
      fragments.emplace_back();
    else
      fragments.back().push_back(tok);
  }
  if (fragments.size() == 1 && fragments[0].empty()) return {out, diag};
  for (const auto& frag : fragments) {
    std::vector<std::string> parts(1);
    for (const auto& tok : frag) {
      if (tok == kSepToken) {
        parts.emplace_back();
      } else {
        if (!parts.back().empty()) parts.back() += ' ';
        parts.back() += tok;
      }
    }
    if (parts.size() == 3 && !parts[0].empty() && !parts[1].empty() && !parts[2].empty()) {
      out.push_back(TripletSurface{parts[0], parts[1], parts[2]});
      ++diag.parsed;
    } else {
      ++diag.malformed;
    }
  }
  return {out, diag};
}

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long long tp = 0;
  long long pred_count = 0;
  long long gold_count = 0;
  long long malformed_count = 0;
};

struct AlignmentError : std::runtime_error {
  explicit AlignmentError(const std::string& what) : std::runtime_error(what) {}
};

// Exact-match scoring: a prediction is a true positive only when subject,
// cue and scope all string-equal an unconsumed gold triplet of the same
// sentence (multiset semantics). Empty denominators score 0.
inline Metrics evaluate(const std::vector<std::vector<TripletSurface>>& pred,
                        const std::vector<std::vector<TripletSurface>>& gold) {
  if (pred.size() != gold.size())
    throw AlignmentError("evaluate: " + std::to_string(pred.size()) + " prediction lists vs " +
                         std::to_string(gold.size()) + " gold lists");
  Metrics m;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    std::vector<bool> used(gold[s].size(), false);
    m.pred_count += static_cast<long long>(pred[s].size());
    m.gold_count += static_cast<long long>(gold[s].size());
    for (const auto& p : pred[s]) {
      for (std::size_t g = 0; g < gold[s].size(); ++g) {
        if (!used[g] && gold[s][g] == p) {
          used[g] = true;
          ++m.tp;
          break;
        }
      }
    }
  }
  m.precision = m.pred_count ? static_cast<double>(m.tp) / static_cast<double>(m.pred_count) : 0.0;
  m.recall = m.gold_count ? static_cast<double>(m.tp) / static_cast<double>(m.gold_count) : 0.0;
  m.f1 = (m.precision + m.recall) > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

// Flat key: value report, one metric per line.
inline std::string metrics_report(const Metrics& m) {
  std::ostringstream os;
  os << "f1: " << m.f1 << "\n"
     << "precision: " << m.precision << "\n"
     << "recall: " << m.recall << "\n"
     << "tp: " << m.tp << "\n"
     << "pred_count: " << m.pred_count << "\n"
     << "gold_count: " << m.gold_count << "\n"
     << "malformed_count: " << m.malformed_count << "\n";
  return os.str();
}

}  // namespace ssene
