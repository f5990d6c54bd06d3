#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "ssene/rng.hpp"
#include "ssene/triplets.hpp"

using namespace ssene;
using Catch::Approx;

namespace {

const std::vector<std::string> kWords = {"alpha", "beta",  "gamma", "delta", "eps",
                                         "zeta",  "eta",   "theta", "iota",  "kappa"};

std::vector<std::string> random_sentence(int n, Rng& rng) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i)
    out.push_back(kWords[rng.below(kWords.size())]);
  return out;
}

// up to `count` random pairwise-disjoint triplets over an n-token sentence
std::vector<NegTriplet> random_triplets(const std::vector<std::string>& sentence, int count,
                                        Rng& rng) {
  const int n = static_cast<int>(sentence.size());
  std::vector<Span> taken;
  const auto free_span = [&](const Span& s) {
    for (const auto& t : taken)
      if (t.overlaps(s)) return false;
    return true;
  };
  std::vector<NegTriplet> out;
  for (int k = 0; k < count; ++k) {
    Span spans[3];
    bool ok = true;
    for (auto& span : spans) {
      bool placed = false;
      for (int attempt = 0; attempt < 40 && !placed; ++attempt) {
        const int start = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        const int len = 1 + static_cast<int>(rng.below(2));
        const Span cand{start, std::min(n, start + len)};
        if (cand.length() > 0 && free_span(cand)) {
          span = cand;
          taken.push_back(cand);
          placed = true;
        }
      }
      if (!placed) ok = false;
    }
    if (ok) out.push_back(make_triplet(sentence, spans[0], spans[1], spans[2]));
  }
  return out;
}

TripletSurface surface_of(const NegTriplet& t) {
  return {t.subject_text, t.cue_text, t.scope_text};
}

// brute-force maximum matching over exact-equality edges
int max_matching_tp(const std::vector<TripletSurface>& pred,
                    const std::vector<TripletSurface>& gold) {
  std::vector<bool> used(gold.size(), false);
  const std::function<int(std::size_t)> go = [&](std::size_t i) -> int {
    if (i == pred.size()) return 0;
    int best = go(i + 1);  // leave pred[i] unmatched
    for (std::size_t g = 0; g < gold.size(); ++g) {
      if (!used[g] && gold[g] == pred[i]) {
        used[g] = true;
        best = std::max(best, 1 + go(i + 1));
        used[g] = false;
      }
    }
    return best;
  };
  return go(0);
}

}  // namespace

TEST_CASE("serialize emits subject [S] cue [S] scope") {
  const std::vector<std::string> sentence = {"a", "not", "b"};
  const std::vector<NegTriplet> ts = {
      make_triplet(sentence, Span{0, 1}, Span{1, 2}, Span{2, 3})};
  const std::vector<std::string> want = {"a", "[S]", "not", "[S]", "b"};
  REQUIRE(serialize(sentence, ts) == want);
}

TEST_CASE("two triplets are joined by a single [SEQ]") {
  const std::vector<std::string> sentence = {"a", "not", "b", "c", "no", "d"};
  const std::vector<NegTriplet> ts = {
      make_triplet(sentence, Span{0, 1}, Span{1, 2}, Span{2, 3}),
      make_triplet(sentence, Span{3, 4}, Span{4, 5}, Span{5, 6})};
  const std::vector<std::string> want = {"a", "[S]", "not", "[S]", "b", "[SEQ]",
                                         "c", "[S]", "no",  "[S]", "d"};
  REQUIRE(serialize(sentence, ts) == want);
  REQUIRE(std::count(want.begin(), want.end(), "[SEQ]") == 1);
}

TEST_CASE("serialize orders triplets by subject start, then cue start") {
  const std::vector<std::string> sentence = {"a", "not", "b", "c", "no", "d"};
  std::vector<NegTriplet> ts = {make_triplet(sentence, Span{3, 4}, Span{4, 5}, Span{5, 6}),
                                make_triplet(sentence, Span{0, 1}, Span{1, 2}, Span{2, 3})};
  const auto out = serialize(sentence, ts);
  REQUIRE(out.front() == "a");
}

TEST_CASE("empty triplet list serializes to the empty sequence") {
  REQUIRE(serialize({"x"}, {}).empty());
}

TEST_CASE("parse handles malformed fragments without aborting") {
  {
    const auto [ts, diag] = parse({"a", "[S]", "b"});
    REQUIRE(ts.empty());
    REQUIRE(diag.malformed == 1);
  }
  {
    const auto [ts, diag] =
        parse({"a", "[S]", "b", "[S]", "c", "[SEQ]", "d", "[S]", "e"});
    REQUIRE(ts.size() == 1);
    REQUIRE(ts[0] == TripletSurface{"a", "b", "c"});
    REQUIRE(diag.malformed == 1);
    REQUIRE(diag.parsed == 1);
  }
  {
    const auto [ts, diag] = parse({});
    REQUIRE(ts.empty());
    REQUIRE(diag.malformed == 0);
  }
  {
    // empty fragment between two separators still counts
    const auto [ts, diag] = parse({"[SEQ]"});
    REQUIRE(ts.empty());
    REQUIRE(diag.malformed == 2);
  }
}

TEST_CASE("parse of serialize returns the original surfaces (property)") {
  Rng rng(71);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto sentence = random_sentence(6 + static_cast<int>(rng.below(10)), rng);
    auto ts = random_triplets(sentence, static_cast<int>(rng.below(4)), rng);
    const auto [parsed, diag] = parse(serialize(sentence, ts));
    REQUIRE(diag.malformed == 0);
    REQUIRE(parsed.size() == ts.size());
    std::stable_sort(ts.begin(), ts.end(), [](const NegTriplet& a, const NegTriplet& b) {
      if (a.subject.start != b.subject.start) return a.subject.start < b.subject.start;
      return a.cue.start < b.cue.start;
    });
    for (std::size_t i = 0; i < ts.size(); ++i) REQUIRE(parsed[i] == surface_of(ts[i]));
  }
}

TEST_CASE("parse accounts for every fragment (property)") {
  Rng rng(72);
  const std::vector<std::string> alphabet = {"a", "b", "[S]", "[SEQ]", "c"};
  for (int trial = 0; trial < 500; ++trial) {
    const int len = static_cast<int>(rng.below(12));
    std::vector<std::string> seq;
    int seq_separators = 0;
    for (int i = 0; i < len; ++i) {
      seq.push_back(alphabet[rng.below(alphabet.size())]);
      if (seq.back() == "[SEQ]") ++seq_separators;
    }
    const auto [ts, diag] = parse(seq);
    if (seq.empty()) {
      REQUIRE(diag.parsed + diag.malformed == 0);
    } else {
      REQUIRE(diag.parsed + diag.malformed == seq_separators + 1);
    }
    REQUIRE(static_cast<int>(ts.size()) == diag.parsed);
  }
}

TEST_CASE("evaluate on identical and half-overlapping sets") {
  const TripletSurface a{"s1", "c1", "o1"}, b{"s2", "c2", "o2"}, c{"s3", "c3", "o3"};
  {
    const Metrics m = evaluate({{a, b}}, {{a, b}});
    REQUIRE(m.precision == Approx(1.0));
    REQUIRE(m.recall == Approx(1.0));
    REQUIRE(m.f1 == Approx(1.0));
  }
  {
    const Metrics m = evaluate({{a, b}}, {{a, c}});
    REQUIRE(m.precision == Approx(0.5));
    REQUIRE(m.recall == Approx(0.5));
    REQUIRE(m.f1 == Approx(0.5));
  }
}

TEST_CASE("evaluate handles empty sides") {
  const TripletSurface a{"s", "c", "o"};
  const Metrics none = evaluate({{}}, {{a}});
  REQUIRE(none.precision == 0.0);
  REQUIRE(none.recall == 0.0);
  REQUIRE(none.f1 == 0.0);
  const Metrics both_empty = evaluate({{}}, {{}});
  REQUIRE(both_empty.f1 == 0.0);
}

TEST_CASE("duplicate predictions consume at most one gold copy") {
  const TripletSurface a{"s", "c", "o"};
  const Metrics m = evaluate({{a, a}}, {{a}});
  REQUIRE(m.tp == 1);
  REQUIRE(m.precision == Approx(0.5));
  REQUIRE(m.recall == Approx(1.0));
}

TEST_CASE("evaluate rejects misaligned sentence lists") {
  REQUIRE_THROWS_AS(evaluate({{}}, {{}, {}}), AlignmentError);
}

TEST_CASE("evaluate matches the brute-force matching oracle (property)") {
  Rng rng(73);
  const auto random_surface = [&](int variety) {
    return TripletSurface{"s" + std::to_string(rng.below(static_cast<std::uint64_t>(variety))),
                          "c" + std::to_string(rng.below(2)),
                          "o" + std::to_string(rng.below(static_cast<std::uint64_t>(variety)))};
  };
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::vector<TripletSurface>> pred(2), gold(2);
    long long want_tp = 0, want_pred = 0, want_gold = 0;
    for (int s = 0; s < 2; ++s) {
      const int np = static_cast<int>(rng.below(4));
      const int ng = static_cast<int>(rng.below(4));
      for (int i = 0; i < np; ++i) pred[s].push_back(random_surface(2));
      for (int i = 0; i < ng; ++i) gold[s].push_back(random_surface(2));
      want_tp += max_matching_tp(pred[s], gold[s]);
      want_pred += np;
      want_gold += ng;
    }
    const Metrics m = evaluate(pred, gold);
    REQUIRE(m.tp == want_tp);
    REQUIRE(m.pred_count == want_pred);
    REQUIRE(m.gold_count == want_gold);
    const double p = want_pred ? static_cast<double>(want_tp) / want_pred : 0.0;
    const double r = want_gold ? static_cast<double>(want_tp) / want_gold : 0.0;
    REQUIRE(m.precision == Approx(p).margin(1e-12));
    REQUIRE(m.recall == Approx(r).margin(1e-12));
  }
}

TEST_CASE("swapping pred and gold exchanges precision and recall (property)") {
  Rng rng(74);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<TripletSurface>> pred(3), gold(3);
    for (int s = 0; s < 3; ++s) {
      for (std::uint64_t i = 0; i < rng.below(4); ++i)
        pred[s].push_back({"s" + std::to_string(rng.below(3)), "c", "o"});
      for (std::uint64_t i = 0; i < rng.below(4); ++i)
        gold[s].push_back({"s" + std::to_string(rng.below(3)), "c", "o"});
    }
    const Metrics fwd = evaluate(pred, gold);
    const Metrics rev = evaluate(gold, pred);
    REQUIRE(fwd.precision == Approx(rev.recall).margin(1e-12));
    REQUIRE(fwd.recall == Approx(rev.precision).margin(1e-12));
    REQUIRE(fwd.f1 == Approx(rev.f1).margin(1e-12));
  }
}

TEST_CASE("metrics_report lists every field") {
  Metrics m;
  m.f1 = 0.5;
  m.malformed_count = 3;
  const std::string report = metrics_report(m);
  for (const char* key : {"f1:", "precision:", "recall:", "tp:", "pred_count:", "gold_count:",
                          "malformed_count:"})
    REQUIRE(report.find(key) != std::string::npos);
}
