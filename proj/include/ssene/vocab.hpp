#pragma once

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace ssene {

struct VocabError : std::runtime_error {
  explicit VocabError(const std::string& what) : std::runtime_error(what) {}
};

// Closed vocabulary with fixed reserved ids. The separator tokens are
// reserved: no data token may collide with them.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kSep = 3;      // [S], separates elements within a triplet
  static constexpr int kSeqSep = 4;   // [SEQ], separates triplets
  static constexpr int kUnk = 5;

  Vocabulary() {
    for (const char* s : {"[PAD]", "[BOS]", "[EOS]", "[S]", "[SEQ]", "[UNK]"}) add_token(s);
  }

  int add_token(const std::string& tok) {
    auto it = ids_.find(tok);
    if (it != ids_.end()) return it->second;
    const int id = static_cast<int>(tokens_.size());
    tokens_.push_back(tok);
    ids_.emplace(tok, id);
    return id;
  }

  int id_of(const std::string& tok) const {
    auto it = ids_.find(tok);
    return it == ids_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& tok) const { return ids_.count(tok) > 0; }

  const std::string& token(int id) const {
    if (id < 0 || id >= static_cast<int>(tokens_.size()))
      throw VocabError("token id out of range: " + std::to_string(id));
    return tokens_[static_cast<std::size_t>(id)];
  }

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(const std::vector<std::string>& toks) const {
    std::vector<int> out;
    out.reserve(toks.size());
    for (const auto& t : toks) out.push_back(id_of(t));
    return out;
  }

  std::vector<std::string> decode(const std::vector<int>& ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (int id : ids) out.push_back(token(id));
    return out;
  }

  static Vocabulary from_tokens(const std::vector<std::string>& toks) {
    Vocabulary v;
    for (const auto& t : toks) v.add_token(t);
    return v;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace ssene
