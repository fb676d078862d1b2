#pragma once

// Token vocabulary: one token per line in a file, line number == id.
// Special ids (pad/unk/mask) are declared by the embedder config; unknown
// tokens map to unk rather than erroring.

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "argex/data.hpp"
#include "argex/errors.hpp"

namespace argex {

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens, int unk_id = 1)
      : tokens_(std::move(tokens)), unk_id_(unk_id) {
    for (std::size_t i = 0; i < tokens_.size(); ++i)
      index_[tokens_[i]] = static_cast<int>(i);
    if (unk_id_ < 0 || static_cast<std::size_t>(unk_id_) >= tokens_.size())
      throw ConfigError("unk id outside vocabulary");
  }

  static Vocabulary load(const std::string& path, int unk_id = 1) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocabulary: " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) tokens.push_back(line);
    while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
    if (tokens.empty()) throw ConfigError("empty vocabulary: " + path);
    return Vocabulary(std::move(tokens), unk_id);
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const std::string& t : tokens_) out << t << "\n";
  }

  int lookup(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? unk_id_ : it->second;
  }

  std::vector<int> encode(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const std::string& t : tokens) ids.push_back(lookup(t));
    return ids;
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
  int unk_id_ = 1;
};

}  // namespace argex
