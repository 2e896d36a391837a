#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace marn {

using TokenId = std::uint32_t;

// Token list with the reserved entries <pad>, <bos>, <eos>, <unk> at 0..3.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr std::size_t kReserved = 4;

  // Keeps tokens seen at least min_count times, ordered by descending
  // frequency and then lexicographically, so input order never matters.
  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus, std::size_t min_count);
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  std::optional<TokenId> find(std::string_view word) const;
  TokenId id_or_unk(std::string_view word) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  static bool is_reserved(TokenId id) { return id < kReserved; }

  // One token per line; line number is the index.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Lowercases, replaces punctuation with spaces and splits on whitespace.
std::vector<std::string> tokenize(std::string_view text);

// <bos> w... <eos>, unknown words mapped to <unk>.
std::vector<TokenId> encode_caption(const std::vector<std::string>& words, const Vocabulary& vocab);
// Drops reserved tokens; throws DataError on an id outside the vocabulary.
std::vector<std::string> decode_tokens(const std::vector<TokenId>& ids, const Vocabulary& vocab);

std::string join_words(const std::vector<std::string>& words);

}  // namespace marn
