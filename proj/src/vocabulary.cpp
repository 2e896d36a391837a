#include "marn/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include "marn/binary_io.hpp"
#include "marn/error.hpp"

namespace marn {

namespace {
const std::vector<std::string> kReservedTokens = {"<pad>", "<bos>", "<eos>", "<unk>"};
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus, std::size_t min_count) {
  if (min_count < 1) throw ConfigError("vocabulary min_count must be at least 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : corpus)
    for (const auto& word : sentence) ++counts[word];
  if (counts.empty()) throw DataError("cannot build a vocabulary from an empty corpus");

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [word, n] : counts) {
    const bool reserved = std::find(kReservedTokens.begin(), kReservedTokens.end(), word) != kReservedTokens.end();
    if (n >= min_count && !reserved) kept.emplace_back(word, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens = kReservedTokens;
  for (auto& [word, n] : kept) tokens.push_back(word);
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kReserved + 1)
    throw DataError("vocabulary needs at least one word besides the reserved tokens");
  for (std::size_t i = 0; i < kReserved; ++i)
    if (tokens[i] != kReservedTokens[i])
      throw FormatError("vocabulary entry " + std::to_string(i) + " must be " + kReservedTokens[i]);
  Vocabulary v;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].empty()) throw FormatError("empty vocabulary token at index " + std::to_string(i));
    if (!v.index_.emplace(tokens[i], static_cast<TokenId>(i)).second)
      throw FormatError("duplicate vocabulary token " + tokens[i]);
  }
  v.tokens_ = std::move(tokens);
  return v;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= tokens_.size())
    throw DataError("token id " + std::to_string(id) + " outside vocabulary of size " + std::to_string(size()));
  return tokens_[id];
}

std::optional<TokenId> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id_or_unk(std::string_view word) const { return find(word).value_or(kUnk); }

void Vocabulary::save(const std::filesystem::path& path) const {
  std::string text;
  for (const auto& t : tokens_) text += t + "\n";
  io::write_text(path, text);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::istringstream in(io::read_text(path));
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return from_tokens(std::move(tokens));
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c) || std::ispunct(c)) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::vector<TokenId> encode_caption(const std::vector<std::string>& words, const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  ids.reserve(words.size() + 2);
  ids.push_back(Vocabulary::kBos);
  for (const auto& w : words) ids.push_back(vocab.id_or_unk(w));
  ids.push_back(Vocabulary::kEos);
  return ids;
}

std::vector<std::string> decode_tokens(const std::vector<TokenId>& ids, const Vocabulary& vocab) {
  std::vector<std::string> words;
  for (TokenId id : ids) {
    const std::string& t = vocab.token(id);
    if (!Vocabulary::is_reserved(id)) words.push_back(t);
  }
  return words;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

}  // namespace marn
