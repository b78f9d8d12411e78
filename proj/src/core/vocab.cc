#include "vocab.h"

#include <algorithm>
#include <cctype>
#include <set>

#include "error.h"

namespace treeseq {

using nlohmann::json;

namespace {

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 0;
}

bool valid_piece(std::string_view piece) {
  const std::size_t n = utf8_length(static_cast<unsigned char>(piece[0]));
  return n != 0 && n == piece.size();
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)); }

}  // namespace

std::vector<std::string> split_code_points(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t n = utf8_length(static_cast<unsigned char>(text[i]));
    bool ok = n != 0 && i + n <= text.size();
    for (std::size_t k = 1; ok && k < n; ++k) {
      ok = (static_cast<unsigned char>(text[i + k]) >> 6) == 0x2;
    }
    if (!ok) n = 1;
    out.emplace_back(text.substr(i, n));
    i += n;
  }
  return out;
}

std::vector<std::string_view> split_chunks(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 1; i < text.size(); ++i) {
    if (is_space(text[i]) && !is_space(text[i - 1])) {
      out.push_back(text.substr(start, i - start));
      start = i;
    }
  }
  if (start < text.size()) out.push_back(text.substr(start));
  return out;
}

// ---------------------------------------------------------------------------
// SubwordVocab

SubwordVocab SubwordVocab::train(std::span<const std::string> corpus,
                                 std::size_t target_size) {
  if (corpus.empty()) fail("cannot train a subword vocabulary on no text");

  std::map<std::string, std::size_t> chunk_counts;
  std::set<std::string> alphabet;
  for (const std::string& line : corpus) {
    for (std::string_view chunk : split_chunks(line)) {
      ++chunk_counts[std::string(chunk)];
    }
    for (std::string& piece : split_code_points(line)) {
      if (valid_piece(piece)) alphabet.insert(std::move(piece));
    }
  }
  if (target_size < alphabet.size()) {
    fail("target vocabulary size " + std::to_string(target_size) +
         " is below the alphabet size " + std::to_string(alphabet.size()));
  }

  SubwordVocab v;
  v.tokens_ = {"<pad>", "<unk>", "<lit_end>"};
  v.tokens_.insert(v.tokens_.end(), alphabet.begin(), alphabet.end());
  v.alphabet_size_ = alphabet.size();
  std::set<std::string> known(alphabet.begin(), alphabet.end());

  struct Word {
    std::vector<std::string> symbols;
    std::size_t count;
  };
  std::vector<Word> words;
  for (const auto& [chunk, count] : chunk_counts) {
    words.push_back(Word{split_code_points(chunk), count});
  }

  std::size_t vocab_size = alphabet.size();
  while (vocab_size < target_size) {
    std::map<std::pair<std::string, std::string>, std::size_t> pairs;
    for (const Word& w : words) {
      for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i) {
        if (!known.count(w.symbols[i]) || !known.count(w.symbols[i + 1])) {
          continue;
        }
        pairs[{w.symbols[i], w.symbols[i + 1]}] += w.count;
      }
    }
    if (pairs.empty()) break;
    // std::map iterates lexicographically, so the first maximum wins ties.
    auto best = pairs.begin();
    for (auto it = pairs.begin(); it != pairs.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    const auto [left, right] = best->first;
    const std::string merged = left + right;
    for (Word& w : words) {
      std::vector<std::string> next;
      next.reserve(w.symbols.size());
      for (std::size_t i = 0; i < w.symbols.size(); ++i) {
        if (i + 1 < w.symbols.size() && w.symbols[i] == left &&
            w.symbols[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(std::move(w.symbols[i]));
        }
      }
      w.symbols = std::move(next);
    }
    v.merges_.emplace_back(left, right);
    if (known.insert(merged).second) {
      v.tokens_.push_back(merged);
      ++vocab_size;
    }
  }
  v.rebuild_index();
  return v;
}

void SubwordVocab::rebuild_index() {
  index_.clear();
  rank_.clear();
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    index_.emplace(tokens_[i], static_cast<int>(i));
  }
  for (std::size_t r = 0; r < merges_.size(); ++r) {
    rank_.emplace(merges_[r], r);
  }
}

int SubwordVocab::id_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

void SubwordVocab::encode_chunk(std::string_view chunk,
                                std::vector<int>& out) const {
  std::vector<std::string> symbols = split_code_points(chunk);
  for (;;) {
    std::size_t best_rank = merges_.size();
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = rank_.find({symbols[i], symbols[i + 1]});
      if (it != rank_.end() && it->second < best_rank) best_rank = it->second;
    }
    if (best_rank == merges_.size()) break;
    const auto& [left, right] = merges_[best_rank];
    std::vector<std::string> next;
    next.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      if (i + 1 < symbols.size() && symbols[i] == left &&
          symbols[i + 1] == right) {
        next.push_back(left + right);
        ++i;
      } else {
        next.push_back(std::move(symbols[i]));
      }
    }
    symbols = std::move(next);
  }
  for (const std::string& s : symbols) out.push_back(id_of(s));
}

std::vector<int> SubwordVocab::encode(std::string_view text) const {
  std::vector<int> out;
  for (std::string_view chunk : split_chunks(text)) encode_chunk(chunk, out);
  return out;
}

std::string SubwordVocab::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id == kPad || id == kLiteralEnd) continue;
    if (id == kUnk || id < 0 || static_cast<std::size_t>(id) >= size()) {
      out += "\xEF\xBF\xBD";
      continue;
    }
    out += tokens_[id];
  }
  return out;
}

json SubwordVocab::to_json() const {
  json merges = json::array();
  for (const auto& [a, b] : merges_) merges.push_back({a, b});
  std::vector<std::string> alphabet(tokens_.begin() + kSpecials,
                                    tokens_.begin() + kSpecials + alphabet_size_);
  return json{{"format_version", kFormatVersion},
              {"alphabet", alphabet},
              {"merges", std::move(merges)},
              {"specials", {{"pad", kPad}, {"unk", kUnk},
                            {"literal_end", kLiteralEnd}}}};
}

SubwordVocab SubwordVocab::from_json(const json& j) {
  SubwordVocab v;
  try {
    if (j.at("format_version").get<int>() != kFormatVersion) {
      fail("vocabulary format version mismatch");
    }
    const json& specials = j.at("specials");
    if (specials.at("pad").get<int>() != kPad ||
        specials.at("unk").get<int>() != kUnk ||
        specials.at("literal_end").get<int>() != kLiteralEnd) {
      fail("unexpected special token ids");
    }
    v.tokens_ = {"<pad>", "<unk>", "<lit_end>"};
    std::set<std::string> known;
    for (const json& a : j.at("alphabet")) {
      v.tokens_.push_back(a.get<std::string>());
      known.insert(v.tokens_.back());
    }
    v.alphabet_size_ = v.tokens_.size() - kSpecials;
    // Replaying the merges reproduces the token table.
    for (const json& m : j.at("merges")) {
      if (!m.is_array() || m.size() != 2) fail("merge must be a pair");
      std::string a = m[0].get<std::string>(), b = m[1].get<std::string>();
      if (!known.count(a) || !known.count(b)) {
        fail("merge (" + a + ", " + b + ") uses an unknown symbol");
      }
      if (known.insert(a + b).second) v.tokens_.push_back(a + b);
      v.merges_.emplace_back(std::move(a), std::move(b));
    }
  } catch (const json::exception& e) {
    fail(std::string("malformed vocabulary document: ") + e.what());
  }
  v.rebuild_index();
  return v;
}

SubwordVocab SubwordVocab::load(std::string_view document) {
  json j;
  try {
    j = json::parse(document);
  } catch (const json::parse_error& e) {
    fail(std::string("malformed vocabulary document: ") + e.what());
  }
  return from_json(j);
}

// ---------------------------------------------------------------------------
// AstVocab

AstVocab AstVocab::build(std::span<const Sample> corpus) {
  std::set<std::string> types, literals;
  for (const Sample& s : corpus) {
    for (const AstToken& t : linearize(s.tree)) {
      if (t.kind == TokenKind::kNodeType) types.insert(t.text);
      if (t.kind == TokenKind::kLiteral && t.category != LiteralCategory::kString) {
        literals.insert(token_text(t));
      }
    }
  }
  AstVocab v;
  v.texts_ = {"<pad>", "<unk>", "sos", "eos", "le"};
  for (LiteralCategory c : kAllCategories) {
    AstToken sentinel = AstToken::literal(c, {});
    sentinel.masked = true;
    v.texts_.push_back(token_text(sentinel));
  }
  v.texts_.insert(v.texts_.end(), types.begin(), types.end());
  v.texts_.insert(v.texts_.end(), literals.begin(), literals.end());
  v.rebuild_index();
  return v;
}

void AstVocab::rebuild_index() {
  index_.clear();
  literal_ids_.clear();
  for (std::size_t i = 0; i < texts_.size(); ++i) {
    if (!index_.emplace(texts_[i], static_cast<int>(i)).second) {
      fail("duplicate AST vocabulary entry " + texts_[i]);
    }
    if (i <= kListEnd) continue;
    AstToken t = parse_token_text(texts_[i]);
    if (t.kind == TokenKind::kLiteral && !t.masked) {
      literal_ids_[t.category].push_back(static_cast<int>(i));
    }
  }
}

int AstVocab::sentinel(LiteralCategory category) const {
  AstToken t = AstToken::literal(category, {});
  t.masked = true;
  return index_.at(token_text(t));
}

const std::vector<int>& AstVocab::literal_ids(LiteralCategory category) const {
  static const std::vector<int> kEmpty;
  auto it = literal_ids_.find(category);
  return it == literal_ids_.end() ? kEmpty : it->second;
}

int AstVocab::id_of(const AstToken& token) const {
  switch (token.kind) {
    case TokenKind::kSos: return kSos;
    case TokenKind::kEos: return kEos;
    case TokenKind::kListEnd: return kListEnd;
    case TokenKind::kNodeType: {
      auto it = index_.find(token.text);
      return it == index_.end() ? kUnk : it->second;
    }
    case TokenKind::kLiteral: break;
  }
  if (token.masked || token.category == LiteralCategory::kString) {
    return sentinel(token.category);
  }
  auto it = index_.find(token_text(token));
  return it == index_.end() ? sentinel(token.category) : it->second;
}

json AstVocab::to_json() const { return json{{"tokens", texts_}}; }

AstVocab AstVocab::from_json(const json& j) {
  AstVocab v;
  try {
    v.texts_ = j.at("tokens").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    fail(std::string("malformed AST vocabulary: ") + e.what());
  }
  if (v.texts_.size() < 5 || v.texts_[kSos] != "sos" ||
      v.texts_[kEos] != "eos" || v.texts_[kListEnd] != "le") {
    fail("malformed AST vocabulary: bad special tokens");
  }
  v.rebuild_index();
  return v;
}

// ---------------------------------------------------------------------------
// TargetCodec

TargetCodec::Encoded TargetCodec::encode(
    const std::vector<AstToken>& tokens,
    const std::vector<EdgePath>* paths) const {
  if (paths && paths->size() != tokens.size()) {
    fail("token and path counts differ");
  }
  Encoded out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const AstToken& t = tokens[i];
    std::size_t before = out.ids.size();
    if (t.kind == TokenKind::kLiteral && t.category == LiteralCategory::kString &&
        !t.masked) {
      for (int id : subword_->encode(t.text)) {
        out.ids.push_back(subword_offset() + id);
      }
      out.ids.push_back(literal_end());
    } else {
      out.ids.push_back(ast_->id_of(t));
    }
    if (paths) {
      out.paths.insert(out.paths.end(), out.ids.size() - before, (*paths)[i]);
    }
  }
  return out;
}

std::vector<AstToken> TargetCodec::decode(std::span<const int> ids) const {
  std::vector<AstToken> out;
  std::vector<int> run;
  bool in_run = false;
  auto close_run = [&] {
    out.push_back(
        AstToken::literal(LiteralCategory::kString, subword_->decode(run)));
    run.clear();
    in_run = false;
  };
  for (int id : ids) {
    if (is_subword(id)) {
      if (id == literal_end()) {
        close_run();
      } else {
        run.push_back(id - subword_offset());
        in_run = true;
      }
      continue;
    }
    if (in_run) close_run();
    if (id == AstVocab::kPad) continue;
    if (id == AstVocab::kUnk) {
      out.push_back(AstToken::node("<unk>"));
      continue;
    }
    out.push_back(parse_token_text(ast_->text(id)));
  }
  if (in_run) close_run();
  return out;
}

// ---------------------------------------------------------------------------

std::vector<AstToken> mask_literals(const std::vector<AstToken>& tokens) {
  std::vector<AstToken> out = tokens;
  for (AstToken& t : out) {
    if (t.kind == TokenKind::kLiteral && t.category == LiteralCategory::kString &&
        !t.masked) {
      t = parse_token_text("<STR>");
    }
  }
  return out;
}

std::vector<std::string> subword_training_texts(std::span<const Sample> corpus) {
  std::vector<std::string> out;
  for (const Sample& s : corpus) {
    if (!s.nl.empty()) out.push_back(s.nl);
    for (const AstToken& t : linearize(s.tree)) {
      if (t.kind == TokenKind::kLiteral && t.category == LiteralCategory::kString &&
          !t.text.empty()) {
        out.push_back(t.text);
      }
    }
  }
  return out;
}

}  // namespace treeseq
