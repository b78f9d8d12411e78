#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "edge_paths.h"
#include "json.hpp"
#include "typed_tree.h"

namespace treeseq {

// Byte-pair vocabulary over Unicode code points, shared by natural-language
// input and string literals. Merges never cross whitespace-led chunks.
class SubwordVocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kLiteralEnd = 2;
  static constexpr std::size_t kSpecials = 3;
  static constexpr int kFormatVersion = 1;

  // `target_size` counts alphabet plus merged tokens (specials excluded).
  // Throws on an empty corpus or a target below the alphabet size.
  static SubwordVocab train(std::span<const std::string> corpus,
                            std::size_t target_size);

  std::vector<int> encode(std::string_view text) const;
  std::string decode(std::span<const int> ids) const;

  std::size_t size() const { return tokens_.size(); }
  std::size_t alphabet_size() const { return alphabet_size_; }
  const std::string& token(int id) const { return tokens_.at(id); }
  const std::vector<std::pair<std::string, std::string>>& merges() const {
    return merges_;
  }
  int id_of(const std::string& token) const;  // kUnk when absent

  nlohmann::json to_json() const;
  static SubwordVocab from_json(const nlohmann::json& j);
  std::string save() const { return to_json().dump(1) + "\n"; }
  static SubwordVocab load(std::string_view document);

  friend bool operator==(const SubwordVocab& a, const SubwordVocab& b) {
    return a.tokens_ == b.tokens_ && a.merges_ == b.merges_;
  }

 private:
  void rebuild_index();
  void encode_chunk(std::string_view chunk, std::vector<int>& out) const;

  std::size_t alphabet_size_ = 0;
  std::vector<std::string> tokens_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::unordered_map<std::string, int> index_;
  std::map<std::pair<std::string, std::string>, std::size_t> rank_;
};

// Splits UTF-8 text into code points; invalid bytes become one-byte pieces.
std::vector<std::string> split_code_points(std::string_view text);
// Whitespace-led chunks: "set x to" -> {"set", " x", " to"}.
std::vector<std::string_view> split_chunks(std::string_view text);

// Word vocabulary for AST tokens: specials, category sentinels, node types
// and non-string literal values. String literal values are not in it.
class AstVocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kSos = 2;
  static constexpr int kEos = 3;
  static constexpr int kListEnd = 4;

  static AstVocab build(std::span<const Sample> corpus);

  std::size_t size() const { return texts_.size(); }
  const std::string& text(int id) const { return texts_.at(id); }
  // Id of a non-string token; unknown literals fall back to their category
  // sentinel, other unknown tokens to kUnk.
  int id_of(const AstToken& token) const;
  int sentinel(LiteralCategory category) const;
  // Ids of known literal values of one category (sentinel excluded).
  const std::vector<int>& literal_ids(LiteralCategory category) const;

  nlohmann::json to_json() const;
  static AstVocab from_json(const nlohmann::json& j);

  friend bool operator==(const AstVocab& a, const AstVocab& b) {
    return a.texts_ == b.texts_;
  }

 private:
  void rebuild_index();

  std::vector<std::string> texts_;
  std::unordered_map<std::string, int> index_;
  std::map<LiteralCategory, std::vector<int>> literal_ids_;
};

// Decoder id space: AstVocab ids first, then SubwordVocab ids offset by
// the AstVocab size. String literals become a subword run closed by the
// literal-end sentinel; every id of the run carries the leaf's path.
class TargetCodec {
 public:
  TargetCodec(const AstVocab& ast, const SubwordVocab& subword)
      : ast_(&ast), subword_(&subword) {}

  std::size_t size() const { return ast_->size() + subword_->size(); }
  int subword_offset() const { return static_cast<int>(ast_->size()); }
  int literal_end() const {
    return subword_offset() + SubwordVocab::kLiteralEnd;
  }
  bool is_subword(int id) const { return id >= subword_offset(); }

  struct Encoded {
    std::vector<int> ids;
    std::vector<EdgePath> paths;  // empty when no paths were given
  };
  Encoded encode(const std::vector<AstToken>& tokens,
                 const std::vector<EdgePath>* paths = nullptr) const;
  // Inverse of encode; an unterminated literal run is closed implicitly.
  std::vector<AstToken> decode(std::span<const int> ids) const;

  const AstVocab& ast() const { return *ast_; }
  const SubwordVocab& subword() const { return *subword_; }

 private:
  const AstVocab* ast_;
  const SubwordVocab* subword_;
};

// Replaces every string-literal value with the <STR> sentinel.
std::vector<AstToken> mask_literals(const std::vector<AstToken>& tokens);

// NL texts plus string-literal values: the material the subword vocabulary
// is trained on.
std::vector<std::string> subword_training_texts(std::span<const Sample> corpus);

}  // namespace treeseq
