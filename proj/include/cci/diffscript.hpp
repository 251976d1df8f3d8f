// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cci/lexing.hpp"

namespace cci {

// Marker lexicon for rendered edit scripts. Reserved vocabulary: input token
// sequences must not contain these strings.
inline constexpr const char* kMarkAdd = "<Add>";
inline constexpr const char* kMarkAddEnd = "<AddEnd>";
inline constexpr const char* kMarkDel = "<Del>";
inline constexpr const char* kMarkDelEnd = "<DelEnd>";
inline constexpr const char* kMarkKeep = "<Keep>";
inline constexpr const char* kMarkKeepEnd = "<KeepEnd>";
inline constexpr const char* kMarkReplaceOld = "<ReplaceOld>";
inline constexpr const char* kMarkReplaceNew = "<ReplaceNew>";
inline constexpr const char* kMarkReplaceEnd = "<ReplaceEnd>";

const std::vector<std::string>& marker_tokens();
bool is_marker_token(const std::string& token);

enum class EditAction { Add, Del, Keep, Replace };

struct EditSpan {
  EditAction action = EditAction::Keep;
  std::vector<std::string> old_tokens;  // Del, Keep, Replace
  std::vector<std::string> new_tokens;  // Add, Replace
};

struct EditScript {
  std::vector<EditSpan> spans;
  std::size_t old_len = 0;
  std::size_t new_len = 0;
};

struct MatchBlock {
  std::size_t a_start = 0;
  std::size_t b_start = 0;
  std::size_t length = 0;
  bool operator==(const MatchBlock&) const = default;
};

// Ratcliff-Obershelp style matching: pick the longest common block (ties by
// smallest a_start, then smallest b_start), recurse on both flanks. The
// result is ordered, non-overlapping, and ends with a zero-length sentinel
// at (len(a), len(b)).
std::vector<MatchBlock> matching_blocks(const TokenSeq& a, const TokenSeq& b);

EditScript build_edit_script(const TokenSeq& old_seq, const TokenSeq& new_seq);

// Flat marker-token rendering: <Keep> t.. <KeepEnd>, <Add> t.. <AddEnd>,
// <Del> t.. <DelEnd>, <ReplaceOld> t.. <ReplaceNew> t.. <ReplaceEnd>.
TokenSeq render_edit_script(const EditScript& script);

// Inverse of render_edit_script; throws DataError on malformed input.
EditScript parse_edit_script(const TokenSeq& rendered);

// Replays the script against old_seq; throws DataError if old_seq does not
// match the script's old side.
TokenSeq apply_edit_script(const EditScript& script, const TokenSeq& old_seq);

struct WordDiff {
  // (old_word, new_word) aligned positionally inside each changed gap;
  // an absent side marks an unpaired deletion/insertion.
  std::vector<std::pair<std::optional<std::string>, std::optional<std::string>>>
      changed_pairs;
  std::size_t unchanged_count = 0;
};

WordDiff comment_word_diff(const TokenSeq& old_words, const TokenSeq& new_words);

}  // namespace cci
