// SPDX-License-Identifier: Apache-2.0
#include "cci/diffscript.hpp"

#include <algorithm>
#include <unordered_map>

#include "cci/corpus.hpp"

namespace cci {

const std::vector<std::string>& marker_tokens() {
  static const std::vector<std::string> markers = {
      kMarkAdd,  kMarkAddEnd,     kMarkDel,        kMarkDelEnd,    kMarkKeep,
      kMarkKeepEnd, kMarkReplaceOld, kMarkReplaceNew, kMarkReplaceEnd};
  return markers;
}

bool is_marker_token(const std::string& token) {
  const auto& m = marker_tokens();
  return std::find(m.begin(), m.end(), token) != m.end();
}

namespace {

struct Range {
  std::size_t alo, ahi, blo, bhi;
};

// Longest matching block within [alo,ahi) x [blo,bhi). Ties resolved toward
// the smallest a_start, then the smallest b_start; the rolling-run scan
// yields exactly that with a strict ">" size comparison.
MatchBlock find_longest_block(
    const std::vector<std::string>& a,
    const std::unordered_map<std::string, std::vector<std::size_t>>& b_index,
    const Range& r) {
  std::size_t best_i = r.alo, best_j = r.blo, best_size = 0;
  std::unordered_map<std::size_t, std::size_t> run;  // j -> run length ending at (i, j)
  for (std::size_t i = r.alo; i < r.ahi; ++i) {
    std::unordered_map<std::size_t, std::size_t> new_run;
    auto it = b_index.find(a[i]);
    if (it != b_index.end()) {
      for (std::size_t j : it->second) {
        if (j < r.blo) continue;
        if (j >= r.bhi) break;
        std::size_t k = 1;
        if (j > r.blo) {
          auto prev = run.find(j - 1);
          if (prev != run.end()) k = prev->second + 1;
        }
        new_run[j] = k;
        if (k > best_size) {
          best_size = k;
          best_i = i - k + 1;
          best_j = j - k + 1;
        }
      }
    }
    run.swap(new_run);
  }
  return {best_i, best_j, best_size};
}

}  // namespace

std::vector<MatchBlock> matching_blocks(const TokenSeq& a, const TokenSeq& b) {
  std::unordered_map<std::string, std::vector<std::size_t>> b_index;
  for (std::size_t j = 0; j < b.tokens.size(); ++j)
    b_index[b.tokens[j]].push_back(j);

  std::vector<MatchBlock> blocks;
  std::vector<Range> queue{{0, a.tokens.size(), 0, b.tokens.size()}};
  while (!queue.empty()) {
    Range r = queue.back();
    queue.pop_back();
    MatchBlock m = find_longest_block(a.tokens, b_index, r);
    if (m.length == 0) continue;
    blocks.push_back(m);
    if (r.alo < m.a_start && r.blo < m.b_start)
      queue.push_back({r.alo, m.a_start, r.blo, m.b_start});
    if (m.a_start + m.length < r.ahi && m.b_start + m.length < r.bhi)
      queue.push_back(
          {m.a_start + m.length, r.ahi, m.b_start + m.length, r.bhi});
  }
  std::sort(blocks.begin(), blocks.end(),
            [](const MatchBlock& x, const MatchBlock& y) {
              return x.a_start != y.a_start ? x.a_start < y.a_start
                                            : x.b_start < y.b_start;
            });

  // merge blocks that happen to be adjacent in both sequences
  std::vector<MatchBlock> merged;
  for (const MatchBlock& m : blocks) {
    if (!merged.empty() &&
        merged.back().a_start + merged.back().length == m.a_start &&
        merged.back().b_start + merged.back().length == m.b_start) {
      merged.back().length += m.length;
    } else {
      merged.push_back(m);
    }
  }
  merged.push_back({a.tokens.size(), b.tokens.size(), 0});
  return merged;
}

EditScript build_edit_script(const TokenSeq& old_seq, const TokenSeq& new_seq) {
  EditScript script;
  script.old_len = old_seq.tokens.size();
  script.new_len = new_seq.tokens.size();

  std::size_t prev_a = 0, prev_b = 0;
  for (const MatchBlock& m : matching_blocks(old_seq, new_seq)) {
    const bool old_gap = prev_a < m.a_start;
    const bool new_gap = prev_b < m.b_start;
    if (old_gap || new_gap) {
      EditSpan span;
      if (old_gap && new_gap)
        span.action = EditAction::Replace;
      else if (old_gap)
        span.action = EditAction::Del;
      else
        span.action = EditAction::Add;
      span.old_tokens.assign(old_seq.tokens.begin() + prev_a,
                             old_seq.tokens.begin() + m.a_start);
      span.new_tokens.assign(new_seq.tokens.begin() + prev_b,
                             new_seq.tokens.begin() + m.b_start);
      script.spans.push_back(std::move(span));
    }
    if (m.length > 0) {
      EditSpan span;
      span.action = EditAction::Keep;
      span.old_tokens.assign(old_seq.tokens.begin() + m.a_start,
                             old_seq.tokens.begin() + m.a_start + m.length);
      script.spans.push_back(std::move(span));
    }
    prev_a = m.a_start + m.length;
    prev_b = m.b_start + m.length;
  }
  return script;
}

TokenSeq render_edit_script(const EditScript& script) {
  auto check = [](const std::vector<std::string>& tokens) {
    for (const auto& t : tokens)
      if (is_marker_token(t))
        throw DataError("input token collides with marker: " + t);
  };

  TokenSeq out;
  out.kind = TokenKind::Code;
  for (const EditSpan& span : script.spans) {
    check(span.old_tokens);
    check(span.new_tokens);
    switch (span.action) {
      case EditAction::Keep:
        out.tokens.push_back(kMarkKeep);
        out.tokens.insert(out.tokens.end(), span.old_tokens.begin(),
                          span.old_tokens.end());
        out.tokens.push_back(kMarkKeepEnd);
        break;
      case EditAction::Del:
        out.tokens.push_back(kMarkDel);
        out.tokens.insert(out.tokens.end(), span.old_tokens.begin(),
                          span.old_tokens.end());
        out.tokens.push_back(kMarkDelEnd);
        break;
      case EditAction::Add:
        out.tokens.push_back(kMarkAdd);
        out.tokens.insert(out.tokens.end(), span.new_tokens.begin(),
                          span.new_tokens.end());
        out.tokens.push_back(kMarkAddEnd);
        break;
      case EditAction::Replace:
        out.tokens.push_back(kMarkReplaceOld);
        out.tokens.insert(out.tokens.end(), span.old_tokens.begin(),
                          span.old_tokens.end());
        out.tokens.push_back(kMarkReplaceNew);
        out.tokens.insert(out.tokens.end(), span.new_tokens.begin(),
                          span.new_tokens.end());
        out.tokens.push_back(kMarkReplaceEnd);
        break;
    }
  }
  return out;
}

EditScript parse_edit_script(const TokenSeq& rendered) {
  EditScript script;
  const auto& toks = rendered.tokens;
  std::size_t i = 0;
  auto collect_until = [&](std::initializer_list<const char*> stops) {
    std::vector<std::string> tokens;
    while (i < toks.size()) {
      for (const char* stop : stops)
        if (toks[i] == stop) return tokens;
      if (is_marker_token(toks[i]))
        throw DataError("unexpected marker inside span: " + toks[i]);
      tokens.push_back(toks[i]);
      ++i;
    }
    throw DataError("unterminated edit-script span");
  };

  while (i < toks.size()) {
    const std::string& head = toks[i];
    ++i;
    EditSpan span;
    if (head == kMarkKeep) {
      span.action = EditAction::Keep;
      span.old_tokens = collect_until({kMarkKeepEnd});
    } else if (head == kMarkDel) {
      span.action = EditAction::Del;
      span.old_tokens = collect_until({kMarkDelEnd});
    } else if (head == kMarkAdd) {
      span.action = EditAction::Add;
      span.new_tokens = collect_until({kMarkAddEnd});
    } else if (head == kMarkReplaceOld) {
      span.action = EditAction::Replace;
      span.old_tokens = collect_until({kMarkReplaceNew});
      ++i;  // consume <ReplaceNew>
      span.new_tokens = collect_until({kMarkReplaceEnd});
    } else {
      throw DataError("expected span marker, got: " + head);
    }
    ++i;  // consume the closing marker
    if (span.action == EditAction::Replace &&
        (span.old_tokens.empty() || span.new_tokens.empty()))
      throw DataError("replace span with an empty side");
    if (span.old_tokens.empty() && span.new_tokens.empty())
      throw DataError("empty edit span");
    script.old_len += span.old_tokens.size();
    script.new_len += span.action == EditAction::Keep
                          ? span.old_tokens.size()
                          : span.new_tokens.size();
    script.spans.push_back(std::move(span));
  }
  return script;
}

TokenSeq apply_edit_script(const EditScript& script, const TokenSeq& old_seq) {
  std::vector<std::string> reconstructed;
  for (const EditSpan& span : script.spans)
    reconstructed.insert(reconstructed.end(), span.old_tokens.begin(),
                         span.old_tokens.end());
  if (reconstructed != old_seq.tokens)
    throw DataError("edit script does not match the given old sequence");

  TokenSeq out;
  out.kind = old_seq.kind;
  for (const EditSpan& span : script.spans) {
    const auto& side = span.action == EditAction::Keep ? span.old_tokens
                                                       : span.new_tokens;
    out.tokens.insert(out.tokens.end(), side.begin(), side.end());
  }
  return out;
}

WordDiff comment_word_diff(const TokenSeq& old_words,
                           const TokenSeq& new_words) {
  WordDiff diff;
  std::size_t prev_a = 0, prev_b = 0;
  for (const MatchBlock& m : matching_blocks(old_words, new_words)) {
    const std::size_t old_gap = m.a_start - prev_a;
    const std::size_t new_gap = m.b_start - prev_b;
    const std::size_t paired = std::max(old_gap, new_gap);
    for (std::size_t k = 0; k < paired; ++k) {
      std::optional<std::string> o, nw;
      if (k < old_gap) o = old_words.tokens[prev_a + k];
      if (k < new_gap) nw = new_words.tokens[prev_b + k];
      diff.changed_pairs.emplace_back(std::move(o), std::move(nw));
    }
    diff.unchanged_count += m.length;
    prev_a = m.a_start + m.length;
    prev_b = m.b_start + m.length;
  }
  return diff;
}

}  // namespace cci
