// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "cci/corpus.hpp"
#include "cci/detector.hpp"
#include "cci/rng.hpp"

namespace cci::testsupport {

// Separable detector corpus: inconsistent cases replace the alpha() call
// with omega() while the comment keeps talking about alpha; consistent cases
// only restructure the body. A bag-of-words rule on the rendered diff
// ("omega appears on the new side") labels this corpus perfectly, so a
// learnable detector must reach high held-out F1 on it.
inline Corpus separable_corpus(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const char* fillers[] = {"scaled", "cached", "raw", "merged", "sorted"};
  Corpus corpus;
  for (std::size_t i = 0; i < n; ++i) {
    const bool positive = i % 2 == 1;
    const std::string k = std::to_string(rng.uniform_index(40));
    const std::string filler = fillers[rng.uniform_index(5)];
    CciCase c;
    c.id = "syncase" + std::to_string(i);
    c.comment_type = CommentType::Return;
    c.old_comment =
        "Returns the alpha " + filler + " result for input " + k + ".";
    c.old_code = "int compute" + k + "(int input) { int base = input + " + k +
                 "; return alpha(base); }";
    if (positive) {
      c.new_code = "int compute" + k + "(int input) { int base = input + " +
                   k + "; return omega(base); }";
    } else {
      c.new_code = "int compute" + k + "(int input) { int base = input + " +
                   k + "; int keep = alpha(base); return keep; }";
    }
    c.new_comment = positive ? "Returns the omega " + filler +
                                   " result for input " + k + "."
                             : c.old_comment;
    c.label = positive ? Label::Inconsistent : Label::Consistent;
    c.split = i % 5 == 4 ? Split::Test : Split::Train;
    corpus.cases.push_back(std::move(c));
  }
  return corpus;
}

inline Corpus split_of(const Corpus& corpus, Split split) {
  Corpus out;
  for (const CciCase& c : corpus.cases)
    if (c.split && *c.split == split) out.cases.push_back(c);
  return out;
}

inline DetectorConfig tiny_detector_config() {
  DetectorConfig cfg;
  cfg.embed_dim = 8;
  cfg.gru_hidden = 6;
  cfg.attention_heads = 2;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.seed = 1234;
  return cfg;
}

// relative-error criterion for gradient checks; near-zero pairs pass
inline bool grad_close(double analytic, double numeric, double tol = 1e-4) {
  const double far = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
  if (std::fabs(analytic) < 1e-10 && std::fabs(numeric) < 1e-10) return true;
  return std::fabs(analytic - numeric) / far < tol;
}

}  // namespace cci::testsupport
