// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "cci/corpus.hpp"
#include "cci/lexing.hpp"
#include "cci/matrix.hpp"

namespace cci {

struct DetectorConfig {
  std::size_t embed_dim = 64;       // d
  std::size_t gru_hidden = 64;
  std::size_t attention_heads = 4;  // h, must divide d
  double lambda = 1.0;              // similarity weight in the joint loss
  std::size_t epochs = 10;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t vocab_cap = 20000;
  std::uint64_t seed = 42;
  double prob_clamp = 1e-7;
  // Experimental: condition the similarity term on the label instead of the
  // default form that rewards alignment unconditionally.
  bool label_conditioned_similarity = false;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static DetectorConfig from_json(const nlohmann::ordered_json& j);
};

// Token ids: 0 is the shared OOV index, the edit-script markers own the next
// nine ids, training tokens follow.
class Vocabulary {
 public:
  static constexpr std::size_t kOov = 0;

  Vocabulary();
  std::size_t add(const std::string& token);  // idempotent
  std::size_t lookup(const std::string& token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct GruParams {
  Matrix Wz, Uz, Wr, Ur, Wh, Uh;
  Vec bz, br, bh;
};

struct BiGruParams {
  GruParams fwd, bwd;
  Matrix Wf, Wb;  // direction combination
  Vec b;
};

struct AttentionParams {
  // d x d projections; head i owns the column block [i*dk, (i+1)*dk).
  Matrix Wq, Wk, Wv, Wo;
};

struct ClassifierParams {
  Matrix W1;  // d x 2d
  Vec b1;     // d
  Vec w2;     // d
  Vec b2;     // scalar kept as a 1-vector
};

struct DetectorParams {
  Matrix embedding;  // V x d, shared by both encoders
  BiGruParams comment_enc;
  BiGruParams diff_enc;
  AttentionParams attention;
  ClassifierParams classifier;

  struct Named {
    std::string name;
    Matrix* matrix = nullptr;  // either matrix or vec is set
    Vec* vec = nullptr;
  };
  // Stable registry over every trainable tensor, in a fixed order.
  std::vector<Named> registry();
};

struct DetectorModel {
  DetectorConfig config;
  Vocabulary vocab;
  DetectorParams params;

  std::vector<std::size_t> comment_ids(const TokenSeq& comment) const;
  std::vector<std::size_t> diff_ids(const TokenSeq& rendered) const;
};

struct Prediction {
  std::string case_id;
  double probability = 0.0;
  bool inconsistent = false;  // probability > 0.5
  Vec comment_vector;
  Vec code_vector;
};

// Single GRU step; gates z/r, candidate tanh state, convex update.
Vec gru_cell(const Vec& x, const Vec& h_prev, const GruParams& p);

// Per-position combination W_f * fwd + W_b * bwd + b; output length equals
// input length. Throws on an empty sequence.
std::vector<Vec> bigru_encode(const std::vector<Vec>& inputs,
                              const BiGruParams& p);

// Scaled dot-product self-attention over the given states.
std::vector<Vec> multi_head_attention(const std::vector<Vec>& states,
                                      const AttentionParams& p,
                                      std::size_t heads);

Vec encode_comment(const DetectorModel& model, const TokenSeq& comment);
Vec encode_diff(const DetectorModel& model, const TokenSeq& rendered_script);

double classify(const DetectorModel& model, const Vec& c, const Vec& m);

// Joint loss: BCE + lambda * (1 - mean cosine(c_i, m_i)). Probabilities are
// clamped to [eps, 1-eps]; zero vectors contribute cosine 0.
double detector_loss(const std::vector<double>& probs,
                     const std::vector<int>& labels,
                     const std::vector<Vec>& cs, const std::vector<Vec>& ms,
                     double lambda, double prob_clamp = 1e-7,
                     bool label_conditioned = false);

struct EncodedCase {
  std::string case_id;
  std::vector<std::size_t> comment_ids;
  std::vector<std::size_t> diff_ids;
  int label = 0;
};

EncodedCase encode_case(const DetectorModel& model, const CciCase& c);

// Mean loss over the batch plus gradients for every tensor in the registry.
// grads must be shaped like model.params (see make_gradients).
double batch_loss_and_gradients(const DetectorModel& model,
                                const std::vector<EncodedCase>& batch,
                                DetectorParams& grads);

DetectorParams make_gradients(const DetectorModel& model);

// Vocabulary from the corpus (comment + rendered diff tokens, most frequent
// first under the cap) and seeded parameter initialization.
DetectorModel init_detector(const DetectorConfig& config, const Corpus& corpus);

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::optional<double> valid_f1;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  nlohmann::ordered_json to_json() const;
};

// Adam on the joint loss for config.epochs; deterministic under the seed.
// The valid corpus, when given, is scored after each epoch.
TrainHistory train(DetectorModel& model, const Corpus& train_corpus,
                   const Corpus* valid_corpus = nullptr);

Prediction predict(const DetectorModel& model, const CciCase& c);

struct DetectorEval {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::vector<std::string> misclassified_ids;
};

DetectorEval evaluate(const DetectorModel& model, const Corpus& corpus);

void save_model(const DetectorModel& model, const std::string& path);
DetectorModel load_model(const std::string& path);

// Optional hook for externally computed comment/code embeddings; when it
// returns a vector for a token sequence, that vector replaces the built-in
// encoder output at inference time.
using EncoderHook = std::function<std::optional<Vec>(const TokenSeq&)>;

Prediction predict_with_hook(const DetectorModel& model, const CciCase& c,
                             const EncoderHook& comment_hook);

}  // namespace cci
