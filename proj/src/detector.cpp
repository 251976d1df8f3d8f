// SPDX-License-Identifier: Apache-2.0
#include "cci/detector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cci/diffscript.hpp"
#include "cci/evalkit.hpp"
#include "cci/rng.hpp"

namespace cci {

using nlohmann::ordered_json;

void DetectorConfig::validate() const {
  if (embed_dim == 0 || gru_hidden == 0 || attention_heads == 0)
    throw DataError("detector dimensions must be positive");
  if (embed_dim % attention_heads != 0)
    throw DataError("embed_dim must be divisible by attention_heads");
  if (lambda < 0) throw DataError("lambda must be >= 0");
  if (prob_clamp <= 0 || prob_clamp >= 0.5)
    throw DataError("prob_clamp must lie in (0, 0.5)");
  if (batch_size == 0) throw DataError("batch_size must be positive");
}

ordered_json DetectorConfig::to_json() const {
  ordered_json j;
  j["embed_dim"] = embed_dim;
  j["gru_hidden"] = gru_hidden;
  j["attention_heads"] = attention_heads;
  j["lambda"] = lambda;
  j["epochs"] = epochs;
  j["learning_rate"] = learning_rate;
  j["batch_size"] = batch_size;
  j["vocab_cap"] = vocab_cap;
  j["seed"] = seed;
  j["prob_clamp"] = prob_clamp;
  j["label_conditioned_similarity"] = label_conditioned_similarity;
  return j;
}

DetectorConfig DetectorConfig::from_json(const ordered_json& j) {
  DetectorConfig c;
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.gru_hidden = j.value("gru_hidden", c.gru_hidden);
  c.attention_heads = j.value("attention_heads", c.attention_heads);
  c.lambda = j.value("lambda", c.lambda);
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.vocab_cap = j.value("vocab_cap", c.vocab_cap);
  c.seed = j.value("seed", c.seed);
  c.prob_clamp = j.value("prob_clamp", c.prob_clamp);
  c.label_conditioned_similarity =
      j.value("label_conditioned_similarity", c.label_conditioned_similarity);
  c.validate();
  return c;
}

// ------------------------------------------------------------- vocabulary ---

Vocabulary::Vocabulary() {
  add("<OOV>");
  for (const std::string& m : marker_tokens()) add(m);
}

std::size_t Vocabulary::add(const std::string& token) {
  auto [it, inserted] = index_.try_emplace(token, tokens_.size());
  if (inserted) tokens_.push_back(token);
  return it->second;
}

std::size_t Vocabulary::lookup(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kOov : it->second;
}

// --------------------------------------------------------------- registry ---

std::vector<DetectorParams::Named> DetectorParams::registry() {
  std::vector<Named> out;
  auto mat = [&out](const std::string& name, Matrix& m) {
    out.push_back({name, &m, nullptr});
  };
  auto vec = [&out](const std::string& name, Vec& v) {
    out.push_back({name, nullptr, &v});
  };
  mat("embedding", embedding);
  for (auto [prefix, enc] :
       {std::pair<const char*, BiGruParams*>{"comment", &comment_enc},
        std::pair<const char*, BiGruParams*>{"diff", &diff_enc}}) {
    for (auto [dir, gru] :
         {std::pair<const char*, GruParams*>{"fwd", &enc->fwd},
          std::pair<const char*, GruParams*>{"bwd", &enc->bwd}}) {
      const std::string base = std::string(prefix) + "." + dir + ".";
      mat(base + "Wz", gru->Wz);
      mat(base + "Uz", gru->Uz);
      vec(base + "bz", gru->bz);
      mat(base + "Wr", gru->Wr);
      mat(base + "Ur", gru->Ur);
      vec(base + "br", gru->br);
      mat(base + "Wh", gru->Wh);
      mat(base + "Uh", gru->Uh);
      vec(base + "bh", gru->bh);
    }
    const std::string base = std::string(prefix) + ".";
    mat(base + "Wf", enc->Wf);
    mat(base + "Wb", enc->Wb);
    vec(base + "b", enc->b);
  }
  mat("attn.Wq", attention.Wq);
  mat("attn.Wk", attention.Wk);
  mat("attn.Wv", attention.Wv);
  mat("attn.Wo", attention.Wo);
  mat("cls.W1", classifier.W1);
  vec("cls.b1", classifier.b1);
  vec("cls.w2", classifier.w2);
  vec("cls.b2", classifier.b2);
  return out;
}

// ----------------------------------------------------------------- layers ---

Vec gru_cell(const Vec& x, const Vec& h_prev, const GruParams& p) {
  require_shape(p.Wz.cols == x.size() && p.Uz.cols == h_prev.size() &&
                    p.Wz.rows == h_prev.size(),
                "gru_cell");
  const std::size_t h = h_prev.size();
  Vec z = matvec(p.Wz, x), r = matvec(p.Wr, x), a = matvec(p.Wh, x);
  const Vec uz = matvec(p.Uz, h_prev), ur = matvec(p.Ur, h_prev);
  Vec out(h);
  Vec rh(h);
  for (std::size_t i = 0; i < h; ++i) {
    z[i] = sigmoid(z[i] + uz[i] + p.bz[i]);
    r[i] = sigmoid(r[i] + ur[i] + p.br[i]);
    rh[i] = r[i] * h_prev[i];
  }
  const Vec uh = matvec(p.Uh, rh);
  for (std::size_t i = 0; i < h; ++i) {
    const double hbar = std::tanh(a[i] + uh[i] + p.bh[i]);
    out[i] = (1.0 - z[i]) * h_prev[i] + z[i] * hbar;
  }
  return out;
}

namespace {

struct GruStepCache {
  Vec x, h_prev, z, r, hbar, h;
};

GruStepCache gru_step(const Vec& x, const Vec& h_prev, const GruParams& p) {
  GruStepCache c;
  c.x = x;
  c.h_prev = h_prev;
  const std::size_t h = h_prev.size();
  c.z = matvec(p.Wz, x);
  c.r = matvec(p.Wr, x);
  Vec a = matvec(p.Wh, x);
  const Vec uz = matvec(p.Uz, h_prev), ur = matvec(p.Ur, h_prev);
  Vec rh(h);
  for (std::size_t i = 0; i < h; ++i) {
    c.z[i] = sigmoid(c.z[i] + uz[i] + p.bz[i]);
    c.r[i] = sigmoid(c.r[i] + ur[i] + p.br[i]);
    rh[i] = c.r[i] * h_prev[i];
  }
  const Vec uh = matvec(p.Uh, rh);
  c.hbar.resize(h);
  c.h.resize(h);
  for (std::size_t i = 0; i < h; ++i) {
    c.hbar[i] = std::tanh(a[i] + uh[i] + p.bh[i]);
    c.h[i] = (1.0 - c.z[i]) * h_prev[i] + c.z[i] * c.hbar[i];
  }
  return c;
}

// dh -> parameter grads, dx, dh_prev
void gru_step_backward(const GruStepCache& c, const Vec& dh, const GruParams& p,
                       GruParams& g, Vec& dx, Vec& dh_prev) {
  const std::size_t h = dh.size();
  Vec dz(h), dhbar(h), da_h(h);
  dh_prev.assign(h, 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    dz[i] = dh[i] * (c.hbar[i] - c.h_prev[i]);
    dhbar[i] = dh[i] * c.z[i];
    dh_prev[i] = dh[i] * (1.0 - c.z[i]);
    da_h[i] = dhbar[i] * (1.0 - c.hbar[i] * c.hbar[i]);
  }
  Vec rh(h);
  for (std::size_t i = 0; i < h; ++i) rh[i] = c.r[i] * c.h_prev[i];
  add_outer(g.Wh, da_h, c.x);
  add_outer(g.Uh, da_h, rh);
  axpy(g.bh, 1.0, da_h);

  const Vec drh = matvec_t(p.Uh, da_h);
  Vec dr(h), da_z(h), da_r(h);
  for (std::size_t i = 0; i < h; ++i) {
    dr[i] = drh[i] * c.h_prev[i];
    dh_prev[i] += drh[i] * c.r[i];
    da_z[i] = dz[i] * c.z[i] * (1.0 - c.z[i]);
    da_r[i] = dr[i] * c.r[i] * (1.0 - c.r[i]);
  }
  add_outer(g.Wz, da_z, c.x);
  add_outer(g.Uz, da_z, c.h_prev);
  axpy(g.bz, 1.0, da_z);
  add_outer(g.Wr, da_r, c.x);
  add_outer(g.Ur, da_r, c.h_prev);
  axpy(g.br, 1.0, da_r);

  axpy(dh_prev, 1.0, matvec_t(p.Uz, da_z));
  axpy(dh_prev, 1.0, matvec_t(p.Ur, da_r));

  dx = matvec_t(p.Wz, da_z);
  axpy(dx, 1.0, matvec_t(p.Wr, da_r));
  axpy(dx, 1.0, matvec_t(p.Wh, da_h));
}

std::vector<GruStepCache> gru_forward(const std::vector<Vec>& inputs,
                                      const GruParams& p, bool reverse) {
  const std::size_t t_count = inputs.size();
  const std::size_t h = p.bz.size();
  std::vector<GruStepCache> steps;
  steps.reserve(t_count);
  Vec state(h, 0.0);
  for (std::size_t k = 0; k < t_count; ++k) {
    const std::size_t pos = reverse ? t_count - 1 - k : k;
    steps.push_back(gru_step(inputs[pos], state, p));
    state = steps.back().h;
  }
  return steps;
}

struct EncoderCache {
  std::vector<Vec> inputs;
  std::vector<GruStepCache> fwd, bwd;  // process order
  std::vector<Vec> combined;           // position order
  Vec pooled;
};

EncoderCache bigru_forward(const std::vector<Vec>& inputs,
                           const BiGruParams& p) {
  EncoderCache cache;
  cache.inputs = inputs;
  cache.fwd = gru_forward(inputs, p.fwd, false);
  cache.bwd = gru_forward(inputs, p.bwd, true);
  const std::size_t t_count = inputs.size();
  cache.combined.resize(t_count);
  for (std::size_t t = 0; t < t_count; ++t) {
    Vec comb = matvec(p.Wf, cache.fwd[t].h);
    axpy(comb, 1.0, matvec(p.Wb, cache.bwd[t_count - 1 - t].h));
    axpy(comb, 1.0, p.b);
    cache.combined[t] = std::move(comb);
  }
  const std::size_t d = p.b.size();
  cache.pooled.assign(d, 0.0);
  for (const Vec& v : cache.combined) axpy(cache.pooled, 1.0, v);
  for (double& x : cache.pooled) x /= static_cast<double>(t_count);
  return cache;
}

// dCombined (position order) -> grads + dInputs
void bigru_backward(const EncoderCache& cache,
                    const std::vector<Vec>& d_combined, const BiGruParams& p,
                    BiGruParams& g, std::vector<Vec>& d_inputs) {
  const std::size_t t_count = cache.inputs.size();
  const std::size_t h = p.fwd.bz.size();
  std::vector<Vec> dhf(t_count), dhb(t_count);  // position order
  for (std::size_t t = 0; t < t_count; ++t) {
    add_outer(g.Wf, d_combined[t], cache.fwd[t].h);
    add_outer(g.Wb, d_combined[t], cache.bwd[t_count - 1 - t].h);
    axpy(g.b, 1.0, d_combined[t]);
    dhf[t] = matvec_t(p.Wf, d_combined[t]);
    dhb[t] = matvec_t(p.Wb, d_combined[t]);
  }

  d_inputs.assign(t_count, Vec(cache.inputs[0].size(), 0.0));
  Vec carry(h, 0.0), dx, dh_prev;
  for (std::size_t k = t_count; k-- > 0;) {
    Vec dh = dhf[k];
    axpy(dh, 1.0, carry);
    gru_step_backward(cache.fwd[k], dh, p.fwd, g.fwd, dx, dh_prev);
    axpy(d_inputs[k], 1.0, dx);
    carry = dh_prev;
  }
  carry.assign(h, 0.0);
  for (std::size_t k = t_count; k-- > 0;) {
    const std::size_t pos = t_count - 1 - k;
    Vec dh = dhb[pos];
    axpy(dh, 1.0, carry);
    gru_step_backward(cache.bwd[k], dh, p.bwd, g.bwd, dx, dh_prev);
    axpy(d_inputs[pos], 1.0, dx);
    carry = dh_prev;
  }
}

struct AttentionCache {
  std::vector<Vec> states;      // input, position order
  std::vector<Vec> qa, ka, va;  // T x d
  std::vector<std::vector<Vec>> probs;  // per head: T rows of length T
  std::vector<std::vector<Vec>> heads;  // per head: T rows of length dk
  std::vector<Vec> concat;              // T x d
  std::vector<Vec> out;                 // T x d
};

AttentionCache attention_forward(const std::vector<Vec>& states,
                                 const AttentionParams& p, std::size_t heads) {
  AttentionCache cache;
  cache.states = states;
  const std::size_t t_count = states.size();
  const std::size_t d = p.Wq.rows;
  const std::size_t dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  cache.qa.resize(t_count);
  cache.ka.resize(t_count);
  cache.va.resize(t_count);
  for (std::size_t t = 0; t < t_count; ++t) {
    cache.qa[t] = matvec_t(p.Wq, states[t]);
    cache.ka[t] = matvec_t(p.Wk, states[t]);
    cache.va[t] = matvec_t(p.Wv, states[t]);
  }

  cache.probs.resize(heads);
  cache.heads.resize(heads);
  cache.concat.assign(t_count, Vec(d, 0.0));
  for (std::size_t i = 0; i < heads; ++i) {
    const std::size_t off = i * dk;
    cache.probs[i].resize(t_count);
    cache.heads[i].resize(t_count);
    for (std::size_t t = 0; t < t_count; ++t) {
      Vec scores(t_count);
      double max_score = -1e300;
      for (std::size_t s = 0; s < t_count; ++s) {
        double acc = 0.0;
        for (std::size_t k = 0; k < dk; ++k)
          acc += cache.qa[t][off + k] * cache.ka[s][off + k];
        scores[s] = acc * scale;
        max_score = std::max(max_score, scores[s]);
      }
      double z = 0.0;
      for (std::size_t s = 0; s < t_count; ++s) {
        scores[s] = std::exp(scores[s] - max_score);
        z += scores[s];
      }
      for (std::size_t s = 0; s < t_count; ++s) scores[s] /= z;

      Vec head(dk, 0.0);
      for (std::size_t s = 0; s < t_count; ++s)
        for (std::size_t k = 0; k < dk; ++k)
          head[k] += scores[s] * cache.va[s][off + k];
      for (std::size_t k = 0; k < dk; ++k)
        cache.concat[t][off + k] = head[k];
      cache.probs[i][t] = std::move(scores);
      cache.heads[i][t] = std::move(head);
    }
  }

  cache.out.resize(t_count);
  for (std::size_t t = 0; t < t_count; ++t)
    cache.out[t] = matvec_t(p.Wo, cache.concat[t]);
  return cache;
}

void attention_backward(const AttentionCache& cache, std::vector<Vec> d_out,
                        const AttentionParams& p, std::size_t heads,
                        AttentionParams& g, std::vector<Vec>& d_states) {
  const std::size_t t_count = cache.states.size();
  const std::size_t d = p.Wq.rows;
  const std::size_t dk = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  std::vector<Vec> d_concat(t_count);
  for (std::size_t t = 0; t < t_count; ++t) {
    add_outer(g.Wo, cache.concat[t], d_out[t]);
    d_concat[t] = matvec(p.Wo, d_out[t]);
  }

  std::vector<Vec> dqa(t_count, Vec(d, 0.0));
  std::vector<Vec> dka(t_count, Vec(d, 0.0));
  std::vector<Vec> dva(t_count, Vec(d, 0.0));
  for (std::size_t i = 0; i < heads; ++i) {
    const std::size_t off = i * dk;
    for (std::size_t t = 0; t < t_count; ++t) {
      const Vec& prob = cache.probs[i][t];
      // dH slice
      Vec dhead(dk);
      for (std::size_t k = 0; k < dk; ++k) dhead[k] = d_concat[t][off + k];
      // dP and dV
      Vec dprob(t_count, 0.0);
      for (std::size_t s = 0; s < t_count; ++s) {
        double acc = 0.0;
        for (std::size_t k = 0; k < dk; ++k) {
          acc += dhead[k] * cache.va[s][off + k];
          dva[s][off + k] += prob[s] * dhead[k];
        }
        dprob[s] = acc;
      }
      // softmax
      double mix = 0.0;
      for (std::size_t s = 0; s < t_count; ++s) mix += dprob[s] * prob[s];
      for (std::size_t s = 0; s < t_count; ++s) {
        const double dscore = prob[s] * (dprob[s] - mix) * scale;
        for (std::size_t k = 0; k < dk; ++k) {
          dqa[t][off + k] += dscore * cache.ka[s][off + k];
          dka[s][off + k] += dscore * cache.qa[t][off + k];
        }
      }
    }
  }

  d_states.assign(t_count, Vec(d, 0.0));
  for (std::size_t t = 0; t < t_count; ++t) {
    add_outer(g.Wq, cache.states[t], dqa[t]);
    add_outer(g.Wk, cache.states[t], dka[t]);
    add_outer(g.Wv, cache.states[t], dva[t]);
    axpy(d_states[t], 1.0, matvec(p.Wq, dqa[t]));
    axpy(d_states[t], 1.0, matvec(p.Wk, dka[t]));
    axpy(d_states[t], 1.0, matvec(p.Wv, dva[t]));
  }
}

}  // namespace

std::vector<Vec> bigru_encode(const std::vector<Vec>& inputs,
                              const BiGruParams& p) {
  if (inputs.empty()) throw DataError("bigru_encode: empty sequence");
  return bigru_forward(inputs, p).combined;
}

std::vector<Vec> multi_head_attention(const std::vector<Vec>& states,
                                      const AttentionParams& p,
                                      std::size_t heads) {
  if (states.empty()) throw DataError("multi_head_attention: empty sequence");
  if (p.Wq.rows % heads != 0)
    throw DataError("attention width must be divisible by head count");
  return attention_forward(states, p, heads).out;
}

// ---------------------------------------------------------------- encoders --

std::vector<std::size_t> DetectorModel::comment_ids(
    const TokenSeq& comment) const {
  std::vector<std::size_t> ids;
  ids.reserve(comment.size());
  for (const std::string& t : comment.tokens) ids.push_back(vocab.lookup(t));
  return ids;
}

std::vector<std::size_t> DetectorModel::diff_ids(
    const TokenSeq& rendered) const {
  return comment_ids(rendered);
}

namespace {

std::vector<Vec> embed(const DetectorParams& p,
                       const std::vector<std::size_t>& ids) {
  const std::size_t d = p.embedding.cols;
  std::vector<Vec> out;
  out.reserve(ids.size());
  for (std::size_t id : ids) {
    Vec row(d);
    for (std::size_t c = 0; c < d; ++c) row[c] = p.embedding.at(id, c);
    out.push_back(std::move(row));
  }
  return out;
}

struct CaseCache {
  EncoderCache comment;
  EncoderCache diff;
  AttentionCache attn;
  Vec attn_pooled;
  // classifier
  Vec input, a1pre, a1;
  double logit = 0.0, prob = 0.0;
  double cosine = 0.0;
  bool cosine_defined = false;
};

Vec mean_rows(const std::vector<Vec>& rows) {
  Vec out(rows[0].size(), 0.0);
  for (const Vec& r : rows) axpy(out, 1.0, r);
  for (double& x : out) x /= static_cast<double>(rows.size());
  return out;
}

CaseCache forward_case(const DetectorModel& model,
                       const std::vector<std::size_t>& comment_ids,
                       const std::vector<std::size_t>& diff_ids) {
  if (comment_ids.empty()) throw DataError("empty comment sequence");
  if (diff_ids.empty()) throw DataError("empty diff sequence");
  const DetectorParams& p = model.params;
  CaseCache cc;
  cc.comment = bigru_forward(embed(p, comment_ids), p.comment_enc);
  cc.diff = bigru_forward(embed(p, diff_ids), p.diff_enc);
  cc.attn = attention_forward(cc.diff.combined, p.attention,
                              model.config.attention_heads);
  cc.attn_pooled = mean_rows(cc.attn.out);

  const Vec& c = cc.comment.pooled;
  const Vec& m = cc.attn_pooled;
  cc.input.reserve(c.size() + m.size());
  cc.input.insert(cc.input.end(), c.begin(), c.end());
  cc.input.insert(cc.input.end(), m.begin(), m.end());
  cc.a1pre = matvec(p.classifier.W1, cc.input);
  axpy(cc.a1pre, 1.0, p.classifier.b1);
  cc.a1 = cc.a1pre;
  for (double& x : cc.a1) x = std::max(0.0, x);
  cc.logit = dot(p.classifier.w2, cc.a1) + p.classifier.b2[0];
  cc.prob = sigmoid(cc.logit);

  const double nc = norm2(c), nm = norm2(m);
  if (nc >= 1e-12 && nm >= 1e-12) {
    cc.cosine = dot(c, m) / (nc * nm);
    cc.cosine_defined = true;
  }
  return cc;
}

}  // namespace

Vec encode_comment(const DetectorModel& model, const TokenSeq& comment) {
  if (comment.empty()) throw DataError("encode_comment: empty comment");
  const auto ids = model.comment_ids(comment);
  return bigru_forward(embed(model.params, ids), model.params.comment_enc)
      .pooled;
}

Vec encode_diff(const DetectorModel& model, const TokenSeq& rendered_script) {
  if (rendered_script.empty()) throw DataError("encode_diff: empty script");
  const auto ids = model.diff_ids(rendered_script);
  EncoderCache enc =
      bigru_forward(embed(model.params, ids), model.params.diff_enc);
  AttentionCache attn = attention_forward(enc.combined, model.params.attention,
                                          model.config.attention_heads);
  return mean_rows(attn.out);
}

double classify(const DetectorModel& model, const Vec& c, const Vec& m) {
  if (!all_finite(c) || !all_finite(m))
    throw DataError("classify: non-finite input vector");
  const ClassifierParams& p = model.params.classifier;
  Vec input;
  input.reserve(c.size() + m.size());
  input.insert(input.end(), c.begin(), c.end());
  input.insert(input.end(), m.begin(), m.end());
  Vec a1 = matvec(p.W1, input);
  axpy(a1, 1.0, p.b1);
  for (double& x : a1) x = std::max(0.0, x);
  return sigmoid(dot(p.w2, a1) + p.b2[0]);
}

// ------------------------------------------------------------------- loss ---

double detector_loss(const std::vector<double>& probs,
                     const std::vector<int>& labels,
                     const std::vector<Vec>& cs, const std::vector<Vec>& ms,
                     double lambda, double prob_clamp, bool label_conditioned) {
  const std::size_t n = probs.size();
  if (n == 0) throw DataError("detector_loss: empty batch");
  if (labels.size() != n || cs.size() != n || ms.size() != n)
    throw DataError("detector_loss: length mismatch");

  double bce = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p =
        std::clamp(probs[i], prob_clamp, 1.0 - prob_clamp);
    bce -= labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  bce /= static_cast<double>(n);

  double sim = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double cosine = 0.0;
    const double nc = norm2(cs[i]), nm = norm2(ms[i]);
    if (nc >= 1e-12 && nm >= 1e-12) cosine = dot(cs[i], ms[i]) / (nc * nm);
    if (label_conditioned)
      sim += labels[i] ? (1.0 + cosine) : (1.0 - cosine);
    else
      sim += cosine;
  }
  sim /= static_cast<double>(n);

  if (label_conditioned) return bce + lambda * sim;
  return bce + lambda * (1.0 - sim);
}

// ------------------------------------------------------- batch gradients ---

DetectorParams make_gradients(const DetectorModel& model) {
  DetectorParams g = model.params;  // copy shapes
  for (auto& entry : g.registry()) {
    if (entry.matrix) entry.matrix->zero();
    if (entry.vec) std::fill(entry.vec->begin(), entry.vec->end(), 0.0);
  }
  return g;
}

EncodedCase encode_case(const DetectorModel& model, const CciCase& c) {
  EncodedCase out;
  out.case_id = c.id;
  const TokenSeq comment = tokenize_comment(c.old_comment);
  if (comment.empty()) throw DataError("case has empty comment: " + c.id);
  out.comment_ids = model.comment_ids(comment);
  const TokenSeq rendered = render_edit_script(
      build_edit_script(tokenize_code(c.old_code), tokenize_code(c.new_code)));
  if (rendered.empty()) throw DataError("case has empty code: " + c.id);
  out.diff_ids = model.diff_ids(rendered);
  out.label = c.is_positive() ? 1 : 0;
  return out;
}

double batch_loss_and_gradients(const DetectorModel& model,
                                const std::vector<EncodedCase>& batch,
                                DetectorParams& grads) {
  const std::size_t n = batch.size();
  if (n == 0) throw DataError("batch_loss_and_gradients: empty batch");
  const DetectorParams& p = model.params;
  const double lambda = model.config.lambda;
  const bool conditioned = model.config.label_conditioned_similarity;
  const double eps = model.config.prob_clamp;

  std::vector<CaseCache> caches;
  caches.reserve(n);
  std::vector<double> probs(n);
  std::vector<int> labels(n);
  std::vector<Vec> cs(n), ms(n);
  for (std::size_t i = 0; i < n; ++i) {
    caches.push_back(forward_case(model, batch[i].comment_ids,
                                  batch[i].diff_ids));
    probs[i] = caches[i].prob;
    labels[i] = batch[i].label;
    cs[i] = caches[i].comment.pooled;
    ms[i] = caches[i].attn_pooled;
  }
  const double loss =
      detector_loss(probs, labels, cs, ms, lambda, eps, conditioned);

  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    CaseCache& cc = caches[i];
    const int y = labels[i];
    const std::size_t d = cc.comment.pooled.size();

    // BCE through the clamp; the clamp indicator zeroes saturated samples
    double dprob = 0.0;
    if (cc.prob > eps && cc.prob < 1.0 - eps)
      dprob = inv_n * (y ? -1.0 / cc.prob : 1.0 / (1.0 - cc.prob));
    const double dlogit = dprob * cc.prob * (1.0 - cc.prob);

    // classifier backward
    ClassifierParams& gc = grads.classifier;
    gc.b2[0] += dlogit;
    Vec da1(cc.a1.size());
    for (std::size_t k = 0; k < cc.a1.size(); ++k) {
      gc.w2[k] += dlogit * cc.a1[k];
      da1[k] = dlogit * p.classifier.w2[k];
      if (cc.a1pre[k] <= 0.0) da1[k] = 0.0;
    }
    add_outer(gc.W1, da1, cc.input);
    axpy(gc.b1, 1.0, da1);
    const Vec dinput = matvec_t(p.classifier.W1, da1);
    Vec dc(dinput.begin(), dinput.begin() + d);
    Vec dm(dinput.begin() + d, dinput.end());

    // similarity term
    if (cc.cosine_defined && lambda > 0) {
      const double sign = conditioned ? (y ? 1.0 : -1.0) : -1.0;
      const double dcos = sign * lambda * inv_n;
      const Vec& c = cc.comment.pooled;
      const Vec& m = cc.attn_pooled;
      const double nc = norm2(c), nm = norm2(m);
      const double inv = 1.0 / (nc * nm);
      for (std::size_t k = 0; k < d; ++k) {
        dc[k] += dcos * (m[k] * inv - cc.cosine * c[k] / (nc * nc));
        dm[k] += dcos * (c[k] * inv - cc.cosine * m[k] / (nm * nm));
      }
    }

    // comment encoder: mean pool -> bigru -> embeddings
    {
      const std::size_t t_count = cc.comment.inputs.size();
      std::vector<Vec> d_combined(t_count);
      for (std::size_t t = 0; t < t_count; ++t) {
        d_combined[t] = dc;
        for (double& x : d_combined[t]) x /= static_cast<double>(t_count);
      }
      std::vector<Vec> d_inputs;
      bigru_backward(cc.comment, d_combined, p.comment_enc, grads.comment_enc,
                     d_inputs);
      for (std::size_t t = 0; t < t_count; ++t) {
        const std::size_t id = batch[i].comment_ids[t];
        for (std::size_t col = 0; col < d_inputs[t].size(); ++col)
          grads.embedding.at(id, col) += d_inputs[t][col];
      }
    }

    // diff encoder: mean pool -> attention -> bigru -> embeddings
    {
      const std::size_t t_count = cc.diff.inputs.size();
      std::vector<Vec> d_out(t_count);
      for (std::size_t t = 0; t < t_count; ++t) {
        d_out[t] = dm;
        for (double& x : d_out[t]) x /= static_cast<double>(t_count);
      }
      std::vector<Vec> d_states;
      attention_backward(cc.attn, std::move(d_out), p.attention,
                         model.config.attention_heads, grads.attention,
                         d_states);
      std::vector<Vec> d_inputs;
      bigru_backward(cc.diff, d_states, p.diff_enc, grads.diff_enc, d_inputs);
      for (std::size_t t = 0; t < t_count; ++t) {
        const std::size_t id = batch[i].diff_ids[t];
        for (std::size_t col = 0; col < d_inputs[t].size(); ++col)
          grads.embedding.at(id, col) += d_inputs[t][col];
      }
    }
  }
  return loss;
}

// -------------------------------------------------------------------- init --

namespace {

void init_gru(GruParams& g, std::size_t hidden, std::size_t input, Rng& rng) {
  auto init_mat = [&rng](Matrix& m, std::size_t r, std::size_t c) {
    m = Matrix(r, c);
    const double s = 1.0 / std::sqrt(static_cast<double>(c));
    for (double& x : m.data) x = rng.normal(0.0, s);
  };
  init_mat(g.Wz, hidden, input);
  init_mat(g.Uz, hidden, hidden);
  g.bz.assign(hidden, 0.0);
  init_mat(g.Wr, hidden, input);
  init_mat(g.Ur, hidden, hidden);
  g.br.assign(hidden, 0.0);
  init_mat(g.Wh, hidden, input);
  init_mat(g.Uh, hidden, hidden);
  g.bh.assign(hidden, 0.0);
}

void init_bigru(BiGruParams& b, std::size_t d, std::size_t hidden,
                std::size_t input, Rng& rng) {
  init_gru(b.fwd, hidden, input, rng);
  init_gru(b.bwd, hidden, input, rng);
  const double s = 1.0 / std::sqrt(static_cast<double>(hidden));
  b.Wf = Matrix(d, hidden);
  b.Wb = Matrix(d, hidden);
  for (double& x : b.Wf.data) x = rng.normal(0.0, s);
  for (double& x : b.Wb.data) x = rng.normal(0.0, s);
  b.b.assign(d, 0.0);
}

}  // namespace

DetectorModel init_detector(const DetectorConfig& config, const Corpus& corpus) {
  config.validate();
  DetectorModel model;
  model.config = config;

  // vocabulary: frequency-ranked comment and rendered-diff tokens
  std::unordered_map<std::string, std::size_t> counts;
  std::unordered_map<std::string, std::size_t> first_seen;
  std::size_t order = 0;
  auto tally = [&](const std::vector<std::string>& tokens) {
    for (const std::string& t : tokens) {
      if (is_marker_token(t)) continue;
      auto [it, inserted] = counts.try_emplace(t, 0);
      ++it->second;
      if (inserted) first_seen[t] = order++;
    }
  };
  for (const CciCase& c : corpus.cases) {
    tally(tokenize_comment(c.old_comment).tokens);
    tally(render_edit_script(build_edit_script(tokenize_code(c.old_code),
                                               tokenize_code(c.new_code)))
              .tokens);
  }
  std::vector<std::string> ranked;
  ranked.reserve(counts.size());
  for (const auto& [token, _] : counts) ranked.push_back(token);
  std::sort(ranked.begin(), ranked.end(),
            [&](const std::string& a, const std::string& b) {
              if (counts[a] != counts[b]) return counts[a] > counts[b];
              return first_seen[a] < first_seen[b];
            });
  const std::size_t reserved = model.vocab.size();
  const std::size_t cap =
      config.vocab_cap > reserved ? config.vocab_cap - reserved : 0;
  if (ranked.size() > cap) ranked.resize(cap);
  for (const std::string& t : ranked) model.vocab.add(t);

  // parameters
  Rng rng(config.seed);
  DetectorParams& p = model.params;
  const std::size_t d = config.embed_dim;
  const std::size_t hidden = config.gru_hidden;
  p.embedding = Matrix(model.vocab.size(), d);
  for (double& x : p.embedding.data) x = rng.normal(0.0, 0.1);
  init_bigru(p.comment_enc, d, hidden, d, rng);
  init_bigru(p.diff_enc, d, hidden, d, rng);
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  for (Matrix* m : {&p.attention.Wq, &p.attention.Wk, &p.attention.Wv,
                    &p.attention.Wo}) {
    *m = Matrix(d, d);
    for (double& x : m->data) x = rng.normal(0.0, sd);
  }
  p.classifier.W1 = Matrix(d, 2 * d);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(2 * d));
  for (double& x : p.classifier.W1.data) x = rng.normal(0.0, s1);
  p.classifier.b1.assign(d, 0.0);
  p.classifier.w2.assign(d, 0.0);
  for (double& x : p.classifier.w2) x = rng.normal(0.0, sd);
  p.classifier.b2.assign(1, 0.0);
  return model;
}

// ------------------------------------------------------------------- train --

namespace {

struct AdamState {
  std::vector<Vec> m, v;
  std::size_t t = 0;
};

void adam_step(DetectorParams& params, DetectorParams& grads, AdamState& state,
               double lr) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  auto reg_p = params.registry();
  auto reg_g = grads.registry();
  if (state.m.empty()) {
    state.m.resize(reg_p.size());
    state.v.resize(reg_p.size());
    for (std::size_t i = 0; i < reg_p.size(); ++i) {
      const std::size_t len = reg_p[i].matrix ? reg_p[i].matrix->data.size()
                                              : reg_p[i].vec->size();
      state.m[i].assign(len, 0.0);
      state.v[i].assign(len, 0.0);
    }
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < reg_p.size(); ++i) {
    double* w = reg_p[i].matrix ? reg_p[i].matrix->data.data()
                                : reg_p[i].vec->data();
    const double* g = reg_g[i].matrix ? reg_g[i].matrix->data.data()
                                      : reg_g[i].vec->data();
    Vec& m = state.m[i];
    Vec& v = state.v[i];
    for (std::size_t k = 0; k < m.size(); ++k) {
      m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
      v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
      w[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + eps);
    }
  }
}

void zero_params(DetectorParams& params) {
  for (auto& entry : params.registry()) {
    if (entry.matrix) entry.matrix->zero();
    if (entry.vec) std::fill(entry.vec->begin(), entry.vec->end(), 0.0);
  }
}

}  // namespace

TrainHistory train(DetectorModel& model, const Corpus& train_corpus,
                   const Corpus* valid_corpus) {
  model.config.validate();
  if (train_corpus.cases.empty()) throw DataError("train: empty corpus");
  for (const CciCase& c : train_corpus.cases)
    if (!c.label) throw DataError("train: unlabeled case " + c.id);

  std::vector<EncodedCase> encoded;
  encoded.reserve(train_corpus.cases.size());
  for (const CciCase& c : train_corpus.cases)
    encoded.push_back(encode_case(model, c));

  TrainHistory history;
  AdamState adam;
  DetectorParams grads = make_gradients(model);
  Rng shuffle_rng(model.config.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(encoded.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= model.config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size();
         start += model.config.batch_size) {
      const std::size_t end =
          std::min(order.size(), start + model.config.batch_size);
      std::vector<EncodedCase> batch;
      batch.reserve(end - start);
      for (std::size_t k = start; k < end; ++k)
        batch.push_back(encoded[order[k]]);
      zero_params(grads);
      const double loss = batch_loss_and_gradients(model, batch, grads);
      adam_step(model.params, grads, adam, model.config.learning_rate);
      loss_sum += loss * static_cast<double>(batch.size());
      seen += batch.size();
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_sum / static_cast<double>(seen);
    if (valid_corpus && !valid_corpus->cases.empty())
      stats.valid_f1 = evaluate(model, *valid_corpus).f1;
    history.epochs.push_back(stats);
  }
  return history;
}

// ----------------------------------------------------------------- predict --

Prediction predict(const DetectorModel& model, const CciCase& c) {
  return predict_with_hook(model, c, nullptr);
}

Prediction predict_with_hook(const DetectorModel& model, const CciCase& c,
                             const EncoderHook& comment_hook) {
  const TokenSeq comment = tokenize_comment(c.old_comment);
  if (comment.empty()) throw DataError("predict: empty comment for " + c.id);
  const TokenSeq rendered = render_edit_script(
      build_edit_script(tokenize_code(c.old_code), tokenize_code(c.new_code)));

  Prediction pred;
  pred.case_id = c.id;
  std::optional<Vec> hooked;
  if (comment_hook) hooked = comment_hook(comment);
  pred.comment_vector = hooked ? *hooked : encode_comment(model, comment);
  pred.code_vector = encode_diff(model, rendered);
  pred.probability = classify(model, pred.comment_vector, pred.code_vector);
  pred.inconsistent = pred.probability > 0.5;
  return pred;
}

DetectorEval evaluate(const DetectorModel& model, const Corpus& corpus) {
  std::vector<int> preds, labels;
  std::vector<std::string> ids;
  for (const CciCase& c : corpus.cases) {
    if (!c.label) throw DataError("evaluate: unlabeled case " + c.id);
    const Prediction p = predict(model, c);
    preds.push_back(p.inconsistent ? 1 : 0);
    labels.push_back(c.is_positive() ? 1 : 0);
    ids.push_back(c.id);
  }
  const ClassificationMetrics m = classification_metrics(preds, labels);
  DetectorEval out;
  out.accuracy = m.accuracy;
  out.precision = m.precision;
  out.recall = m.recall;
  out.f1 = m.f1;
  out.tp = m.confusion.tp;
  out.fp = m.confusion.fp;
  out.fn = m.confusion.fn;
  out.tn = m.confusion.tn;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i] != labels[i]) out.misclassified_ids.push_back(ids[i]);
  return out;
}

// --------------------------------------------------------------- save/load --

void save_model(const DetectorModel& model, const std::string& path) {
  ordered_json j;
  j["schema_version"] = 1;
  j["kind"] = "cci-detector";
  j["config"] = model.config.to_json();
  j["vocabulary"] = model.vocab.tokens();
  auto params = ordered_json::array();
  DetectorParams& p = const_cast<DetectorParams&>(model.params);
  for (const auto& entry : p.registry()) {
    ordered_json t;
    t["name"] = entry.name;
    if (entry.matrix) {
      t["shape"] = {entry.matrix->rows, entry.matrix->cols};
      t["data"] = entry.matrix->data;
    } else {
      t["shape"] = {entry.vec->size()};
      t["data"] = *entry.vec;
    }
    params.push_back(std::move(t));
  }
  j["params"] = params;
  std::ofstream out(path);
  if (!out.is_open()) throw DataError("cannot write model file: " + path);
  out << j.dump() << '\n';
}

DetectorModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in.is_open()) throw DataError("cannot open model file: " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& ex) {
    throw DataError("malformed model file " + path + ": " + ex.what());
  }
  if (j.value("kind", "") != "cci-detector")
    throw DataError("not a detector model file: " + path);

  DetectorModel model;
  model.config = DetectorConfig::from_json(j.at("config"));
  const auto tokens = j.at("vocabulary").get<std::vector<std::string>>();
  const std::size_t reserved = model.vocab.size();
  if (tokens.size() < reserved)
    throw DataError("model vocabulary too small");
  for (std::size_t i = 0; i < reserved; ++i)
    if (tokens[i] != model.vocab.tokens()[i])
      throw DataError("model vocabulary reserved entries mismatch");
  for (std::size_t i = reserved; i < tokens.size(); ++i)
    model.vocab.add(tokens[i]);

  // shape the parameter holders, then fill from the named entries
  const std::size_t d = model.config.embed_dim;
  const std::size_t hidden = model.config.gru_hidden;
  Rng dummy(0);
  DetectorParams& p = model.params;
  p.embedding = Matrix(model.vocab.size(), d);
  init_bigru(p.comment_enc, d, hidden, d, dummy);
  init_bigru(p.diff_enc, d, hidden, d, dummy);
  for (Matrix* m : {&p.attention.Wq, &p.attention.Wk, &p.attention.Wv,
                    &p.attention.Wo})
    *m = Matrix(d, d);
  p.classifier.W1 = Matrix(d, 2 * d);
  p.classifier.b1.assign(d, 0.0);
  p.classifier.w2.assign(d, 0.0);
  p.classifier.b2.assign(1, 0.0);

  std::unordered_map<std::string, const ordered_json*> by_name;
  for (const auto& t : j.at("params")) by_name[t.at("name")] = &t;
  for (auto& entry : p.registry()) {
    auto it = by_name.find(entry.name);
    if (it == by_name.end())
      throw DataError("model file missing tensor: " + entry.name);
    const auto data = it->second->at("data").get<Vec>();
    if (entry.matrix) {
      if (data.size() != entry.matrix->data.size())
        throw DataError("tensor size mismatch: " + entry.name);
      entry.matrix->data = data;
    } else {
      if (data.size() != entry.vec->size())
        throw DataError("tensor size mismatch: " + entry.name);
      *entry.vec = data;
    }
  }
  for (auto& entry : p.registry()) {
    const Vec& data = entry.matrix ? entry.matrix->data : *entry.vec;
    if (!all_finite(data))
      throw DataError("non-finite tensor in model file: " + entry.name);
  }
  return model;
}

ordered_json TrainHistory::to_json() const {
  auto arr = ordered_json::array();
  for (const EpochStats& e : epochs) {
    ordered_json row;
    row["epoch"] = e.epoch;
    row["mean_loss"] = e.mean_loss;
    if (e.valid_f1) row["valid_f1"] = *e.valid_f1;
    arr.push_back(std::move(row));
  }
  ordered_json j;
  j["schema_version"] = 1;
  j["epochs"] = arr;
  return j;
}

}  // namespace cci
