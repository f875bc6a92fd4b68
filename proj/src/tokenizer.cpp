#include "planx/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "planx/ops.hpp"
#include "planx/rng.hpp"

namespace planx {

int TokenizerConfig::scale_tokens(int scale) const {
  auto it = scales.find(scale);
  if (it == scales.end()) {
    throw std::invalid_argument("tokenizer: unknown scale id " + std::to_string(scale));
  }
  return it->second;
}

int TokenizerConfig::scale_grid(int scale) const {
  int n = scale_tokens(scale);
  int g = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (g * g != n) {
    throw std::invalid_argument("tokenizer: token count " + std::to_string(n) +
                                " is not a perfect square");
  }
  return g;
}

int TokenizerConfig::pool_factor(int scale) const {
  int g = scale_grid(scale);
  if (grid() % g != 0) {
    throw std::invalid_argument("tokenizer: scale grid does not divide the patch grid");
  }
  return grid() / g;
}

namespace {

TensorF init_weight(Rng& rng, int in, int out, double gain = 1.0) {
  TensorF w = TensorF::zeros({in, out}, true);
  double std = gain / std::sqrt(static_cast<double>(in));
  for (auto& x : *w.data) x = static_cast<float>(rng.normal() * std);
  return w;
}

TensorF init_zeros(int n) { return TensorF::zeros({n}, true); }

TensorF init_ones(int n) { return TensorF::full({n}, 1.0f, true); }

VqTokenizer::Block make_block(ParamRegistry& params, Rng& rng, const std::string& prefix, int dim,
                              int ff) {
  VqTokenizer::Block b;
  b.n1 = params.add(prefix + ".attn_norm", init_ones(dim));
  b.wq = params.add(prefix + ".wq", init_weight(rng, dim, dim));
  b.wk = params.add(prefix + ".wk", init_weight(rng, dim, dim));
  b.wv = params.add(prefix + ".wv", init_weight(rng, dim, dim));
  b.wo = params.add(prefix + ".wo", init_weight(rng, dim, dim));
  b.n2 = params.add(prefix + ".mlp_norm", init_ones(dim));
  b.w1 = params.add(prefix + ".mlp_w1", init_weight(rng, dim, ff));
  b.b1 = params.add(prefix + ".mlp_b1", init_zeros(ff));
  b.w2 = params.add(prefix + ".mlp_w2", init_weight(rng, ff, dim));
  b.b2 = params.add(prefix + ".mlp_b2", init_zeros(dim));
  return b;
}

TensorF block_forward(const TensorF& x, const VqTokenizer::Block& b, int heads) {
  TensorF h = rmsnorm(x, b.n1);
  TensorF q = linear(h, b.wq);
  TensorF k = linear(h, b.wk);
  TensorF v = linear(h, b.wv);
  TensorF a = attention(q, k, v, heads, false);
  TensorF x1 = add(x, linear(a, b.wo));
  TensorF h2 = rmsnorm(x1, b.n2);
  TensorF f = linear(silu(linear(h2, b.w1, &b.b1)), b.w2, &b.b2);
  return add(x1, f);
}

}  // namespace

VqTokenizer VqTokenizer::create(const TokenizerConfig& cfg, const Vocabulary& vocab,
                                std::uint64_t seed, const std::string& init_source) {
  VqTokenizer t;
  t.cfg = cfg;
  Rng rng(seed);
  const int d = cfg.dim;
  const int np = cfg.grid() * cfg.grid();
  t.patch_w = t.params.add("enc.patch_w", init_weight(rng, cfg.patch_dim(), d));
  t.patch_b = t.params.add("enc.patch_b", init_zeros(d));
  t.enc_pos = t.params.add("enc.pos", init_weight(rng, np, d, 0.5));
  for (int i = 0; i < cfg.enc_blocks; ++i) {
    t.enc.push_back(make_block(t.params, rng, "enc.block" + std::to_string(i), d, cfg.ff_hidden));
  }
  t.enc_norm = t.params.add("enc.norm", init_ones(d));

  t.dec_pos = t.params.add("dec.pos", init_weight(rng, np, d, 0.5));
  for (int i = 0; i < cfg.dec_blocks; ++i) {
    t.dec.push_back(make_block(t.params, rng, "dec.block" + std::to_string(i), d, cfg.ff_hidden));
  }
  t.dec_norm = t.params.add("dec.norm", init_ones(d));
  t.dec_out_w = t.params.add("dec.out_w", init_weight(rng, d, cfg.patch_dim()));
  t.dec_out_b = t.params.add("dec.out_b", init_zeros(cfg.patch_dim()));

  t.codebook.init_source = init_source;
  TensorF entries;
  if (init_source == "text_embeddings") {
    entries = seeded_word_table(vocab, d, cfg.vsem, seed);
    entries.requires_grad = true;
    entries.ensure_grad();
  } else if (init_source == "random") {
    entries = init_weight(rng, cfg.vsem, d);
  } else {
    throw std::invalid_argument("tokenizer: unknown init_source '" + init_source + "'");
  }
  t.codebook.entries = t.params.add("codebook", entries);
  return t;
}

Keyframes sample_keyframes(const VideoClip& clip, int sem_fps, int side) {
  if (clip.frames <= 0) throw std::invalid_argument("sample_keyframes: empty clip");
  if (sem_fps < 1 || sem_fps > clip.fps) {
    throw std::invalid_argument("sample_keyframes: sem_fps must be in [1, clip fps]");
  }
  Keyframes out;
  double duration = static_cast<double>(clip.frames) / clip.fps;
  int count = static_cast<int>(std::floor(duration * sem_fps + 1e-9)) + 1;
  for (int k = 0; k < count; ++k) {
    double t = static_cast<double>(k) / sem_fps;
    int idx = std::min(static_cast<int>(std::lround(t * clip.fps)), clip.frames - 1);
    out.src_index.push_back(idx);
    out.times.push_back(t);
    const float* src = clip.frame(idx);
    std::vector<float> frame(static_cast<std::size_t>(side) * side * 3);
    if (side == clip.h && side == clip.w) {
      std::copy(src, src + frame.size(), frame.begin());
    } else {
      for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
          int sy = std::min(clip.h - 1, y * clip.h / side);
          int sx = std::min(clip.w - 1, x * clip.w / side);
          for (int c = 0; c < 3; ++c) {
            frame[(static_cast<std::size_t>(y) * side + x) * 3 + c] =
                src[(static_cast<std::size_t>(sy) * clip.w + sx) * 3 + c];
          }
        }
      }
    }
    out.frames.push_back(std::move(frame));
  }
  return out;
}

std::pair<int, double> quantize(const float* vec, int dim, const Codebook& codebook) {
  if (codebook.entries.shape[1] != dim) {
    throw std::invalid_argument("quantize: dimension mismatch");
  }
  const int v = codebook.entries.shape[0];
  int best = 0;
  double best_d2 = 1e300;
  for (int i = 0; i < v; ++i) {
    const float* e = codebook.entries.ptr() + static_cast<std::size_t>(i) * dim;
    double d2 = 0;
    for (int j = 0; j < dim; ++j) {
      double d = vec[j] - e[j];
      d2 += d * d;
    }
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return {best, std::sqrt(best_d2)};
}

std::vector<float> patchify_frame(const float* frame, int side, int patch) {
  const int g = side / patch;
  std::vector<float> out(static_cast<std::size_t>(g) * g * patch * patch * 3);
  std::size_t o = 0;
  for (int pr = 0; pr < g; ++pr) {
    for (int pc = 0; pc < g; ++pc) {
      for (int y = 0; y < patch; ++y) {
        for (int x = 0; x < patch; ++x) {
          const float* p = frame + ((static_cast<std::size_t>(pr * patch + y) * side) +
                                    pc * patch + x) * 3;
          out[o++] = p[0];
          out[o++] = p[1];
          out[o++] = p[2];
        }
      }
    }
  }
  return out;
}

std::vector<float> unpatchify_frame(const float* patches, int side, int patch) {
  const int g = side / patch;
  std::vector<float> out(static_cast<std::size_t>(side) * side * 3);
  std::size_t o = 0;
  for (int pr = 0; pr < g; ++pr) {
    for (int pc = 0; pc < g; ++pc) {
      for (int y = 0; y < patch; ++y) {
        for (int x = 0; x < patch; ++x) {
          float* p = out.data() + ((static_cast<std::size_t>(pr * patch + y) * side) +
                                   pc * patch + x) * 3;
          p[0] = patches[o++];
          p[1] = patches[o++];
          p[2] = patches[o++];
        }
      }
    }
  }
  return out;
}

namespace {

TensorF encoder_forward(const VqTokenizer& tok, const TensorF& patches) {
  TensorF x = linear(patches, tok.patch_w, &tok.patch_b);
  x = add(x, tok.enc_pos);
  for (const auto& b : tok.enc) x = block_forward(x, b, tok.cfg.heads);
  return rmsnorm(x, tok.enc_norm);
}

TensorF decoder_forward(const VqTokenizer& tok, const TensorF& z, int scale) {
  int g = tok.cfg.scale_grid(scale);
  int f = tok.cfg.pool_factor(scale);
  TensorF x = upsample_grid(z, g, f);
  x = add(x, tok.dec_pos);
  for (const auto& b : tok.dec) x = block_forward(x, b, tok.cfg.heads);
  x = rmsnorm(x, tok.dec_norm);
  return linear(x, tok.dec_out_w, &tok.dec_out_b);
}

}  // namespace

std::vector<int> encode_frame(const VqTokenizer& tok, const float* frame, int scale) {
  NoGradGuard ng;
  int f = tok.cfg.pool_factor(scale);  // validates the scale id
  std::vector<float> pv = patchify_frame(frame, tok.cfg.frame_side, tok.cfg.patch);
  TensorF patches = TensorF::from_vector({tok.cfg.grid() * tok.cfg.grid(), tok.cfg.patch_dim()},
                                         pv);
  TensorF enc = encoder_forward(tok, patches);
  TensorF pooled = mean_pool_grid(enc, tok.cfg.grid(), f);
  std::vector<int> ids(pooled.shape[0]);
  for (int i = 0; i < pooled.shape[0]; ++i) {
    ids[i] = quantize(pooled.ptr() + static_cast<std::size_t>(i) * tok.cfg.dim, tok.cfg.dim,
                      tok.codebook).first;
  }
  return ids;
}

std::vector<float> decode_tokens(const VqTokenizer& tok, const std::vector<int>& ids, int scale) {
  NoGradGuard ng;
  int g = tok.cfg.scale_grid(scale);
  if (static_cast<int>(ids.size()) != g * g) {
    throw std::invalid_argument("decode_tokens: expected " + std::to_string(g * g) + " ids");
  }
  TensorF z = embedding(detach(tok.codebook.entries), ids);
  TensorF patches = decoder_forward(tok, z, scale);
  std::vector<float> frame = unpatchify_frame(patches.ptr(), tok.cfg.frame_side, tok.cfg.patch);
  for (auto& v : frame) v = std::clamp(v, 0.0f, 1.0f);
  return frame;
}

SemanticPlan encode_clip(const VqTokenizer& tok, const VideoClip& clip, int scale) {
  Keyframes kf = sample_keyframes(clip, tok.cfg.sem_fps, tok.cfg.frame_side);
  SemanticPlan plan;
  plan.scale = scale;
  plan.keyframes = static_cast<int>(kf.frames.size());
  plan.n = tok.cfg.scale_tokens(scale);
  for (const auto& f : kf.frames) {
    std::vector<int> ids = encode_frame(tok, f.data(), scale);
    plan.tokens.insert(plan.tokens.end(), ids.begin(), ids.end());
  }
  return plan;
}

TokenizerTrainReport train_tokenizer(VqTokenizer& tok,
                                     const std::vector<std::vector<float>>& frames,
                                     const TokenizerTrainOpts& opts, int planning_scale,
                                     const std::function<void(const std::string&)>& log) {
  if (frames.empty()) throw std::invalid_argument("train_tokenizer: empty corpus");
  TokenizerTrainReport report;
  report.planning_scale = planning_scale;
  AdamWConfig acfg;
  acfg.lr = opts.lr;
  acfg.weight_decay = opts.weight_decay;
  AdamW opt(tok.params, acfg);
  Rng rng(opts.seed);
  const int np = tok.cfg.grid() * tok.cfg.grid();

  for (int scale : opts.scales) {
    report.usage[scale].assign(tok.cfg.vsem, 0);
  }

  std::vector<int> order(frames.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    rng.shuffle(order);
    bool last_epoch = epoch == opts.epochs - 1;
    if (last_epoch) {
      for (auto& [s, u] : report.usage) std::fill(u.begin(), u.end(), 0LL);
    }
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch) {
      std::size_t end = std::min(order.size(), start + opts.batch);
      tok.params.zero_grad();
      TensorF total = TensorF::zeros({1});
      for (std::size_t bi = start; bi < end; ++bi) {
        const auto& frame = frames[order[bi]];
        std::vector<float> pv = patchify_frame(frame.data(), tok.cfg.frame_side, tok.cfg.patch);
        TensorF patches = TensorF::from_vector({np, tok.cfg.patch_dim()}, pv);
        TensorF enc = encoder_forward(tok, patches);
        for (int sc : opts.scales) {
          int f = tok.cfg.pool_factor(sc);
          TensorF pooled = mean_pool_grid(enc, tok.cfg.grid(), f);
          std::vector<int> ids(pooled.shape[0]);
          for (int i = 0; i < pooled.shape[0]; ++i) {
            ids[i] = quantize(pooled.ptr() + static_cast<std::size_t>(i) * tok.cfg.dim,
                              tok.cfg.dim, tok.codebook).first;
            if (last_epoch) report.usage[sc][ids[i]]++;
          }
          TensorF zq = embedding(tok.codebook.entries, ids);
          TensorF code_loss = mse_rows(zq, detach(pooled));
          TensorF commit_loss = mse_rows(pooled, detach(zq));
          TensorF dec_in = straight_through(zq, pooled);
          TensorF out = decoder_forward(tok, dec_in, sc);
          TensorF recon = mse_rows(out, patches);
          TensorF l = add(recon, add(code_loss,
                                     scale(commit_loss, static_cast<float>(opts.commit_beta))));
          total = add(total, l);
        }
      }
      total = scale(total, 1.0f / static_cast<float>((end - start) * opts.scales.size()));
      double lv = total.item();
      if (!std::isfinite(lv)) throw std::runtime_error("train_tokenizer: non-finite loss");
      total.backward();
      opt.step();
      epoch_loss += lv;
      ++batches;
    }
    epoch_loss /= std::max(1, batches);
    report.epoch_loss.push_back(epoch_loss);
    if (log) {
      std::ostringstream os;
      os << "tokenizer epoch " << epoch << " loss " << epoch_loss;
      log(os.str());
    }
  }

  // usage statistics at the planning scale
  const auto& usage = report.usage[planning_scale];
  long long total_tokens = 0;
  int used = 0;
  for (long long u : usage) {
    total_tokens += u;
    if (u > 0) used++;
  }
  report.usage_fraction = static_cast<double>(used) / tok.cfg.vsem;
  double h = 0.0;
  for (long long u : usage) {
    if (u == 0) continue;
    double p = static_cast<double>(u) / total_tokens;
    h -= p * std::log(p);
  }
  report.usage_entropy_ratio = h / std::log(static_cast<double>(tok.cfg.vsem));
  report.collapse_warning = report.usage_fraction < 0.10;
  if (report.collapse_warning && log) {
    log("tokenizer warning: codebook collapse, usage fraction " +
        std::to_string(report.usage_fraction));
  }
  return report;
}

}  // namespace planx
