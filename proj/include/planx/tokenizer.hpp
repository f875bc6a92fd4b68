#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "planx/optim.hpp"
#include "planx/tensor.hpp"
#include "planx/vocab.hpp"
#include "planx/world.hpp"

namespace planx {

struct TokenizerConfig {
  int patch = 4;
  int dim = 64;
  int frame_side = 32;
  int sem_fps = 2;
  int heads = 4;
  int enc_blocks = 2;
  int dec_blocks = 2;
  int ff_hidden = 256;
  int vsem = 512;
  // scale id -> spatial token count; defaults mirror the paper's
  // {729, 169, 81} scheme at desk size.
  std::map<int, int> scales = {{0, 64}, {1, 16}, {2, 4}};

  int grid() const { return frame_side / patch; }
  int patch_dim() const { return patch * patch * 3; }
  int scale_tokens(int scale) const;
  int scale_grid(int scale) const;   // sqrt(token count)
  int pool_factor(int scale) const;  // grid() / scale_grid()
};

struct Codebook {
  TensorF entries;  // [vsem, dim]
  std::string init_source = "text_embeddings";
};

struct VqTokenizer {
  TokenizerConfig cfg;
  ParamRegistry params;

  struct Block {
    TensorF n1, wq, wk, wv, wo, n2, w1, b1, w2, b2;
  };

  TensorF patch_w, patch_b, enc_pos, enc_norm;
  std::vector<Block> enc;
  TensorF dec_pos, dec_norm, dec_out_w, dec_out_b;
  std::vector<Block> dec;
  Codebook codebook;

  static VqTokenizer create(const TokenizerConfig& cfg, const Vocabulary& vocab,
                            std::uint64_t seed, const std::string& init_source);
};

struct SemanticPlan {
  std::vector<int> tokens;  // [keyframes * n] row-major codebook indices
  int keyframes = 0;
  int n = 0;
  int scale = 0;
};

struct Keyframes {
  std::vector<std::vector<float>> frames;  // side*side*3 each
  std::vector<int> src_index;
  std::vector<double> times;
};

// Frames at t = 0, 1/sem_fps, ... inclusive of t=0; the final sample clamps
// to the last frame. Resizes (nearest) to `side` when needed.
Keyframes sample_keyframes(const VideoClip& clip, int sem_fps, int side);

// Nearest codebook entry under Euclidean distance; ties break low.
std::pair<int, double> quantize(const float* vec, int dim, const Codebook& codebook);

std::vector<float> patchify_frame(const float* frame, int side, int patch);
std::vector<float> unpatchify_frame(const float* patches, int side, int patch);

std::vector<int> encode_frame(const VqTokenizer& tok, const float* frame, int scale);
std::vector<float> decode_tokens(const VqTokenizer& tok, const std::vector<int>& ids, int scale);

SemanticPlan encode_clip(const VqTokenizer& tok, const VideoClip& clip, int scale);

struct TokenizerTrainOpts {
  int epochs = 3;
  int batch = 16;
  double lr = 1e-3;
  double weight_decay = 0.01;
  double commit_beta = 0.25;
  std::uint64_t seed = 0;
  std::vector<int> scales = {0, 1, 2};
};

struct TokenizerTrainReport {
  std::vector<double> epoch_loss;
  std::map<int, std::vector<long long>> usage;  // per scale, counts per entry
  double usage_fraction = 0.0;                  // entries used at planning scale
  double usage_entropy_ratio = 0.0;             // H / log(vsem) at planning scale
  bool collapse_warning = false;
  int planning_scale = 1;
};

TokenizerTrainReport train_tokenizer(VqTokenizer& tok,
                                     const std::vector<std::vector<float>>& frames,
                                     const TokenizerTrainOpts& opts, int planning_scale,
                                     const std::function<void(const std::string&)>& log);

}  // namespace planx
