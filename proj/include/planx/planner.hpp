#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "planx/optim.hpp"
#include "planx/rope.hpp"
#include "planx/tensor.hpp"
#include "planx/tokenizer.hpp"
#include "planx/vocab.hpp"
#include "planx/world.hpp"

namespace planx {

enum class TaskMode { t2v = 0, i2v = 1, continuation = 2 };

// Token sequence in the conversation template. The loss mask is true exactly
// on the assistant's semantic-token positions.
struct Conversation {
  std::vector<int> ids;
  std::vector<std::uint8_t> loss_mask;
  std::vector<std::uint8_t> zero_embed;
  std::vector<int> sem_positions;  // positions of assistant semantic ids
  int keyframes_total = 0;         // T in the system prompt
  int gen_blocks = 0;              // assistant keyframe blocks
  int n_per_frame = 0;
  int plan_scale = 0;
  TaskMode mode = TaskMode::t2v;
  bool first_frame_given = false;
  int prefix_len = 0;  // length up to and including <assistant>
};

struct ConversationSpec {
  int plan_scale = 1;
  int n_per_frame = 16;
  int fine_scale = 0;
  int fine_len = 64;
};

// Assembles the conversation for any of the three tasks. `plan` may be empty
// (inference prefix); when present it must hold gen_blocks x n tokens where
// gen_blocks is T for t2v, T-1 for i2v, and T-chunk for continuation.
Conversation build_conversation(const Vocabulary& vocab, const ConversationSpec& spec,
                                const PromptBundle& bundle,
                                const std::optional<std::vector<int>>& first_frame_fine_ids,
                                const std::vector<std::vector<int>>& chunk_blocks,
                                const std::vector<int>& plan_tokens, int keyframes_total);

// Inverse of the assistant template; throws when the block structure is
// malformed.
SemanticPlan parse_plan_from_conversation(const Vocabulary& vocab, const Conversation& conv);

struct PlannerConfig {
  int width = 128;
  int blocks = 4;
  int heads = 4;
  int ff_hidden = 512;
  int context = 1024;
  double rope_base = 10000.0;
};

struct PlannerModel {
  PlannerConfig cfg;
  Vocabulary vocab;
  ParamRegistry params;
  RopeTable rope;

  struct Block {
    TensorF n1, wq, wk, wv, wo, n2, w1, b1, w2, b2;
  };
  TensorF tok_emb;
  std::vector<Block> blocks;
  TensorF final_norm, head_w;

  static PlannerModel create(const PlannerConfig& cfg, const Vocabulary& vocab,
                             std::uint64_t seed);

  // Full forward; returns final hidden states [S, width]. Logits are
  // linear(hidden, head_w).
  TensorF forward_hidden(const std::vector<int>& ids,
                         const std::vector<std::uint8_t>* zero_embed) const;
  TensorF forward_logits(const std::vector<int>& ids,
                         const std::vector<std::uint8_t>* zero_embed) const;
};

TensorF planner_loss(const PlannerModel& model, const Conversation& conv);

// Incremental decoding state: per block rotated keys and values.
struct PlannerCache {
  std::vector<AVec<float>> k, v;
  int len = 0;
};

// Feeds one token; returns the logit row for the next position (no grad).
std::vector<float> planner_step(const PlannerModel& model, PlannerCache& cache, int token,
                                bool zero_embed, std::vector<float>* hidden_out = nullptr);

struct PlanSample {
  SemanticPlan plan;
  Conversation conv;                 // full conversation including sampled ids
  std::vector<std::vector<float>> hidden;  // last hidden state per semantic token
};

// Template-constrained autoregressive sampling: delimiters are forced,
// semantic positions sample from the semantic id block. Temperature 0 is
// argmax.
PlanSample sample_plan(const PlannerModel& model, const ConversationSpec& spec,
                       const PromptBundle& bundle,
                       const std::optional<std::vector<int>>& first_frame_fine_ids,
                       const std::vector<std::vector<int>>& chunk_blocks, int keyframes_total,
                       double temperature, Rng& rng);

struct PlannerTrainOpts {
  int epochs = 6;
  int batch = 8;
  double lr = 3e-4;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
};

struct PlannerTrainReport {
  std::vector<double> epoch_loss;
};

// Conversations are supplied by a builder so the zero-out draw happens
// freshly each epoch.
PlannerTrainReport train_planner(PlannerModel& model, int n_samples,
                                 const std::function<Conversation(int, Rng&)>& sample_conv,
                                 const PlannerTrainOpts& opts,
                                 const std::function<void(const std::string&)>& log);

}  // namespace planx
