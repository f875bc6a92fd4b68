#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "planx/tensor.hpp"
#include "planx/world.hpp"

namespace planx {

// Unified text + semantic id space. Text tokens come from the closed caption
// grammar; semantic tokens occupy a disjoint block of vsem ids at the top.
struct Vocabulary {
  std::vector<std::string> words;
  std::unordered_map<std::string, int> word_to_id;
  int vsem = 0;

  int pad = -1;
  int sys_open = -1, sys_close = -1;
  int user_open = -1, user_close = -1;
  int asst_open = -1, asst_close = -1;
  int im_start = -1, im_end = -1;
  int scale_tok[3] = {-1, -1, -1};  // <S0> <S1> <S2>
  int image_placeholder = -1;       // <image>
  int sem_base = -1;

  int size() const { return sem_base + vsem; }
  int n_text() const { return sem_base; }
  bool is_semantic(int id) const { return id >= sem_base && id < size(); }
  int sem_id(int code) const { return sem_base + code; }
  int sem_code(int id) const { return id - sem_base; }

  std::vector<int> encode_text(const std::string& text) const;
  std::string decode_id(int id) const;

  static Vocabulary build(int vsem);
};

// Deterministic per-entry word embeddings: row j is drawn from a stream
// seeded by (word j mod W, cycle j / W), so every codebook entry has a
// designated text row it copies exactly.
TensorF seeded_word_table(const Vocabulary& vocab, int dim, int rows, std::uint64_t seed);

}  // namespace planx
