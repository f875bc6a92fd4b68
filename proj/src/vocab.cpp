#include "planx/vocab.hpp"

#include <sstream>
#include <stdexcept>

#include "planx/rng.hpp"

namespace planx {

Vocabulary Vocabulary::build(int vsem) {
  Vocabulary v;
  v.vsem = vsem;
  v.words = grammar_words();
  for (std::size_t i = 0; i < v.words.size(); ++i) {
    v.word_to_id[v.words[i]] = static_cast<int>(i);
  }
  int next = static_cast<int>(v.words.size());
  auto special = [&](const char* name) {
    v.words.push_back(name);
    v.word_to_id[name] = next;
    return next++;
  };
  v.pad = special("<pad>");
  v.sys_open = special("<sys>");
  v.sys_close = special("</sys>");
  v.user_open = special("<user>");
  v.user_close = special("</user>");
  v.asst_open = special("<assistant>");
  v.asst_close = special("</assistant>");
  v.im_start = special("<im_start>");
  v.im_end = special("<im_end>");
  v.scale_tok[0] = special("<S0>");
  v.scale_tok[1] = special("<S1>");
  v.scale_tok[2] = special("<S2>");
  v.image_placeholder = special("<image>");
  v.sem_base = next;
  return v;
}

std::vector<int> Vocabulary::encode_text(const std::string& text) const {
  std::vector<int> out;
  std::istringstream in(text);
  std::string w;
  while (in >> w) {
    auto it = word_to_id.find(w);
    if (it == word_to_id.end()) {
      throw std::invalid_argument("vocabulary: unknown word '" + w + "'");
    }
    out.push_back(it->second);
  }
  return out;
}

std::string Vocabulary::decode_id(int id) const {
  if (id >= 0 && id < static_cast<int>(words.size())) return words[id];
  if (is_semantic(id)) return "<sem:" + std::to_string(sem_code(id)) + ">";
  throw std::invalid_argument("vocabulary: id out of range");
}

TensorF seeded_word_table(const Vocabulary& vocab, int dim, int rows, std::uint64_t seed) {
  TensorF table = TensorF::zeros({rows, dim});
  int n_words = static_cast<int>(vocab.words.size());
  for (int j = 0; j < rows; ++j) {
    const std::string& word = vocab.words[j % n_words];
    Rng r(mix64(fnv1a64(word, seed), static_cast<std::uint64_t>(j / n_words)));
    float* row = table.ptr() + static_cast<std::size_t>(j) * dim;
    for (int k = 0; k < dim; ++k) {
      row[k] = static_cast<float>(r.normal() / std::sqrt(static_cast<double>(dim)));
    }
  }
  return table;
}

}  // namespace planx
