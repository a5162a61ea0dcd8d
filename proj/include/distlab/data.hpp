#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "distlab/errors.hpp"

namespace distlab {

struct Example {
  std::string text;
  int label = 0;
};

/// Token ids; id 0 is PAD, id 1 is UNK. Built from the training split only.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocab();
  int id(const std::string& token) const;  // kUnk for unknown tokens
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(id_to_token_.size()); }
  void add(const std::string& token);

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

struct DatasetSplit {
  std::vector<Example> train;
  std::vector<Example> test;
  int num_classes = 0;
  std::string name;       // provenance: dataset name
  uint64_t seed = 0;      // provenance: subset / generator seed
};

/// Fixed-size slice of encoded examples: token_ids is row-major
/// [size, seq_len], right-padded with kPad.
struct Batch {
  std::vector<int> token_ids;
  std::vector<int> labels;
  int size = 0;
  int seq_len = 0;
};

/// Lowercase, split on Unicode whitespace, strip leading/trailing ASCII
/// punctuation per token, drop empties.
std::vector<std::string> tokenize(const std::string& text);

/// Parses `label<TAB>text` lines (0-based integer labels). Malformed lines
/// raise ParseError naming the line number.
std::vector<Example> load_tsv(const std::string& path);

/// Same format as load_tsv reads, so synthetic dumps and real subsets are
/// interchangeable.
void write_tsv(const std::string& path, const std::vector<Example>& examples);

/// Assembles and validates a split: every class present in train, labels in
/// range, train/test disjoint, texts non-empty after tokenization.
DatasetSplit make_split(std::vector<Example> train, std::vector<Example> test,
                        std::string name, uint64_t seed);

/// Frequency-ranked vocabulary from the training split, ties broken
/// lexicographically, capped at max_size entries (PAD/UNK included).
Vocab build_vocab(const std::vector<Example>& train, int max_size = 20000);

/// Encodes examples to exactly max_len ids each: truncate, then right-pad.
/// max_len >= 5 so every TextCNN kernel width fits.
Batch encode_batch(const std::vector<Example>& examples, const Vocab& vocab,
                   int max_len);

/// Deterministic per-epoch shuffle keyed by (seed, epoch); the final short
/// batch is kept.
std::vector<std::vector<int>> shuffled_index_batches(int n, int batch_size,
                                                     uint64_t seed, int epoch);

std::vector<Batch> batch_iter(const std::vector<Example>& examples,
                              const Vocab& vocab, int max_len, int batch_size,
                              uint64_t shuffle_seed, int epoch);

struct SyntheticParams {
  int num_classes = 4;
  int vocab_size = 400;
  int examples_per_class = 500;
  double noise_rate = 0.0;
  uint64_t seed = 1;
};

/// Each class owns a disjoint set of signal tokens; an example is 8-20
/// tokens drawn from its class signal set, except a noise_rate fraction
/// drawn uniformly from the whole vocabulary. Stratified 80/20 train/test.
DatasetSplit make_synthetic(const SyntheticParams& params,
                            const std::string& name = "synthetic");

}  // namespace distlab
