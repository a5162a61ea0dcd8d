#include "distlab/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "distlab/rng.hpp"

namespace distlab {

// ---------------------------------------------------------------------------
// Vocab
// ---------------------------------------------------------------------------

Vocab::Vocab() {
  id_to_token_ = {"<pad>", "<unk>"};
  token_to_id_ = {{"<pad>", kPad}, {"<unk>", kUnk}};
}

int Vocab::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) {
    throw ValueError("vocab id " + std::to_string(id) + " outside [0, " +
                     std::to_string(size()) + ")");
  }
  return id_to_token_[static_cast<size_t>(id)];
}

void Vocab::add(const std::string& token) {
  if (token_to_id_.count(token)) return;
  token_to_id_[token] = size();
  id_to_token_.push_back(token);
}

// ---------------------------------------------------------------------------
// tokenize
// ---------------------------------------------------------------------------

namespace {

// decodes one UTF-8 codepoint; malformed bytes pass through as themselves
uint32_t next_codepoint(const std::string& s, size_t& i) {
  const unsigned char c = static_cast<unsigned char>(s[i]);
  int extra = 0;
  uint32_t cp = c;
  if (c >= 0xF0) {
    extra = 3;
    cp = c & 0x07u;
  } else if (c >= 0xE0) {
    extra = 2;
    cp = c & 0x0Fu;
  } else if (c >= 0xC0) {
    extra = 1;
    cp = c & 0x1Fu;
  }
  size_t j = i + 1;
  for (; extra > 0 && j < s.size(); --extra, ++j) {
    const unsigned char cc = static_cast<unsigned char>(s[j]);
    if ((cc & 0xC0u) != 0x80u) break;
    cp = (cp << 6) | (cc & 0x3Fu);
  }
  i = j;
  return cp;
}

bool is_unicode_space(uint32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_ascii_punct(char c) {
  const unsigned char u = static_cast<unsigned char>(c);
  return u < 128 && std::ispunct(u);
}

void push_token(std::vector<std::string>& out, std::string&& raw) {
  size_t b = 0, e = raw.size();
  while (b < e && is_ascii_punct(raw[b])) ++b;
  while (e > b && is_ascii_punct(raw[e - 1])) --e;
  if (e > b) out.emplace_back(raw.substr(b, e - b));
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  size_t i = 0;
  while (i < text.size()) {
    const size_t start = i;
    const uint32_t cp = next_codepoint(text, i);
    if (is_unicode_space(cp)) {
      if (!current.empty()) push_token(tokens, std::move(current));
      current.clear();
    } else {
      for (size_t k = start; k < i; ++k) {
        char c = text[k];
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        current.push_back(c);
      }
    }
  }
  if (!current.empty()) push_token(tokens, std::move(current));
  return tokens;
}

// ---------------------------------------------------------------------------
// TSV
// ---------------------------------------------------------------------------

std::vector<Example> load_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::vector<Example> examples;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto where = [&] { return path + ":" + std::to_string(line_no); };
    const size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError(where() + ": missing tab separator");
    }
    const std::string label_str = line.substr(0, tab);
    int label = 0;
    try {
      size_t used = 0;
      label = std::stoi(label_str, &used);
      if (used != label_str.size()) throw std::invalid_argument(label_str);
    } catch (const std::exception&) {
      throw ParseError(where() + ": label '" + label_str +
                       "' is not an integer");
    }
    if (label < 0) throw ParseError(where() + ": negative label");
    std::string text = line.substr(tab + 1);
    if (tokenize(text).empty()) {
      throw ParseError(where() + ": empty text after tokenization");
    }
    examples.push_back({std::move(text), label});
  }
  return examples;
}

void write_tsv(const std::string& path, const std::vector<Example>& examples) {
  std::ofstream out(path, std::ios::binary);  // binary keeps \n line endings
  if (!out) throw ConfigError("cannot write " + path);
  for (const Example& e : examples) {
    out << e.label << '\t' << e.text << '\n';
  }
}

// ---------------------------------------------------------------------------
// split assembly
// ---------------------------------------------------------------------------

DatasetSplit make_split(std::vector<Example> train, std::vector<Example> test,
                        std::string name, uint64_t seed) {
  if (train.empty()) throw ConfigError(name + ": empty train split");
  int num_classes = 0;
  for (const auto* part : {&train, &test}) {
    for (const Example& e : *part) {
      num_classes = std::max(num_classes, e.label + 1);
    }
  }
  if (num_classes < 2) {
    throw ConfigError(name + ": need at least 2 classes, saw " +
                      std::to_string(num_classes));
  }
  std::vector<char> seen(static_cast<size_t>(num_classes), 0);
  for (const Example& e : train) seen[static_cast<size_t>(e.label)] = 1;
  for (int c = 0; c < num_classes; ++c) {
    if (!seen[static_cast<size_t>(c)]) {
      throw ConfigError(name + ": class " + std::to_string(c) +
                        " missing from train split");
    }
  }
  std::unordered_set<std::string> train_keys;
  train_keys.reserve(train.size());
  for (const Example& e : train) {
    train_keys.insert(std::to_string(e.label) + "\t" + e.text);
  }
  for (const Example& e : test) {
    if (train_keys.count(std::to_string(e.label) + "\t" + e.text)) {
      throw ConfigError(name + ": train/test overlap on '" + e.text + "'");
    }
  }
  DatasetSplit split;
  split.train = std::move(train);
  split.test = std::move(test);
  split.num_classes = num_classes;
  split.name = std::move(name);
  split.seed = seed;
  return split;
}

// ---------------------------------------------------------------------------
// vocabulary / encoding / batching
// ---------------------------------------------------------------------------

Vocab build_vocab(const std::vector<Example>& train, int max_size) {
  if (max_size < 3) throw ConfigError("vocab max_size must be at least 3");
  std::unordered_map<std::string, long long> counts;
  for (const Example& e : train) {
    for (const std::string& tok : tokenize(e.text)) ++counts[tok];
  }
  std::vector<std::pair<std::string, long long>> ranked(counts.begin(),
                                                        counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab vocab;
  for (const auto& [tok, _] : ranked) {
    if (vocab.size() >= max_size) break;
    vocab.add(tok);
  }
  return vocab;
}

Batch encode_batch(const std::vector<Example>& examples, const Vocab& vocab,
                   int max_len) {
  if (examples.empty()) throw ConfigError("encode_batch: empty batch");
  if (max_len < 5) {
    throw ConfigError("max_len must be >= 5 so every kernel width fits, got " +
                      std::to_string(max_len));
  }
  Batch batch;
  batch.size = static_cast<int>(examples.size());
  batch.seq_len = max_len;
  batch.token_ids.assign(examples.size() * static_cast<size_t>(max_len),
                         Vocab::kPad);
  batch.labels.reserve(examples.size());
  for (size_t i = 0; i < examples.size(); ++i) {
    const auto tokens = tokenize(examples[i].text);
    const size_t n = std::min(tokens.size(), static_cast<size_t>(max_len));
    for (size_t j = 0; j < n; ++j) {
      batch.token_ids[i * static_cast<size_t>(max_len) + j] =
          vocab.id(tokens[j]);
    }
    batch.labels.push_back(examples[i].label);
  }
  return batch;
}

std::vector<std::vector<int>> shuffled_index_batches(int n, int batch_size,
                                                     uint64_t seed, int epoch) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  Rng rng(mix_seed(seed, static_cast<uint64_t>(epoch)));
  fisher_yates(order, rng);
  std::vector<std::vector<int>> batches;
  for (int start = 0; start < n; start += batch_size) {
    const int end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

std::vector<Batch> batch_iter(const std::vector<Example>& examples,
                              const Vocab& vocab, int max_len, int batch_size,
                              uint64_t shuffle_seed, int epoch) {
  std::vector<Batch> out;
  for (const auto& idx : shuffled_index_batches(
           static_cast<int>(examples.size()), batch_size, shuffle_seed,
           epoch)) {
    std::vector<Example> picked;
    picked.reserve(idx.size());
    for (int i : idx) picked.push_back(examples[static_cast<size_t>(i)]);
    out.push_back(encode_batch(picked, vocab, max_len));
  }
  return out;
}

// ---------------------------------------------------------------------------
// synthetic generator
// ---------------------------------------------------------------------------

DatasetSplit make_synthetic(const SyntheticParams& p, const std::string& name) {
  if (p.num_classes < 2) throw ConfigError("synthetic: need >= 2 classes");
  if (p.vocab_size < 2 * p.num_classes) {
    throw ConfigError("synthetic: vocab_size must be >= 2 * num_classes");
  }
  if (p.examples_per_class < 5) {
    throw ConfigError("synthetic: need >= 5 examples per class");
  }
  if (p.noise_rate < 0.0 || p.noise_rate > 1.0) {
    throw ConfigError("synthetic: noise_rate outside [0, 1]");
  }

  auto word = [](int i) { return "w" + std::to_string(i); };
  const int per_class = p.vocab_size / p.num_classes;  // disjoint signal sets

  Rng rng(mix_seed(p.seed, 0xDA7A));
  auto draw_text = [&](int cls) {
    const int signal_base = cls * per_class;
    const int len = 8 + static_cast<int>(bounded(rng, 13));  // 8..20
    std::ostringstream text;
    for (int t = 0; t < len; ++t) {
      int tok;
      if (p.noise_rate > 0.0 && uniform01(rng) < p.noise_rate) {
        tok = static_cast<int>(
            bounded(rng, static_cast<uint64_t>(p.vocab_size)));
      } else {
        tok = signal_base +
              static_cast<int>(bounded(rng, static_cast<uint64_t>(per_class)));
      }
      if (t) text << ' ';
      text << word(tok);
    }
    return text.str();
  };

  std::vector<Example> train, test;
  std::unordered_set<std::string> train_texts;
  const int n_test = p.examples_per_class / 5;  // stratified 80/20
  for (int cls = 0; cls < p.num_classes; ++cls) {
    for (int i = 0; i < p.examples_per_class - n_test; ++i) {
      std::string text = draw_text(cls);
      train_texts.insert(text);
      train.push_back({std::move(text), cls});
    }
  }
  for (int cls = 0; cls < p.num_classes; ++cls) {
    for (int i = 0; i < n_test; ++i) {
      // redraw on textual collision so the splits stay disjoint
      std::string text;
      int tries = 0;
      do {
        text = draw_text(cls);
        if (++tries > 1000) {
          throw ConfigError("synthetic: vocabulary too small to keep the "
                            "train/test splits disjoint");
        }
      } while (train_texts.count(text));
      test.push_back({std::move(text), cls});
    }
  }
  return make_split(std::move(train), std::move(test), name, p.seed);
}

}  // namespace distlab
