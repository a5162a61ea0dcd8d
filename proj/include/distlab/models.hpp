#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "distlab/data.hpp"
#include "distlab/tensor.hpp"

namespace distlab {

enum class Family { TextCnn, Lstm };
enum class Role { Teacher, Student };

std::string family_name(Family f);
std::string role_name(Role r);
Family family_from_name(const std::string& s);  // "textcnn" | "lstm"

/// Architecture description. The per-family layer sizes are fixed by role:
///   TextCNN teacher: conv 32 then 16 channels, kernel widths 2,3,4,5
///   TextCNN student: conv 32 channels, kernel widths 2,3
///   LSTM teacher:    bidirectional, 300 hidden per direction
///   LSTM student:    forward only, 150 hidden
struct ModelSpec {
  Family family = Family::TextCnn;
  Role role = Role::Student;
  int vocab_size = 0;
  int embedding_dim = 64;
  int num_classes = 0;

  std::vector<int> kernel_widths() const;  // TextCNN
  std::vector<int> conv_channels() const;  // TextCNN, one entry per layer
  int hidden_size() const;                 // LSTM
  bool bidirectional() const;              // LSTM

  /// Width of the classifier head input.
  int head_input() const;
};

void validate_spec(const ModelSpec& spec);  // throws SpecError

struct NamedParam {
  std::string name;
  Tensor tensor;
};

struct Model {
  ModelSpec spec;
  std::vector<NamedParam> params;  // fixed declaration order

  const Tensor& param(const std::string& name) const;
  long long parameter_count() const;
  void zero_grads();
  /// Clears requires_grad on every parameter (frozen knowledge source).
  void freeze();
  bool frozen() const;

  /// tokens [batch, seq] -> logits [batch, num_classes]; dispatches on
  /// spec.family. Pass tape = nullptr for forward-only evaluation.
  Tensor forward(Tape* tape, const Batch& batch) const;
};

/// Parameters drawn from a generator seeded with rng_seed, in declaration
/// order: weights uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)),
/// biases zero, embeddings uniform(-0.1, 0.1).
Model build_model(const ModelSpec& spec, uint64_t rng_seed);

Tensor forward_textcnn(const Model& model, Tape* tape, const Batch& batch);
Tensor forward_lstm(const Model& model, Tape* tape, const Batch& batch);

/// Versioned binary checkpoint; save/load round-trips bit-exactly.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

}  // namespace distlab
