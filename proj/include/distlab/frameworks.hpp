#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "distlab/data.hpp"
#include "distlab/models.hpp"
#include "distlab/tensor.hpp"

namespace distlab {

/// The three training topologies:
///   Conventional: data -> model, cross-entropy on true labels
///   Passive:      frozen pretrained teacher -> student, MSE between the two
///                 models' prediction scores only (no label loss)
///   Active:       two students, each trained on labels plus a weighted MSE
///                 to the other's detached scores, stepped simultaneously
enum class FrameworkKind { Conventional, Passive, Active };

/// What "prediction scores" means for distillation targets.
enum class ScoreKind { Probabilities, Logits };

ScoreKind score_kind_from_name(const std::string& s);
std::string score_kind_name(ScoreKind k);

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 10;
  double distill_weight = 1.0;  // lambda on the active framework's MSE term
  ScoreKind score_kind = ScoreKind::Probabilities;
  uint64_t seed = 1;
  int max_len = 64;
  int vocab_cap = 20000;
};

void validate_config(const TrainConfig& config);  // throws ConfigError

/// Adam moment estimates, one (m, v) pair per parameter in order.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long step_count = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  explicit AdamState(const std::vector<NamedParam>& params);
};

/// One bias-corrected Adam update from the gradients currently stored on the
/// parameters. A parameter without a populated gradient is a contract
/// violation.
void adam_step(std::vector<NamedParam>& params, AdamState& state, double lr);

struct EpochMetrics {
  double train_loss = 0.0;     // mean batch loss over the epoch
  double test_accuracy = 0.0;  // after the epoch
};

struct TrainResult {
  Model model;
  std::vector<EpochMetrics> history;
};

struct PassiveResult {
  TrainResult student;
  std::vector<double> agreement;  // per epoch: student/teacher argmax match
};

struct ActiveResult {
  TrainResult student_a;
  TrainResult student_b;
  std::vector<double> pair_score_mse;  // per epoch, over test-split scores
};

/// Minimizes cross_entropy(softmax(logits), labels). Model parameters are
/// initialized from init_seed; batch shuffling is keyed by config.seed.
/// Any non-finite loss aborts with DivergenceError.
TrainResult train_conventional(const ModelSpec& spec, const DatasetSplit& data,
                               const TrainConfig& config, uint64_t init_seed);
TrainResult train_conventional(const ModelSpec& spec, const DatasetSplit& data,
                               const TrainConfig& config);

/// Conventional training of a Teacher spec, then freeze and checkpoint.
TrainResult pretrain_teacher(const ModelSpec& spec, const DatasetSplit& data,
                             const TrainConfig& config,
                             const std::string& checkpoint_path);

/// Per batch the student minimizes mse(student_scores, teacher_scores); the
/// teacher runs forward-only and true labels never enter the loss.
PassiveResult train_passive(const std::string& teacher_checkpoint,
                            const ModelSpec& student_spec,
                            const DatasetSplit& data,
                            const TrainConfig& config);

/// Per batch, both students' scores are snapshot first, then each minimizes
/// cross_entropy(own, labels) + lambda * mse(own_scores, peer_snapshot) and
/// both are stepped. With lambda = 0 this reduces exactly to two independent
/// conventional runs.
ActiveResult train_active(const ModelSpec& spec_a, const ModelSpec& spec_b,
                          const DatasetSplit& data, const TrainConfig& config,
                          uint64_t seed_a, uint64_t seed_b);
ActiveResult train_active(const ModelSpec& spec_a, const ModelSpec& spec_b,
                          const DatasetSplit& data, const TrainConfig& config);

/// Argmax predictions over examples, in order.
std::vector<int> predict(const Model& model, const std::vector<Example>& examples,
                         const Vocab& vocab, int max_len, int batch_size);

/// Fraction of split.test whose argmax logit equals the label. The
/// vocabulary is rebuilt from split.train exactly as training builds it.
double evaluate(const Model& model, const DatasetSplit& split,
                const TrainConfig& config);

}  // namespace distlab
