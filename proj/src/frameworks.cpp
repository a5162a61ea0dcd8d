#include "distlab/frameworks.hpp"

#include <cmath>

namespace distlab {

ScoreKind score_kind_from_name(const std::string& s) {
  if (s == "probabilities") return ScoreKind::Probabilities;
  if (s == "logits") return ScoreKind::Logits;
  throw ConfigError("unknown score_kind '" + s + "'");
}

std::string score_kind_name(ScoreKind k) {
  return k == ScoreKind::Probabilities ? "probabilities" : "logits";
}

void validate_config(const TrainConfig& config) {
  if (config.learning_rate <= 0.0) {
    throw ConfigError("learning_rate must be positive");
  }
  if (config.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (config.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (config.distill_weight < 0.0) {
    throw ConfigError("distill_weight must be >= 0");
  }
  if (config.max_len < 5) throw ConfigError("max_len must be >= 5");
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

AdamState::AdamState(const std::vector<NamedParam>& params) {
  m.reserve(params.size());
  v.reserve(params.size());
  for (const NamedParam& p : params) {
    m.emplace_back(p.tensor.numel(), 0.0);
    v.emplace_back(p.tensor.numel(), 0.0);
  }
}

void adam_step(std::vector<NamedParam>& params, AdamState& state, double lr) {
  if (params.size() != state.m.size()) {
    throw ContractError("adam_step: state built for " +
                        std::to_string(state.m.size()) + " params, got " +
                        std::to_string(params.size()));
  }
  for (const NamedParam& p : params) {
    if (!p.tensor.has_grad()) {
      throw ContractError("adam_step: missing gradient for '" + p.name + "'");
    }
  }
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step_count);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step_count);
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& t = params[i].tensor;
    const std::vector<double>& g = t.grad();
    std::vector<double>& m = state.m[i];
    std::vector<double>& v = state.v[i];
    for (size_t j = 0; j < g.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      t.data()[j] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// shared training plumbing
// ---------------------------------------------------------------------------

namespace {

Tensor make_scores(Tape* tape, const Tensor& logits, ScoreKind kind) {
  return kind == ScoreKind::Probabilities ? softmax(tape, logits) : logits;
}

void check_finite(double loss, const char* what, int epoch, size_t batch) {
  if (!std::isfinite(loss)) {
    throw DivergenceError(std::string(what) + ": non-finite loss " +
                          std::to_string(loss) + " at epoch " +
                          std::to_string(epoch + 1) + ", batch " +
                          std::to_string(batch + 1));
  }
}

std::vector<Batch> encode_test_batches(const DatasetSplit& data,
                                       const Vocab& vocab,
                                       const TrainConfig& config) {
  std::vector<Batch> batches;
  for (size_t start = 0; start < data.test.size();
       start += static_cast<size_t>(config.batch_size)) {
    const size_t end = std::min(data.test.size(),
                                start + static_cast<size_t>(config.batch_size));
    std::vector<Example> part(data.test.begin() + static_cast<long>(start),
                              data.test.begin() + static_cast<long>(end));
    batches.push_back(encode_batch(part, vocab, config.max_len));
  }
  return batches;
}

struct TestEval {
  double accuracy = 0.0;
  std::vector<double> scores;  // [num_examples, classes] row-major
  int classes = 0;
};

TestEval eval_on_batches(const Model& model, const std::vector<Batch>& batches,
                         ScoreKind kind) {
  TestEval ev;
  ev.classes = model.spec.num_classes;
  size_t total = 0, hits = 0;
  for (const Batch& batch : batches) {
    Tensor logits = model.forward(nullptr, batch);
    Tensor scores = kind == ScoreKind::Probabilities
                        ? softmax(nullptr, logits)
                        : logits;
    const int classes = logits.dim(1);
    for (int i = 0; i < batch.size; ++i) {
      const double* row = logits.data() + static_cast<size_t>(i) * classes;
      int best = 0;
      for (int c = 1; c < classes; ++c) {
        if (row[c] > row[best]) best = c;
      }
      hits += best == batch.labels[static_cast<size_t>(i)] ? 1 : 0;
      ++total;
    }
    ev.scores.insert(ev.scores.end(), scores.values().begin(),
                     scores.values().end());
  }
  ev.accuracy = static_cast<double>(hits) / static_cast<double>(total);
  return ev;
}

int argmax_row(const std::vector<double>& mat, size_t row, int classes) {
  const double* r = mat.data() + row * static_cast<size_t>(classes);
  int best = 0;
  for (int c = 1; c < classes; ++c) {
    if (r[c] > r[best]) best = c;
  }
  return best;
}

ModelSpec with_vocab(const ModelSpec& spec, const Vocab& vocab,
                     int num_classes) {
  ModelSpec s = spec;
  s.vocab_size = vocab.size();
  s.num_classes = num_classes;
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// conventional
// ---------------------------------------------------------------------------

TrainResult train_conventional(const ModelSpec& spec, const DatasetSplit& data,
                               const TrainConfig& config, uint64_t init_seed) {
  validate_config(config);
  const Vocab vocab = build_vocab(data.train, config.vocab_cap);
  Model model = build_model(with_vocab(spec, vocab, data.num_classes),
                            init_seed);
  AdamState adam(model.params);
  const std::vector<Batch> test_batches =
      encode_test_batches(data, vocab, config);

  TrainResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = batch_iter(data.train, vocab, config.max_len,
                                    config.batch_size, config.seed, epoch);
    double loss_sum = 0.0;
    for (size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch& batch = batches[bi];
      Tape tape;
      Tensor probs = softmax(&tape, model.forward(&tape, batch));
      Tensor loss = cross_entropy(&tape, probs, batch.labels);
      check_finite(loss.item(), "conventional", epoch, bi);
      loss_sum += loss.item();
      model.zero_grads();
      tape.backward(loss);
      adam_step(model.params, adam, config.learning_rate);
    }
    EpochMetrics metrics;
    metrics.train_loss = loss_sum / static_cast<double>(batches.size());
    metrics.test_accuracy =
        eval_on_batches(model, test_batches, config.score_kind).accuracy;
    result.history.push_back(metrics);
  }
  result.model = std::move(model);
  return result;
}

TrainResult train_conventional(const ModelSpec& spec, const DatasetSplit& data,
                               const TrainConfig& config) {
  return train_conventional(spec, data, config, config.seed);
}

TrainResult pretrain_teacher(const ModelSpec& spec, const DatasetSplit& data,
                             const TrainConfig& config,
                             const std::string& checkpoint_path) {
  if (spec.role != Role::Teacher) {
    throw SpecError("pretrain_teacher wants a Teacher spec, got " +
                    role_name(spec.role));
  }
  TrainResult result = train_conventional(spec, data, config);
  result.model.freeze();
  save_model(result.model, checkpoint_path);
  return result;
}

// ---------------------------------------------------------------------------
// passive distillation
// ---------------------------------------------------------------------------

PassiveResult train_passive(const std::string& teacher_checkpoint,
                            const ModelSpec& student_spec,
                            const DatasetSplit& data,
                            const TrainConfig& config) {
  validate_config(config);
  if (student_spec.role != Role::Student) {
    throw SpecError("train_passive wants a Student spec, got " +
                    role_name(student_spec.role));
  }
  Model teacher = load_model(teacher_checkpoint);
  teacher.freeze();
  if (teacher.spec.num_classes != data.num_classes) {
    throw ConfigError("teacher has " +
                      std::to_string(teacher.spec.num_classes) +
                      " classes, dataset has " +
                      std::to_string(data.num_classes));
  }

  const Vocab vocab = build_vocab(data.train, config.vocab_cap);
  if (teacher.spec.vocab_size != vocab.size()) {
    throw ConfigError("teacher trained with vocab of " +
                      std::to_string(teacher.spec.vocab_size) +
                      ", dataset yields " + std::to_string(vocab.size()));
  }
  Model student = build_model(with_vocab(student_spec, vocab, data.num_classes),
                              config.seed);
  AdamState adam(student.params);
  const std::vector<Batch> test_batches =
      encode_test_batches(data, vocab, config);
  // the teacher is frozen, so its test scores never change
  const TestEval teacher_eval =
      eval_on_batches(teacher, test_batches, config.score_kind);

  PassiveResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = batch_iter(data.train, vocab, config.max_len,
                                    config.batch_size, config.seed, epoch);
    double loss_sum = 0.0;
    for (size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch& batch = batches[bi];
      // knowledge source: forward-only, takes no gradient
      Tensor teacher_scores = make_scores(
          nullptr, teacher.forward(nullptr, batch), config.score_kind);

      Tape tape;
      Tensor student_scores = make_scores(
          &tape, student.forward(&tape, batch), config.score_kind);
      Tensor loss = mse(&tape, student_scores, teacher_scores);
      check_finite(loss.item(), "passive", epoch, bi);
      loss_sum += loss.item();
      student.zero_grads();
      tape.backward(loss);
      adam_step(student.params, adam, config.learning_rate);
    }
    const TestEval ev = eval_on_batches(student, test_batches, config.score_kind);
    size_t agree = 0;
    const size_t n = data.test.size();
    for (size_t i = 0; i < n; ++i) {
      agree += argmax_row(ev.scores, i, ev.classes) ==
                       argmax_row(teacher_eval.scores, i, ev.classes)
                   ? 1
                   : 0;
    }
    EpochMetrics metrics;
    metrics.train_loss = loss_sum / static_cast<double>(batches.size());
    metrics.test_accuracy = ev.accuracy;
    result.student.history.push_back(metrics);
    result.agreement.push_back(static_cast<double>(agree) /
                               static_cast<double>(n));
  }
  result.student.model = std::move(student);
  return result;
}

// ---------------------------------------------------------------------------
// active mutual distillation
// ---------------------------------------------------------------------------

ActiveResult train_active(const ModelSpec& spec_a, const ModelSpec& spec_b,
                          const DatasetSplit& data, const TrainConfig& config,
                          uint64_t seed_a, uint64_t seed_b) {
  validate_config(config);
  if (spec_a.role != Role::Student || spec_b.role != Role::Student) {
    throw SpecError("train_active wants two Student specs");
  }
  const Vocab vocab = build_vocab(data.train, config.vocab_cap);
  Model a = build_model(with_vocab(spec_a, vocab, data.num_classes), seed_a);
  Model b = build_model(with_vocab(spec_b, vocab, data.num_classes), seed_b);
  AdamState adam_a(a.params), adam_b(b.params);
  const std::vector<Batch> test_batches =
      encode_test_batches(data, vocab, config);
  const double lambda = config.distill_weight;

  ActiveResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = batch_iter(data.train, vocab, config.max_len,
                                    config.batch_size, config.seed, epoch);
    double loss_sum_a = 0.0, loss_sum_b = 0.0;
    for (size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch& batch = batches[bi];
      Tape tape_a, tape_b;
      Tensor logits_a = a.forward(&tape_a, batch);
      Tensor logits_b = b.forward(&tape_b, batch);
      Tensor probs_a = softmax(&tape_a, logits_a);
      Tensor probs_b = softmax(&tape_b, logits_b);
      Tensor loss_a = cross_entropy(&tape_a, probs_a, batch.labels);
      Tensor loss_b = cross_entropy(&tape_b, probs_b, batch.labels);
      if (lambda > 0.0) {
        // snapshot both peers before either model steps
        Tensor score_a =
            config.score_kind == ScoreKind::Probabilities ? probs_a : logits_a;
        Tensor score_b =
            config.score_kind == ScoreKind::Probabilities ? probs_b : logits_b;
        Tensor peer_for_a = score_b.detach();
        Tensor peer_for_b = score_a.detach();
        loss_a = add(&tape_a, loss_a,
                     scale(&tape_a, mse(&tape_a, score_a, peer_for_a), lambda));
        loss_b = add(&tape_b, loss_b,
                     scale(&tape_b, mse(&tape_b, score_b, peer_for_b), lambda));
      }
      check_finite(loss_a.item(), "active (student a)", epoch, bi);
      check_finite(loss_b.item(), "active (student b)", epoch, bi);
      loss_sum_a += loss_a.item();
      loss_sum_b += loss_b.item();
      a.zero_grads();
      tape_a.backward(loss_a);
      adam_step(a.params, adam_a, config.learning_rate);
      b.zero_grads();
      tape_b.backward(loss_b);
      adam_step(b.params, adam_b, config.learning_rate);
    }
    const TestEval ev_a = eval_on_batches(a, test_batches, config.score_kind);
    const TestEval ev_b = eval_on_batches(b, test_batches, config.score_kind);
    double sq = 0.0;
    for (size_t i = 0; i < ev_a.scores.size(); ++i) {
      const double d = ev_a.scores[i] - ev_b.scores[i];
      sq += d * d;
    }
    result.pair_score_mse.push_back(sq /
                                    static_cast<double>(ev_a.scores.size()));
    EpochMetrics ma, mb;
    ma.train_loss = loss_sum_a / static_cast<double>(batches.size());
    ma.test_accuracy = ev_a.accuracy;
    mb.train_loss = loss_sum_b / static_cast<double>(batches.size());
    mb.test_accuracy = ev_b.accuracy;
    result.student_a.history.push_back(ma);
    result.student_b.history.push_back(mb);
  }
  result.student_a.model = std::move(a);
  result.student_b.model = std::move(b);
  return result;
}

ActiveResult train_active(const ModelSpec& spec_a, const ModelSpec& spec_b,
                          const DatasetSplit& data, const TrainConfig& config) {
  return train_active(spec_a, spec_b, data, config, config.seed,
                      config.seed + 1);
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

std::vector<int> predict(const Model& model,
                         const std::vector<Example>& examples,
                         const Vocab& vocab, int max_len, int batch_size) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  std::vector<int> out;
  out.reserve(examples.size());
  for (size_t start = 0; start < examples.size();
       start += static_cast<size_t>(batch_size)) {
    const size_t end =
        std::min(examples.size(), start + static_cast<size_t>(batch_size));
    std::vector<Example> part(examples.begin() + static_cast<long>(start),
                              examples.begin() + static_cast<long>(end));
    const Batch batch = encode_batch(part, vocab, max_len);
    Tensor logits = model.forward(nullptr, batch);
    const int classes = logits.dim(1);
    for (int i = 0; i < batch.size; ++i) {
      const double* row = logits.data() + static_cast<size_t>(i) * classes;
      int best = 0;
      for (int c = 1; c < classes; ++c) {
        if (row[c] > row[best]) best = c;
      }
      out.push_back(best);
    }
  }
  return out;
}

double evaluate(const Model& model, const DatasetSplit& split,
                const TrainConfig& config) {
  if (split.test.empty()) {
    throw ConfigError("evaluate: empty test split in " + split.name);
  }
  const Vocab vocab = build_vocab(split.train, config.vocab_cap);
  const std::vector<int> preds =
      predict(model, split.test, vocab, config.max_len, config.batch_size);
  size_t hits = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    hits += preds[i] == split.test[i].label ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

}  // namespace distlab
