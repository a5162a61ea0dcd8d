#include "distlab/models.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "distlab/rng.hpp"

namespace distlab {

std::string family_name(Family f) {
  return f == Family::TextCnn ? "textcnn" : "lstm";
}

std::string role_name(Role r) {
  return r == Role::Teacher ? "teacher" : "student";
}

Family family_from_name(const std::string& s) {
  if (s == "textcnn" || s == "cnn") return Family::TextCnn;
  if (s == "lstm") return Family::Lstm;
  throw ConfigError("unknown classifier family '" + s + "'");
}

std::vector<int> ModelSpec::kernel_widths() const {
  return role == Role::Teacher ? std::vector<int>{2, 3, 4, 5}
                               : std::vector<int>{2, 3};
}

std::vector<int> ModelSpec::conv_channels() const {
  return role == Role::Teacher ? std::vector<int>{32, 16}
                               : std::vector<int>{32};
}

int ModelSpec::hidden_size() const { return role == Role::Teacher ? 300 : 150; }

bool ModelSpec::bidirectional() const { return role == Role::Teacher; }

int ModelSpec::head_input() const {
  if (family == Family::TextCnn) {
    return conv_channels().back() * static_cast<int>(kernel_widths().size());
  }
  return hidden_size() * (bidirectional() ? 2 : 1);
}

void validate_spec(const ModelSpec& spec) {
  if (spec.vocab_size < 2) {
    throw SpecError("vocab_size must be >= 2 (PAD and UNK), got " +
                    std::to_string(spec.vocab_size));
  }
  if (spec.embedding_dim < 1) {
    throw SpecError("embedding_dim must be positive");
  }
  if (spec.num_classes < 2) {
    throw SpecError("num_classes must be >= 2, got " +
                    std::to_string(spec.num_classes));
  }
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

const Tensor& Model::param(const std::string& name) const {
  for (const NamedParam& p : params) {
    if (p.name == name) return p.tensor;
  }
  throw ContractError("no parameter named '" + name + "'");
}

long long Model::parameter_count() const {
  long long n = 0;
  for (const NamedParam& p : params) {
    n += static_cast<long long>(p.tensor.numel());
  }
  return n;
}

void Model::zero_grads() {
  for (NamedParam& p : params) p.tensor.clear_grad();
}

void Model::freeze() {
  for (NamedParam& p : params) {
    p.tensor.clear_grad();
    p.tensor.set_requires_grad(false);
  }
}

bool Model::frozen() const {
  for (const NamedParam& p : params) {
    if (p.tensor.requires_grad()) return false;
  }
  return true;
}

Tensor Model::forward(Tape* tape, const Batch& batch) const {
  return spec.family == Family::TextCnn ? forward_textcnn(*this, tape, batch)
                                        : forward_lstm(*this, tape, batch);
}

// ---------------------------------------------------------------------------
// construction
// ---------------------------------------------------------------------------

namespace {

Tensor init_uniform(Rng& rng, Shape shape, double a) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (size_t i = 0; i < t.numel(); ++i) t.data()[i] = uniform(rng, -a, a);
  return t;
}

// glorot range for a weight with the given fan pair
Tensor init_weight(Rng& rng, Shape shape, int fan_in, int fan_out) {
  return init_uniform(rng, std::move(shape),
                      std::sqrt(6.0 / (fan_in + fan_out)));
}

void add_lstm_cell_params(Model& m, Rng& rng, const std::string& prefix,
                          int in, int hidden) {
  for (const char* gate : {"i", "f", "g", "o"}) {
    m.params.push_back({prefix + ".w_x" + gate,
                        init_weight(rng, {in, hidden}, in, hidden)});
    m.params.push_back({prefix + ".w_h" + gate,
                        init_weight(rng, {hidden, hidden}, hidden, hidden)});
    m.params.push_back({prefix + ".b_" + gate, Tensor::zeros({hidden}, true)});
  }
}

LstmParams cell_params(const Model& m, const std::string& prefix) {
  LstmParams p;
  p.w_xi = m.param(prefix + ".w_xi");
  p.w_hi = m.param(prefix + ".w_hi");
  p.b_i = m.param(prefix + ".b_i");
  p.w_xf = m.param(prefix + ".w_xf");
  p.w_hf = m.param(prefix + ".w_hf");
  p.b_f = m.param(prefix + ".b_f");
  p.w_xg = m.param(prefix + ".w_xg");
  p.w_hg = m.param(prefix + ".w_hg");
  p.b_g = m.param(prefix + ".b_g");
  p.w_xo = m.param(prefix + ".w_xo");
  p.w_ho = m.param(prefix + ".w_ho");
  p.b_o = m.param(prefix + ".b_o");
  return p;
}

}  // namespace

Model build_model(const ModelSpec& spec, uint64_t rng_seed) {
  validate_spec(spec);
  Rng rng(mix_seed(rng_seed, 0x0DE1));
  Model m;
  m.spec = spec;
  m.params.push_back(
      {"embedding",
       init_uniform(rng, {spec.vocab_size, spec.embedding_dim}, 0.1)});

  if (spec.family == Family::TextCnn) {
    const auto widths = spec.kernel_widths();
    const auto channels = spec.conv_channels();
    for (int w : widths) {
      const std::string ws = std::to_string(w);
      m.params.push_back(
          {"conv1.w" + ws + ".kernel",
           init_weight(rng, {channels[0], w, spec.embedding_dim},
                       w * spec.embedding_dim, w * channels[0])});
      m.params.push_back(
          {"conv1.w" + ws + ".bias", Tensor::zeros({channels[0]}, true)});
      if (channels.size() > 1) {
        m.params.push_back(
            {"conv2.w" + ws + ".kernel",
             init_weight(rng, {channels[1], w, channels[0]}, w * channels[0],
                         w * channels[1])});
        m.params.push_back(
            {"conv2.w" + ws + ".bias", Tensor::zeros({channels[1]}, true)});
      }
    }
  } else {
    add_lstm_cell_params(m, rng, "lstm.fwd", spec.embedding_dim,
                         spec.hidden_size());
    if (spec.bidirectional()) {
      add_lstm_cell_params(m, rng, "lstm.bwd", spec.embedding_dim,
                           spec.hidden_size());
    }
  }

  const int feat = spec.head_input();
  m.params.push_back({"head.weight", init_weight(rng, {feat, spec.num_classes},
                                                 feat, spec.num_classes)});
  m.params.push_back({"head.bias", Tensor::zeros({spec.num_classes}, true)});
  return m;
}

// ---------------------------------------------------------------------------
// forward passes
// ---------------------------------------------------------------------------

Tensor forward_textcnn(const Model& model, Tape* tape, const Batch& batch) {
  const ModelSpec& spec = model.spec;
  Tensor x = embedding(tape, model.param("embedding"), batch.token_ids,
                       batch.size, batch.seq_len);
  std::vector<Tensor> pooled;
  const bool two_layers = spec.conv_channels().size() > 1;
  for (int w : spec.kernel_widths()) {
    const std::string ws = std::to_string(w);
    Tensor h = relu(tape, conv1d(tape, x, model.param("conv1.w" + ws + ".kernel"),
                                 model.param("conv1.w" + ws + ".bias")));
    if (two_layers) {
      h = relu(tape, conv1d(tape, h, model.param("conv2.w" + ws + ".kernel"),
                            model.param("conv2.w" + ws + ".bias")));
    }
    pooled.push_back(max_over_time(tape, h));
  }
  Tensor feat = concat_last(tape, pooled);
  return add_bias(tape, matmul(tape, feat, model.param("head.weight")),
                  model.param("head.bias"));
}

Tensor forward_lstm(const Model& model, Tape* tape, const Batch& batch) {
  const ModelSpec& spec = model.spec;
  const int hidden = spec.hidden_size();
  Tensor x = embedding(tape, model.param("embedding"), batch.token_ids,
                       batch.size, batch.seq_len);

  auto run_direction = [&](const std::string& prefix, bool reverse) {
    const LstmParams p = cell_params(model, prefix);
    Tensor h = Tensor::zeros({batch.size, hidden});
    Tensor c = Tensor::zeros({batch.size, hidden});
    for (int step = 0; step < batch.seq_len; ++step) {
      const int t = reverse ? batch.seq_len - 1 - step : step;
      auto [h_next, c_next] = lstm_cell(tape, select_time(tape, x, t), h, c, p);
      h = h_next;
      c = c_next;
    }
    return h;
  };

  Tensor feat = run_direction("lstm.fwd", false);
  if (spec.bidirectional()) {
    feat = concat_last(tape, {feat, run_direction("lstm.bwd", true)});
  }
  return add_bias(tape, matmul(tape, feat, model.param("head.weight")),
                  model.param("head.bias"));
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'D', 'L', 'C', 'K', 'P', 'T', '0', '1'};

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw ParseError("checkpoint truncated");
  return v;
}

}  // namespace

void save_model(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod<uint8_t>(out, model.spec.family == Family::TextCnn ? 0 : 1);
  write_pod<uint8_t>(out, model.spec.role == Role::Teacher ? 0 : 1);
  write_pod<int32_t>(out, model.spec.vocab_size);
  write_pod<int32_t>(out, model.spec.embedding_dim);
  write_pod<int32_t>(out, model.spec.num_classes);
  write_pod<uint32_t>(out, static_cast<uint32_t>(model.params.size()));
  for (const NamedParam& p : model.params) {
    write_pod<uint32_t>(out, static_cast<uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_pod<uint32_t>(out, static_cast<uint32_t>(p.tensor.ndim()));
    for (int d : p.tensor.shape()) write_pod<int32_t>(out, d);
    out.write(reinterpret_cast<const char*>(p.tensor.data()),
              static_cast<std::streamsize>(p.tensor.numel() * sizeof(double)));
  }
  if (!out) throw ConfigError("short write on checkpoint " + path);
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read checkpoint " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ParseError(path + ": not a distlab checkpoint");
  }
  Model m;
  m.spec.family = read_pod<uint8_t>(in) == 0 ? Family::TextCnn : Family::Lstm;
  m.spec.role = read_pod<uint8_t>(in) == 0 ? Role::Teacher : Role::Student;
  m.spec.vocab_size = read_pod<int32_t>(in);
  m.spec.embedding_dim = read_pod<int32_t>(in);
  m.spec.num_classes = read_pod<int32_t>(in);
  const uint32_t count = read_pod<uint32_t>(in);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = read_pod<uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const uint32_t ndim = read_pod<uint32_t>(in);
    Shape shape;
    for (uint32_t d = 0; d < ndim; ++d) shape.push_back(read_pod<int32_t>(in));
    std::vector<double> data(shape_numel(shape));
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw ParseError(path + ": checkpoint truncated");
    m.params.push_back(
        {std::move(name),
         Tensor::from_data(std::move(shape), std::move(data), true)});
  }
  return m;
}

}  // namespace distlab
