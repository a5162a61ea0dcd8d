#include "distlab/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace distlab {

const std::vector<std::string> kFrameworkNames = {
    "conventional_teacher", "conventional_student", "passive", "active"};

std::string framework_label(const std::string& framework) {
  if (framework == "conventional_teacher") return "x->M_T";
  if (framework == "conventional_student") return "x->M_S";
  if (framework == "passive") return "Passive";
  if (framework == "active") return "Active";
  return framework;
}

std::string classifier_label(Family family) {
  return family == Family::TextCnn ? "CNN" : "LSTM";
}

// ---------------------------------------------------------------------------
// config parsing
// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

struct Cursor {
  std::string origin;
  int line = 0;
  std::string where() const {
    return origin + ":" + std::to_string(line);
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(where() + ": " + msg);
  }
};

long long parse_int(const Cursor& at, const std::string& v) {
  try {
    size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    at.fail("'" + v + "' is not an integer");
  }
}

double parse_double(const Cursor& at, const std::string& v) {
  try {
    size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    at.fail("'" + v + "' is not a number");
  }
}

bool parse_bool(const Cursor& at, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  at.fail("'" + v + "' is not a boolean");
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& origin) {
  ExperimentConfig config;
  enum class Section { None, Experiment, Train, Data };
  Section section = Section::None;
  Cursor at{origin, 0};

  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    ++at.line;
    const size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') at.fail("unterminated section header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (name == "experiment") {
        section = Section::Experiment;
      } else if (name == "train") {
        section = Section::Train;
      } else if (name == "data") {
        section = Section::Data;
        config.datasets.emplace_back();
      } else {
        at.fail("unknown section [" + name + "]");
      }
      continue;
    }

    const size_t eq = line.find('=');
    if (eq == std::string::npos) at.fail("expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) at.fail("empty key");
    if (value.empty()) at.fail("empty value for '" + key + "'");

    switch (section) {
      case Section::None:
        at.fail("'" + key + "' appears before any section header");
      case Section::Experiment:
        if (key == "name") {
          config.name = value;
        } else if (key == "classifiers") {
          config.classifiers.clear();
          for (const auto& c : split_ws(value)) {
            config.classifiers.push_back(family_from_name(c));
          }
        } else if (key == "frameworks") {
          config.frameworks = split_ws(value);
        } else if (key == "seeds") {
          config.seeds.clear();
          for (const auto& s : split_ws(value)) {
            const long long v = parse_int(at, s);
            if (v < 0) at.fail("seeds must be non-negative");
            config.seeds.push_back(static_cast<uint64_t>(v));
          }
        } else if (key == "output") {
          config.output_dir = value;
        } else if (key == "workers") {
          config.workers = static_cast<int>(parse_int(at, value));
        } else {
          at.fail("unknown key '" + key + "' in [experiment]");
        }
        break;
      case Section::Train:
        if (key == "learning_rate") {
          config.train.learning_rate = parse_double(at, value);
        } else if (key == "batch_size") {
          config.train.batch_size = static_cast<int>(parse_int(at, value));
        } else if (key == "epochs") {
          config.train.epochs = static_cast<int>(parse_int(at, value));
        } else if (key == "distill_weight") {
          config.train.distill_weight = parse_double(at, value);
        } else if (key == "score_kind") {
          config.train.score_kind = score_kind_from_name(value);
        } else {
          at.fail("unknown key '" + key + "' in [train]");
        }
        break;
      case Section::Data: {
        DataConfig& d = config.datasets.back();
        if (key == "name") {
          d.name = value;
        } else if (key == "synthetic") {
          d.synthetic = parse_bool(at, value);
        } else if (key == "train") {
          d.train_path = value;
        } else if (key == "test") {
          d.test_path = value;
        } else if (key == "classes") {
          d.synth.num_classes = static_cast<int>(parse_int(at, value));
        } else if (key == "vocab_size") {
          d.synth.vocab_size = static_cast<int>(parse_int(at, value));
        } else if (key == "examples_per_class") {
          d.synth.examples_per_class = static_cast<int>(parse_int(at, value));
        } else if (key == "noise_rate") {
          d.synth.noise_rate = parse_double(at, value);
        } else if (key == "seed") {
          d.synth.seed = static_cast<uint64_t>(parse_int(at, value));
        } else if (key == "max_len") {
          d.max_len = static_cast<int>(parse_int(at, value));
        } else if (key == "vocab_cap") {
          d.vocab_cap = static_cast<int>(parse_int(at, value));
        } else {
          at.fail("unknown key '" + key + "' in [data]");
        }
        break;
      }
    }
  }
  return config;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

void validate_experiment(const ExperimentConfig& config) {
  if (config.classifiers.empty()) throw ConfigError("no classifiers listed");
  if (config.frameworks.empty()) throw ConfigError("no frameworks listed");
  if (config.seeds.empty()) throw ConfigError("need at least one seed");
  if (config.datasets.empty()) throw ConfigError("need at least one [data] section");
  if (config.workers < 1) throw ConfigError("workers must be >= 1");
  for (const std::string& f : config.frameworks) {
    if (std::find(kFrameworkNames.begin(), kFrameworkNames.end(), f) ==
        kFrameworkNames.end()) {
      throw ConfigError("unknown framework '" + f + "'");
    }
  }
  {
    std::set<uint64_t> uniq(config.seeds.begin(), config.seeds.end());
    if (uniq.size() != config.seeds.size()) {
      throw ConfigError("duplicate seeds");
    }
  }
  std::set<std::string> names;
  for (const DataConfig& d : config.datasets) {
    if (d.name.empty()) throw ConfigError("dataset without a name");
    if (!names.insert(d.name).second) {
      throw ConfigError("duplicate dataset name '" + d.name + "'");
    }
    if (d.max_len < 5) {
      throw ConfigError(d.name + ": max_len must be >= 5");
    }
    if (d.synthetic) {
      if (!d.train_path.empty() || !d.test_path.empty()) {
        throw ConfigError(d.name + ": synthetic dataset with train/test paths");
      }
    } else {
      if (d.train_path.empty() || d.test_path.empty()) {
        throw ConfigError(d.name + ": needs train and test paths");
      }
      for (const std::string& p : {d.train_path, d.test_path}) {
        if (!fs::exists(p)) {
          throw ConfigError(d.name + ": no such file " + p);
        }
      }
    }
  }
  validate_config(config.train);
}

// ---------------------------------------------------------------------------
// results
// ---------------------------------------------------------------------------

double RunResult::mean() const {
  double s = 0.0;
  for (double a : accuracies) s += a;
  return s / static_cast<double>(accuracies.size());
}

double RunResult::stddev() const {
  const size_t n = accuracies.size();
  if (n < 2) return std::nan("");
  const double m = mean();
  double sq = 0.0;
  for (double a : accuracies) sq += (a - m) * (a - m);
  return std::sqrt(sq / static_cast<double>(n - 1));
}

// ---------------------------------------------------------------------------
// grid execution
// ---------------------------------------------------------------------------

namespace {

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CellRecord {
  size_t dataset_idx = 0, classifier_idx = 0, framework_idx = 0, seed_idx = 0;
  double accuracy = 0.0;
  std::vector<double> epoch_losses;
};

void write_cell_csv(const std::string& dir, const std::string& classifier,
                    const std::string& framework, const std::string& dataset,
                    uint64_t seed, const CellRecord& cell) {
  const std::string path = dir + "/" + classifier + "_" + framework + "_" +
                           dataset + "_" + std::to_string(seed) + ".csv";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << "classifier,framework,dataset,seed,accuracy";
  for (size_t e = 0; e < cell.epoch_losses.size(); ++e) {
    out << ",loss_epoch_" << e + 1;
  }
  out << "\n"
      << classifier << "," << framework << "," << dataset << "," << seed << ","
      << g17(cell.accuracy);
  for (double l : cell.epoch_losses) out << "," << g17(l);
  out << "\n";
}

std::vector<double> losses_of(const std::vector<EpochMetrics>& history) {
  std::vector<double> out;
  out.reserve(history.size());
  for (const EpochMetrics& m : history) out.push_back(m.train_loss);
  return out;
}

DatasetSplit realize_dataset(const DataConfig& d) {
  if (d.synthetic) return make_synthetic(d.synth, d.name);
  return make_split(load_tsv(d.train_path), load_tsv(d.test_path), d.name,
                    d.synth.seed);
}

}  // namespace

GridOutcome run_grid(const ExperimentConfig& config) {
  validate_experiment(config);
  const std::string cells_dir = config.output_dir + "/cells";
  const std::string teachers_dir = config.output_dir + "/teachers";
  fs::create_directories(cells_dir);
  fs::create_directories(teachers_dir);

  std::vector<DatasetSplit> splits;
  splits.reserve(config.datasets.size());
  for (const DataConfig& d : config.datasets) {
    splits.push_back(realize_dataset(d));
  }

  auto has_framework = [&](const std::string& name) {
    return std::find(config.frameworks.begin(), config.frameworks.end(),
                     name) != config.frameworks.end();
  };
  const bool needs_teacher =
      has_framework("conventional_teacher") || has_framework("passive");

  // one chain per (dataset, classifier, seed); chains are independent
  struct Chain {
    size_t d, c, s;
  };
  std::vector<Chain> chains;
  for (size_t d = 0; d < config.datasets.size(); ++d) {
    for (size_t c = 0; c < config.classifiers.size(); ++c) {
      for (size_t s = 0; s < config.seeds.size(); ++s) {
        chains.push_back({d, c, s});
      }
    }
  }

  std::mutex collect_mutex;
  std::vector<CellRecord> cells;
  std::vector<std::string> failures;

  auto framework_index = [&](const std::string& name) {
    return static_cast<size_t>(
        std::find(kFrameworkNames.begin(), kFrameworkNames.end(), name) -
        kFrameworkNames.begin());
  };

  auto run_chain = [&](const Chain& chain) {
    const DataConfig& dcfg = config.datasets[chain.d];
    const DatasetSplit& split = splits[chain.d];
    const Family family = config.classifiers[chain.c];
    const uint64_t seed = config.seeds[chain.s];

    TrainConfig train = config.train;
    train.seed = seed;
    train.max_len = dcfg.max_len;
    train.vocab_cap = dcfg.vocab_cap;

    const std::string classifier = family_name(family);
    auto cell_id = [&](const std::string& framework) {
      return classifier + "/" + framework + "/" + dcfg.name + "/seed " +
             std::to_string(seed);
    };
    auto submit = [&](const std::string& framework, double accuracy,
                      std::vector<double> losses) {
      CellRecord cell{chain.d, chain.c, framework_index(framework), chain.s,
                      accuracy, std::move(losses)};
      write_cell_csv(cells_dir, classifier, framework, dcfg.name, seed, cell);
      std::lock_guard<std::mutex> lock(collect_mutex);
      cells.push_back(std::move(cell));
    };
    auto report_failure = [&](const std::string& framework,
                              const std::string& what) {
      std::lock_guard<std::mutex> lock(collect_mutex);
      failures.push_back(cell_id(framework) + ": " + what);
    };

    ModelSpec teacher_spec{family, Role::Teacher, 0, 64, 0};
    ModelSpec student_spec{family, Role::Student, 0, 64, 0};

    std::string teacher_ckpt;
    bool teacher_ok = false;
    if (needs_teacher) {
      teacher_ckpt = teachers_dir + "/" + classifier + "_" + dcfg.name + "_" +
                     std::to_string(seed) + ".ckpt";
      try {
        // trained once per (dataset, classifier, seed); the
        // conventional-teacher cell and passive cells share it
        const TrainResult teacher =
            pretrain_teacher(teacher_spec, split, train, teacher_ckpt);
        teacher_ok = true;
        if (has_framework("conventional_teacher")) {
          submit("conventional_teacher", teacher.history.back().test_accuracy,
                 losses_of(teacher.history));
        }
      } catch (const std::exception& e) {
        if (has_framework("conventional_teacher")) {
          report_failure("conventional_teacher", e.what());
        }
      }
    }

    if (has_framework("conventional_student")) {
      try {
        const TrainResult r = train_conventional(student_spec, split, train);
        submit("conventional_student", r.history.back().test_accuracy,
               losses_of(r.history));
      } catch (const std::exception& e) {
        report_failure("conventional_student", e.what());
      }
    }

    if (has_framework("passive")) {
      if (!teacher_ok) {
        report_failure("passive", "teacher pretraining failed");
      } else {
        try {
          const PassiveResult r =
              train_passive(teacher_ckpt, student_spec, split, train);
          submit("passive", r.student.history.back().test_accuracy,
                 losses_of(r.student.history));
        } catch (const std::exception& e) {
          report_failure("passive", e.what());
        }
      }
    }

    if (has_framework("active")) {
      try {
        const ActiveResult r =
            train_active(student_spec, student_spec, split, train);
        const double accuracy =
            0.5 * (r.student_a.history.back().test_accuracy +
                   r.student_b.history.back().test_accuracy);
        const auto la = losses_of(r.student_a.history);
        const auto lb = losses_of(r.student_b.history);
        std::vector<double> losses(la.size());
        for (size_t i = 0; i < la.size(); ++i) losses[i] = 0.5 * (la[i] + lb[i]);
        submit("active", accuracy, std::move(losses));
      } catch (const std::exception& e) {
        report_failure("active", e.what());
      }
    }
  };

  const int workers =
      std::min<int>(config.workers, static_cast<int>(chains.size()));
  if (workers <= 1) {
    for (const Chain& chain : chains) run_chain(chain);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (size_t i = next.fetch_add(1); i < chains.size();
             i = next.fetch_add(1)) {
          run_chain(chains[i]);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }

  // deterministic result order regardless of scheduling
  std::sort(cells.begin(), cells.end(), [](const CellRecord& a,
                                           const CellRecord& b) {
    return std::tie(a.classifier_idx, a.framework_idx, a.dataset_idx,
                    a.seed_idx) < std::tie(b.classifier_idx, b.framework_idx,
                                           b.dataset_idx, b.seed_idx);
  });
  std::sort(failures.begin(), failures.end());

  GridOutcome outcome;
  outcome.failures = std::move(failures);
  for (const CellRecord& cell : cells) {
    const std::string classifier =
        family_name(config.classifiers[cell.classifier_idx]);
    const std::string& framework = kFrameworkNames[cell.framework_idx];
    const std::string& dataset = config.datasets[cell.dataset_idx].name;
    if (outcome.results.empty() ||
        outcome.results.back().classifier != classifier ||
        outcome.results.back().framework != framework ||
        outcome.results.back().dataset != dataset) {
      outcome.results.push_back({classifier, framework, dataset, {}, {}});
    }
    outcome.results.back().seeds.push_back(config.seeds[cell.seed_idx]);
    outcome.results.back().accuracies.push_back(cell.accuracy);
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// aggregation and rendering
// ---------------------------------------------------------------------------

ReportTable build_report(const std::vector<RunResult>& results) {
  if (results.empty()) throw AggregationError("no results to aggregate");
  const size_t seed_count = results.front().accuracies.size();
  for (const RunResult& r : results) {
    if (r.accuracies.empty()) {
      throw AggregationError(r.classifier + "/" + r.framework + "/" +
                             r.dataset + " has no accuracies");
    }
    if (r.accuracies.size() != seed_count) {
      throw AggregationError(
          "inconsistent seed counts: " + r.classifier + "/" + r.framework +
          "/" + r.dataset + " has " + std::to_string(r.accuracies.size()) +
          ", expected " + std::to_string(seed_count));
    }
  }

  ReportTable table;
  auto index_of = [](std::vector<std::string>& v, const std::string& s) {
    auto it = std::find(v.begin(), v.end(), s);
    if (it == v.end()) {
      v.push_back(s);
      return v.size() - 1;
    }
    return static_cast<size_t>(it - v.begin());
  };
  for (const RunResult& r : results) {
    index_of(table.classifiers, r.classifier);
    index_of(table.datasets, r.dataset);
  }
  for (const std::string& f : kFrameworkNames) {
    for (const RunResult& r : results) {
      if (r.framework == f) {
        table.frameworks.push_back(f);
        break;
      }
    }
  }

  table.cells.assign(
      table.classifiers.size(),
      std::vector<std::vector<ReportCell>>(
          table.frameworks.size(),
          std::vector<ReportCell>(table.datasets.size())));
  auto find_idx = [](const std::vector<std::string>& v, const std::string& s) {
    return static_cast<size_t>(std::find(v.begin(), v.end(), s) - v.begin());
  };
  for (const RunResult& r : results) {
    const size_t c = find_idx(table.classifiers, r.classifier);
    const size_t f = find_idx(table.frameworks, r.framework);
    const size_t d = find_idx(table.datasets, r.dataset);
    ReportCell& cell = table.cells[c][f][d];
    if (cell.present) {
      throw AggregationError("duplicate result group " + r.classifier + "/" +
                             r.framework + "/" + r.dataset);
    }
    cell.present = true;
    cell.result = &r;
  }

  // best framework per (classifier, dataset) column
  for (size_t c = 0; c < table.classifiers.size(); ++c) {
    for (size_t d = 0; d < table.datasets.size(); ++d) {
      double best = -1.0;
      for (size_t f = 0; f < table.frameworks.size(); ++f) {
        const ReportCell& cell = table.cells[c][f][d];
        if (cell.present) best = std::max(best, cell.result->mean());
      }
      for (size_t f = 0; f < table.frameworks.size(); ++f) {
        ReportCell& cell = table.cells[c][f][d];
        if (cell.present && cell.result->mean() == best) cell.best = true;
      }
    }
  }
  return table;
}

std::string format_mean_std(double mean, double stddev, size_t n) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", mean * 100.0);
  std::string out = buf;
  if (n >= 2) {
    const double pct = stddev * 100.0;
    std::snprintf(buf, sizeof(buf), "%.2f", pct);
    std::string s = buf;
    if (pct < 1.0 && s.rfind("0.", 0) == 0) s.erase(0, 1);  // 0.13 -> .13
    out += "±" + s;
  }
  return out;
}

std::string render_report_csv(const ReportTable& table) {
  std::ostringstream out;
  out << "classifier,framework,dataset,n,mean,std,best,per_seed\n";
  for (size_t c = 0; c < table.classifiers.size(); ++c) {
    for (size_t f = 0; f < table.frameworks.size(); ++f) {
      for (size_t d = 0; d < table.datasets.size(); ++d) {
        const ReportCell& cell = table.cells[c][f][d];
        if (!cell.present) continue;
        const RunResult& r = *cell.result;
        out << r.classifier << ',' << r.framework << ',' << r.dataset << ','
            << r.accuracies.size() << ',' << g17(r.mean()) << ',';
        if (r.accuracies.size() >= 2) out << g17(r.stddev());
        out << ',' << (cell.best ? 1 : 0) << ',';
        for (size_t i = 0; i < r.seeds.size(); ++i) {
          if (i) out << ';';
          out << r.seeds[i] << '=' << g17(r.accuracies[i]);
        }
        out << '\n';
      }
    }
  }
  return out.str();
}

std::string render_report_markdown(const ReportTable& table,
                                   const std::string& title) {
  std::ostringstream out;
  out << "# " << title << "\n";
  for (size_t c = 0; c < table.classifiers.size(); ++c) {
    out << "\n## " << classifier_label(family_from_name(table.classifiers[c]))
        << "\n\n| Methods |";
    for (const std::string& d : table.datasets) out << ' ' << d << " |";
    out << "\n|---|";
    for (size_t d = 0; d < table.datasets.size(); ++d) out << "---|";
    out << '\n';
    for (size_t f = 0; f < table.frameworks.size(); ++f) {
      out << "| " << framework_label(table.frameworks[f]) << " |";
      for (size_t d = 0; d < table.datasets.size(); ++d) {
        const ReportCell& cell = table.cells[c][f][d];
        if (!cell.present) {
          out << " - |";
          continue;
        }
        const RunResult& r = *cell.result;
        const std::string text =
            format_mean_std(r.mean(), r.stddev(), r.accuracies.size());
        out << ' ' << (cell.best ? "**" + text + "**" : text) << " |";
      }
      out << '\n';
    }
  }
  return out.str();
}

std::vector<RunResult> parse_report_csv(const std::string& text) {
  std::vector<RunResult> results;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty report");
  if (line.rfind("classifier,framework,dataset,", 0) != 0) {
    throw ParseError("unexpected report header: " + line);
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 8) {
      throw ParseError("report line " + std::to_string(line_no) + ": want 8 "
                       "fields, got " + std::to_string(fields.size()));
    }
    RunResult r;
    r.classifier = fields[0];
    r.framework = fields[1];
    r.dataset = fields[2];
    std::istringstream ps(fields[7]);
    std::string pair;
    while (std::getline(ps, pair, ';')) {
      const size_t eq = pair.find('=');
      if (eq == std::string::npos) {
        throw ParseError("report line " + std::to_string(line_no) +
                         ": bad per_seed entry '" + pair + "'");
      }
      r.seeds.push_back(std::stoull(pair.substr(0, eq)));
      r.accuracies.push_back(std::stod(pair.substr(eq + 1)));
    }
    if (r.accuracies.size() != std::stoul(fields[3])) {
      throw ParseError("report line " + std::to_string(line_no) +
                       ": n disagrees with per_seed");
    }
    results.push_back(std::move(r));
  }
  return results;
}

std::vector<RunResult> read_cells(const std::string& results_dir) {
  const fs::path dir = fs::path(results_dir) / "cells";
  if (!fs::is_directory(dir)) {
    throw ConfigError("no cells directory under " + results_dir);
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::map<std::tuple<std::string, size_t, std::string>,
           std::vector<std::pair<uint64_t, double>>>
      groups;
  for (const fs::path& file : files) {
    std::ifstream in(file);
    std::string header, row;
    if (!std::getline(in, header) || !std::getline(in, row)) {
      throw ParseError(file.string() + ": not a cell csv");
    }
    std::vector<std::string> fields;
    std::istringstream ls(row);
    std::string field;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() < 5) {
      throw ParseError(file.string() + ": want at least 5 fields");
    }
    const auto fw = std::find(kFrameworkNames.begin(), kFrameworkNames.end(),
                              fields[1]);
    if (fw == kFrameworkNames.end()) {
      throw ParseError(file.string() + ": unknown framework " + fields[1]);
    }
    groups[{fields[0],
            static_cast<size_t>(fw - kFrameworkNames.begin()),
            fields[2]}]
        .emplace_back(std::stoull(fields[3]), std::stod(fields[4]));
  }

  std::vector<RunResult> results;
  for (auto& [key, entries] : groups) {
    std::sort(entries.begin(), entries.end());
    RunResult r;
    r.classifier = std::get<0>(key);
    r.framework = kFrameworkNames[std::get<1>(key)];
    r.dataset = std::get<2>(key);
    for (const auto& [seed, acc] : entries) {
      r.seeds.push_back(seed);
      r.accuracies.push_back(acc);
    }
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace distlab
