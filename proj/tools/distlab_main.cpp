#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "distlab/runner.hpp"
#include "distlab/tensor.hpp"

namespace fs = std::filesystem;
using namespace distlab;

namespace {

void print_usage(std::ostream& out) {
  out << "usage: distlab <command> [options]\n"
         "\n"
         "commands:\n"
         "  run <config>        execute the experiment grid from a config file\n"
         "      --seed N        run only this seed\n"
         "      --epochs N      override epoch count\n"
         "      --framework F   run only this framework (conventional_teacher,\n"
         "                      conventional_student, passive, active)\n"
         "      --out DIR       override the output directory\n"
         "      --workers N     parallel chains\n"
         "  report <dir>        re-aggregate a results directory to stdout\n"
         "      --format F      csv or markdown (default markdown)\n"
         "  gradcheck           finite-difference check of every tensor op\n"
         "  synth               write a synthetic dataset as train/test TSVs\n"
         "      --classes N --vocab N --per-class N --noise R --seed N\n"
         "      --out DIR --name NAME\n";
}

int fail_usage(const std::string& msg) {
  std::cerr << "error: " << msg << "\n\n";
  print_usage(std::cerr);
  return 2;
}

bool next_value(const std::vector<std::string>& args, size_t& i,
                std::string& out) {
  if (i + 1 >= args.size()) return false;
  out = args[++i];
  return true;
}

int cmd_run(const std::vector<std::string>& args) {
  if (args.empty()) return fail_usage("run needs a config file");
  const std::string config_path = args[0];

  ExperimentConfig config;
  try {
    config = parse_config_file(config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  for (size_t i = 1; i < args.size(); ++i) {
    std::string v;
    if (args[i] == "--seed" && next_value(args, i, v)) {
      config.seeds = {std::stoull(v)};
    } else if (args[i] == "--epochs" && next_value(args, i, v)) {
      config.train.epochs = std::stoi(v);
    } else if (args[i] == "--framework" && next_value(args, i, v)) {
      config.frameworks = {v};
    } else if (args[i] == "--out" && next_value(args, i, v)) {
      config.output_dir = v;
    } else if (args[i] == "--workers" && next_value(args, i, v)) {
      config.workers = std::stoi(v);
    } else {
      return fail_usage("unknown option '" + args[i] + "' for run");
    }
  }

  try {
    const GridOutcome outcome = run_grid(config);
    for (const std::string& f : outcome.failures) {
      std::cerr << "cell failed: " << f << "\n";
    }
    if (!outcome.results.empty()) {
      const ReportTable table = build_report(outcome.results);
      std::ofstream csv(config.output_dir + "/report.csv", std::ios::binary);
      csv << render_report_csv(table);
      std::ofstream md(config.output_dir + "/report.md", std::ios::binary);
      md << render_report_markdown(table, config.name);
      std::cout << render_report_markdown(table, config.name);
      std::cout << "\nwrote " << config.output_dir << "/report.csv and "
                << config.output_dir << "/report.md\n";
    }
    return outcome.failures.empty() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_report(const std::vector<std::string>& args) {
  if (args.empty()) return fail_usage("report needs a results directory");
  const std::string dir = args[0];
  std::string format = "markdown";
  for (size_t i = 1; i < args.size(); ++i) {
    std::string v;
    if (args[i] == "--format" && next_value(args, i, v)) {
      format = v;
    } else {
      return fail_usage("unknown option '" + args[i] + "' for report");
    }
  }
  if (format != "csv" && format != "markdown") {
    return fail_usage("unknown format '" + format + "'");
  }
  try {
    const std::vector<RunResult> results = read_cells(dir);
    const ReportTable table = build_report(results);
    if (format == "csv") {
      std::cout << render_report_csv(table);
    } else {
      std::cout << render_report_markdown(table, dir);
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_synth(const std::vector<std::string>& args) {
  SyntheticParams params;
  std::string out_dir = ".";
  std::string name = "synthetic";
  for (size_t i = 0; i < args.size(); ++i) {
    std::string v;
    if (args[i] == "--classes" && next_value(args, i, v)) {
      params.num_classes = std::stoi(v);
    } else if (args[i] == "--vocab" && next_value(args, i, v)) {
      params.vocab_size = std::stoi(v);
    } else if (args[i] == "--per-class" && next_value(args, i, v)) {
      params.examples_per_class = std::stoi(v);
    } else if (args[i] == "--noise" && next_value(args, i, v)) {
      params.noise_rate = std::stod(v);
    } else if (args[i] == "--seed" && next_value(args, i, v)) {
      params.seed = std::stoull(v);
    } else if (args[i] == "--out" && next_value(args, i, v)) {
      out_dir = v;
    } else if (args[i] == "--name" && next_value(args, i, v)) {
      name = v;
    } else {
      return fail_usage("unknown option '" + args[i] + "' for synth");
    }
  }
  try {
    const DatasetSplit split = make_synthetic(params, name);
    fs::create_directories(out_dir);
    write_tsv(out_dir + "/train.tsv", split.train);
    write_tsv(out_dir + "/test.tsv", split.test);
    std::cout << "wrote " << split.train.size() << " train / "
              << split.test.size() << " test examples to " << out_dir
              << "/{train,test}.tsv (" << split.num_classes << " classes)\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty()) {
    print_usage(std::cerr);
    return 2;
  }
  const std::string command = args[0];
  const std::vector<std::string> rest(args.begin() + 1, args.end());

  if (command == "--help" || command == "-h" || command == "help") {
    print_usage(std::cout);
    return 0;
  }
  if (command == "run") return cmd_run(rest);
  if (command == "report") return cmd_report(rest);
  if (command == "synth") return cmd_synth(rest);
  if (command == "gradcheck") {
    return run_gradcheck_suite(std::cout) ? 0 : 1;
  }
  return fail_usage("unknown command '" + command + "'");
}
