// xmdistill: command-line front end of the cross-modal distillation lab.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 data/format error,
// 4 numeric failure.

#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "xmd/binary_io.hpp"
#include "xmd/checkpoint.hpp"
#include "xmd/config.hpp"
#include "xmd/error.hpp"
#include "xmd/experiment.hpp"
#include "xmd/selfcheck.hpp"

namespace fs = std::filesystem;
using namespace xmd;

namespace {

struct CommonFlags {
  std::string config;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON experiment config");
  cmd->add_option("--set", f.overrides, "Dotted override key=value (repeatable)")->allow_extra_args(false);
  cmd->add_option("--seed", f.seed, "Run and dataset seed");
  cmd->add_option("--out", f.out, "Output directory");
}

ExperimentConfig resolve(CLI::App* cmd, const CommonFlags& f) {
  ConfigSources src;
  src.config_path = f.config;
  src.overrides = f.overrides;
  if (cmd->count("--seed")) src.seed = f.seed;
  if (cmd->count("--out")) src.out_dir = f.out;
  return resolve_config(src);
}

template <class T>
std::vector<T> parse_list(const std::string& text, const std::string& what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      if constexpr (std::is_same_v<T, double>) {
        out.push_back(std::stod(item, &used));
      } else {
        out.push_back(static_cast<T>(std::stoull(item, &used)));
      }
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad " + what + " entry: " + item);
    }
  }
  return out;
}

void print_metrics(const MetricsReport& r) {
  for (const auto& [name, value] : r.scalar_metrics()) std::cout << name << " = " << value << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-modal knowledge distillation lab"};
  app.require_subcommand(1);

  CommonFlags gen_f, teacher_f, distill_f, eval_f, sweep_f, report_f;
  std::string teacher_ckpt, student_ckpt, axis, values, seeds, runs_dir;
  std::size_t grad_seeds = 100;
  double grad_tol = 1e-4;

  auto* gen = app.add_subcommand("gen-data", "Generate and write every benchmark split");
  add_common(gen, gen_f);
  auto* teach = app.add_subcommand("train-teacher", "Pretrain and checkpoint the teacher");
  add_common(teach, teacher_f);
  auto* distill = app.add_subcommand("distill", "Train a student, then evaluate it");
  add_common(distill, distill_f);
  distill->add_option("--teacher", teacher_ckpt, "Teacher checkpoint (trained first when omitted)");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate a trained student checkpoint");
  add_common(evaluate_cmd, eval_f);
  evaluate_cmd->add_option("--student", student_ckpt, "Student checkpoint (default <out>/student.ckpt)");
  auto* sweep = app.add_subcommand("sweep", "One run per value per seed along one axis");
  add_common(sweep, sweep_f);
  sweep->add_option("--axis", axis, "alpha | margin | beta | h");
  sweep->add_option("--values", values, "Comma-separated axis values");
  sweep->add_option("--seeds", seeds, "Comma-separated seeds");
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every loss");
  grad->add_option("--seeds", grad_seeds, "Number of seeded configurations");
  grad->add_option("--tolerance", grad_tol, "Maximum relative error");
  auto* report = app.add_subcommand("report", "Summarise run logs into markdown and CSV");
  report->add_option("--runs", runs_dir, "Directory searched for log.jsonl files")->required();
  report->add_option("--out", report_f.out, "Write report.md and report.csv here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      const ExperimentConfig cfg = resolve(gen, gen_f);
      write_resolved_config(cfg, cfg.out_dir);
      const Benchmark bench = load_benchmark(cfg);
      save_benchmark(bench, cfg.out_dir);
      std::cout << "wrote " << bench.train.size() << " train pairs and 4 further splits to " << cfg.out_dir << '\n';
    } else if (teach->parsed()) {
      const ExperimentConfig cfg = resolve(teach, teacher_f);
      write_resolved_config(cfg, cfg.out_dir);
      RunLog log((fs::path(cfg.out_dir) / "log.jsonl").string());
      const TeacherResult t = train_teacher(cfg, load_benchmark(cfg), &log);
      save_checkpoint(t.params, (fs::path(cfg.out_dir) / "teacher.ckpt").string());
      std::cout << "teacher train_accuracy = " << t.train_accuracy << "\nteacher val_accuracy = " << t.val_accuracy
                << '\n';
    } else if (distill->parsed()) {
      const ExperimentConfig cfg = resolve(distill, distill_f);
      print_metrics(run_distill(cfg, teacher_ckpt));
    } else if (evaluate_cmd->parsed()) {
      const ExperimentConfig cfg = resolve(evaluate_cmd, eval_f);
      const std::string path = student_ckpt.empty() ? (fs::path(cfg.out_dir) / "student.ckpt").string() : student_ckpt;
      if (!fs::exists(path)) throw UsageError("student checkpoint not found: " + path);
      write_resolved_config(cfg, cfg.out_dir);
      const ModelBundle bundle(cfg.bundle_config(), load_checkpoint(path));
      const MetricsReport r = evaluate(cfg, load_benchmark(cfg), bundle, fs::path(cfg.out_dir).filename().string());
      write_file((fs::path(cfg.out_dir) / "eval.json").string(), to_json(r).dump(2) + "\n");
      write_file((fs::path(cfg.out_dir) / "eval.csv").string(), metrics_csv(std::span(&r, 1)));
      print_metrics(r);
    } else if (sweep->parsed()) {
      ExperimentConfig cfg = resolve(sweep, sweep_f);
      if (!axis.empty()) cfg.sweep.axis = axis;
      if (!values.empty()) cfg.sweep.values = parse_list<double>(values, "--values");
      if (!seeds.empty()) cfg.sweep.seeds = parse_list<std::uint64_t>(seeds, "--seeds");
      const SweepOutcome out = run_sweep(cfg);
      std::cout << out.csv;
      if (out.failures) std::cerr << out.failures << " sweep runs failed; see sweep.jsonl\n";
    } else if (grad->parsed()) {
      bool ok = true;
      for (const auto& c : gradcheck_suite(grad_seeds)) {
        const bool pass = c.worst_relative_error <= grad_tol;
        ok = ok && pass;
        std::cout << (pass ? "ok   " : "FAIL ") << c.loss << " worst_rel_err=" << c.worst_relative_error
                  << " checked=" << c.checked << " skipped_kinks=" << c.skipped << '\n';
      }
      if (!ok) throw NumericError("gradient check exceeded tolerance");
    } else if (report->parsed()) {
      const ReportSummary s = build_report(runs_dir);
      std::cout << s.markdown;
      if (s.warnings) std::cerr << "warning: skipped " << s.warnings << " malformed log lines\n";
      if (!report_f.out.empty()) {
        fs::create_directories(report_f.out);
        write_file((fs::path(report_f.out) / "report.md").string(), s.markdown);
        write_file((fs::path(report_f.out) / "report.csv").string(), s.csv);
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
