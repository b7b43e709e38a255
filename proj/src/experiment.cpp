#include "xmd/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "xmd/binary_io.hpp"
#include "xmd/checkpoint.hpp"
#include "xmd/error.hpp"
#include "xmd/losses.hpp"
#include "xmd/optim.hpp"
#include "xmd/quality.hpp"

namespace fs = std::filesystem;

namespace xmd {

namespace {

constexpr Split kSplits[] = {Split::TeacherPretrain, Split::Train, Split::Val, Split::TestClosed, Split::TestOpen};

PairedDataset& split_of(Benchmark& b, Split s) {
  switch (s) {
    case Split::TeacherPretrain: return b.teacher_pretrain;
    case Split::Train: return b.train;
    case Split::Val: return b.val;
    case Split::TestClosed: return b.test_closed;
    case Split::TestOpen: return b.test_open;
  }
  throw ConfigError("unknown split");
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

// Shortest round-trip text for table cells.
std::string short_fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

bool params_finite(const ParamSet& params) {
  for (const auto& [name, p] : params) {
    if (!p.value.all_finite()) return false;
  }
  return true;
}

double val_eer_of(const Tensor& embeddings, std::span<const int> labels, std::uint64_t seed) {
  return compute_eer(build_trials(embeddings, labels, TrialConfig{5000, 5000, seed}));
}

double argmax_hits(const Tensor& logits, std::span<const int> labels) {
  return classification_accuracy(logits, labels) * static_cast<double>(labels.size());
}

}  // namespace

RunLog::RunLog(const std::string& path) {
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  out_.emplace(path, std::ios::binary | std::ios::trunc);
  if (!*out_) throw ConfigError("cannot open log file: " + path);
}

void RunLog::write(const json& record) {
  if (!out_) return;
  *out_ << record.dump() << '\n';
  out_->flush();
}

Benchmark load_benchmark(const ExperimentConfig& cfg) {
  if (cfg.dataset_dir.empty()) return generate_benchmark(cfg.data, cfg.suite);
  Benchmark b;
  for (Split s : kSplits) {
    const std::string path = (fs::path(cfg.dataset_dir) / (to_string(s) + ".xmdd")).string();
    if (!fs::exists(path)) throw ConfigError("missing dataset split: " + path);
    PairedDataset ds = load_dataset(path);
    if (ds.teacher_dim != cfg.data.teacher_dim || ds.student_dim != cfg.data.student_dim) {
      throw ConfigError("dataset dims do not match data.teacher_dim/data.student_dim: " + path);
    }
    split_of(b, s) = std::move(ds);
  }
  for (int y : b.train.labels()) {
    if (static_cast<std::size_t>(y) >= cfg.data.num_classes) {
      throw ConfigError("train labels exceed data.num_classes; set it to the dataset's class count");
    }
  }
  return b;
}

void save_benchmark(const Benchmark& bench, const std::string& dir) {
  fs::create_directories(dir);
  Benchmark copy = bench;
  for (Split s : kSplits) save_dataset(split_of(copy, s), (fs::path(dir) / (to_string(s) + ".xmdd")).string());
}

TeacherResult train_teacher(const ExperimentConfig& cfg, const Benchmark& bench, RunLog* log) {
  if (bench.teacher_pretrain.size() == 0) throw ConfigError("teacher-pretrain split is empty");
  const PairedDataset data = subset_per_class(bench.teacher_pretrain, cfg.teacher.data_fraction);
  const EncoderConfig enc = cfg.teacher_encoder();
  const std::size_t classes = cfg.data.num_classes;
  validate_labels(data.labels(), classes);

  TeacherResult result;
  result.params = init_teacher(enc, classes, derive_seed(cfg.seed, "teacher-init"));
  ParamSet& params = result.params;
  Optimizer opt(cfg.train.optimizer);
  // Small cut splits may hold fewer than P classes with K samples.
  BatchSpec batch = cfg.train.batch;
  batch.samples_per_class = std::min(batch.samples_per_class, std::max<std::size_t>(1, data.size() / classes));

  const BatchData val = gather_all(bench.val);
  auto teacher_logits = [&](const Tensor& x) {
    Graph g(std::as_const(params));
    Var e = encoder_forward(g, g.constant(x), "teacher", enc);
    return matmul_t(e, g.param("teacher.classifier.weight")).value();
  };

  for (std::size_t epoch = 1; epoch <= cfg.teacher.epochs; ++epoch) {
    double loss_sum = 0.0, hits = 0.0;
    std::size_t seen = 0, steps = 0;
    for (const auto& idx : make_batches(data, batch, derive_seed(cfg.seed, "teacher-batches", epoch))) {
      const BatchData b = gather(data, idx);
      Graph g(params);
      Var e = encoder_forward(g, g.constant(b.x_teacher), "teacher", enc);
      Var logits = matmul_t(e, g.param("teacher.classifier.weight"));
      Var loss = cross_entropy(logits, b.labels);
      g.backward(loss);
      opt.step(params);
      loss_sum += loss.value().item();
      hits += argmax_hits(logits.value(), b.labels);
      seen += b.labels.size();
      ++steps;
    }
    if (!params_finite(params)) throw NumericError("teacher parameters became non-finite in epoch " + std::to_string(epoch));
    result.train_accuracy = seen ? hits / static_cast<double>(seen) : 0.0;
    result.val_accuracy = classification_accuracy(teacher_logits(val.x_teacher), val.labels);
    if (log) {
      log->write({{"type", "teacher_epoch"},
                  {"epoch", epoch},
                  {"loss", steps ? loss_sum / static_cast<double>(steps) : 0.0},
                  {"train_accuracy", result.train_accuracy},
                  {"val_accuracy", result.val_accuracy},
                  {"lr", opt.learning_rate()}});
    }
    if (epoch % cfg.train.lr_decay_every == 0) opt.set_learning_rate(opt.learning_rate() * cfg.train.lr_decay);
  }
  for (auto& [name, p] : params) p.trainable = false;
  if (log) {
    log->write({{"type", "teacher"},
                {"train_accuracy", result.train_accuracy},
                {"val_accuracy", result.val_accuracy},
                {"data_fraction", cfg.teacher.data_fraction},
                {"samples", data.size()}});
  }
  return result;
}

DistillResult distill_train(const ExperimentConfig& cfg, const Benchmark& bench, const ParamSet& teacher, RunLog* log,
                            const std::string& last_good_path) {
  const DistillConfig& dc = cfg.distill;
  const PairedDataset data = subset_per_class(bench.train, cfg.train.student_fraction);
  validate_labels(data.labels(), cfg.data.num_classes);

  DistillResult result{ModelBundle(cfg.bundle_config(), teacher, derive_seed(cfg.seed, "student-init")), {}, {}};
  ModelBundle& bundle = result.bundle;
  ParamSet& params = bundle.params();
  Optimizer opt(cfg.train.optimizer);
  RunningStats stats(dc.quality.ema_decay);
  const bool weighted = dc.quality.enabled && dc.mode != DistillMode::None;
  BatchSpec batch = cfg.train.batch;
  batch.samples_per_class = std::min(batch.samples_per_class, std::max<std::size_t>(1, data.size() / cfg.data.num_classes));

  const BatchData val = gather_all(bench.val);
  ParamSet last_good;

  for (std::size_t epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
    double loss_sum = 0.0, task_sum = 0.0, distill_sum = 0.0, weight_sum = 0.0, hits = 0.0;
    std::size_t seen = 0, steps = 0, weighted_samples = 0;
    for (const auto& idx : make_batches(data, batch, derive_seed(cfg.seed, "student-batches", epoch))) {
      const BatchData b = gather(data, idx);
      last_good = params;
      try {
        Graph g(params);
        Var fs = bundle.encode_student(g, g.constant(b.x_student));
        Var logits = bundle.classify(g, fs);
        Var task = cross_entropy(logits, b.labels);
        Var loss = task;
        if (dc.mode != DistillMode::None) {
          Var et = bundle.encode_teacher(g, g.constant(b.x_teacher));
          Var rows;
          auto aligned = [&](Var student, Var target) {
            return dc.normalize_features ? std::pair{l2_normalize_rows(student), l2_normalize_rows(target)}
                                         : std::pair{student, target};
          };
          switch (dc.mode) {
            case DistillMode::Feature: {
              Var ft = bundle.project(g, et);
              auto [s, t] = dc.metric == DistanceMetric::SqL2Mean ? aligned(fs, ft) : std::pair{fs, ft};
              rows = margin_feature_loss(s, t, dc.metric, dc.margin());
              break;
            }
            case DistillMode::Classifier:
              rows = classifier_level_loss_rows(fs, bundle.project(g, et), b.labels, b.labels,
                                                g.param("classifier.weight"), dc.beta);
              break;
            case DistillMode::KdKl:
              rows = kd_kl_baseline_rows(logits, bundle.teacher_logits(g, et), dc.temperature);
              break;
            case DistillMode::FitnetL2: {
              auto [s, t] = aligned(fs, bundle.project(g, et));
              rows = fitnet_l2_baseline_rows(s, t);
              break;
            }
            case DistillMode::None: break;
          }
          std::vector<double> weights;
          if (weighted) {
            std::vector<double> q;
            switch (dc.quality.source) {
              case QualitySource::Teacher: q = quantify_quality(et.value()); break;
              case QualitySource::Student: q = quantify_quality(fs.value()); break;
              case QualitySource::Min:
                q = min_quality(quantify_quality(et.value()), quantify_quality(fs.value()));
                break;
            }
            stats.update(q);
            weights = adaptive_weights(q, stats, dc.quality);
            for (double w : weights) weight_sum += w;
            weighted_samples += weights.size();
          }
          loss = total_loss(task, rows, weights, dc.lambda);
          distill_sum += loss.value().item() - task.value().item();
        }
        if (!std::isfinite(loss.value().item())) throw NumericError("non-finite loss");
        g.backward(loss);
        opt.step(params);
        if (!params_finite(params)) throw NumericError("non-finite parameters after optimizer step");
        loss_sum += loss.value().item();
        task_sum += task.value().item();
        hits += argmax_hits(logits.value(), b.labels);
        seen += b.labels.size();
        ++steps;
      } catch (const NumericError& e) {
        if (!last_good_path.empty()) save_checkpoint(last_good, last_good_path);
        throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(steps + 1) +
                           (last_good_path.empty() ? std::string() : "; last good parameters saved to " + last_good_path));
      }
    }
    const double n = steps ? static_cast<double>(steps) : 1.0;
    const Tensor val_emb = bundle.student_embeddings(val.x_student);
    json record{{"type", "epoch"},
                {"epoch", epoch},
                {"loss", loss_sum / n},
                {"task_loss", task_sum / n},
                {"distill_loss", distill_sum / n},
                {"train_accuracy", seen ? hits / static_cast<double>(seen) : 0.0},
                {"val_accuracy", classification_accuracy(bundle.logits(val_emb), val.labels)},
                {"val_eer", val_eer_of(val_emb, val.labels, derive_seed(cfg.seed, "val-trials"))},
                {"lr", opt.learning_rate()}};
    if (weighted) {
      record["mu_q"] = stats.mu();
      record["sigma_q"] = stats.sigma();
      record["mean_weight"] = weighted_samples ? weight_sum / static_cast<double>(weighted_samples) : 0.0;
      record["quality_warnings"] = stats.warnings();
    }
    result.loss_trace.push_back(loss_sum / n);
    if (log) log->write(record);
    result.epochs.push_back(std::move(record));
    if (epoch % cfg.train.lr_decay_every == 0) opt.set_learning_rate(opt.learning_rate() * cfg.train.lr_decay);
  }
  return result;
}

Tensor eval_embeddings(const ExperimentConfig& cfg, const ModelBundle& bundle, const Tensor& x_student) {
  Tensor acc = bundle.student_embeddings(x_student);
  for (std::size_t v = 1; v < cfg.eval.crops; ++v) {
    const Tensor view = bundle.student_embeddings(
        inject_noise_rows(x_student, cfg.eval.crop_snr_db, derive_seed(cfg.seed, "crop-view", v)));
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += view[i];
  }
  if (cfg.eval.crops > 1) {
    for (double& v : acc.storage()) v /= static_cast<double>(cfg.eval.crops);
  }
  return acc;
}

MetricsReport evaluate(const ExperimentConfig& cfg, const Benchmark& bench, const ModelBundle& bundle,
                       const std::string& run_id, std::vector<double> loss_trace) {
  MetricsReport r;
  r.run_id = run_id;
  r.mode = to_string(cfg.distill.mode);
  r.seed = cfg.seed;
  r.loss_trace = std::move(loss_trace);
  r.config = to_json(cfg);

  const BatchData closed = gather_all(bench.test_closed);
  r.accuracy = classification_accuracy(bundle.logits(bundle.student_embeddings(closed.x_student)), closed.labels);
  const BatchData val = gather_all(bench.val);
  const Tensor val_emb = bundle.student_embeddings(val.x_student);
  r.val_accuracy = classification_accuracy(bundle.logits(val_emb), val.labels);
  r.val_eer = val_eer_of(val_emb, val.labels, derive_seed(cfg.seed, "val-trials"));

  const BatchData open = gather_all(bench.test_open);
  const TrialConfig trials{cfg.eval.max_target, cfg.eval.max_nontarget, derive_seed(cfg.seed, "open-trials")};
  const Tensor student = eval_embeddings(cfg, bundle, open.x_student);
  const TrialSet t = build_trials(student, open.labels, trials);
  r.eer = compute_eer(t);
  r.min_dcf = compute_min_dcf(t, cfg.eval.p_target);

  const Tensor teacher = bundle.projected_embeddings(open.x_teacher);
  const std::uint64_t match_seed = derive_seed(cfg.seed, "matching");
  r.matching_original = matching_both_directions(student, teacher, open.labels, bench.test_open.class_groups,
                                                 MatchingProtocol::Original, cfg.eval.matching_trials, match_seed);
  r.matching_hard = matching_both_directions(student, teacher, open.labels, bench.test_open.class_groups,
                                             MatchingProtocol::Hard, cfg.eval.matching_trials, match_seed);

  for (double db : cfg.eval.noise_db) {
    const auto tag = static_cast<std::uint64_t>(std::llround(db * 1000.0));
    const Tensor noisy = inject_noise_rows(open.x_student, db, derive_seed(cfg.seed, "eval-noise", tag));
    r.noisy_eer[db] = compute_eer(build_trials(eval_embeddings(cfg, bundle, noisy), open.labels, trials));
  }
  return r;
}

void write_resolved_config(const ExperimentConfig& cfg, const std::string& dir) {
  fs::create_directories(dir);
  write_file((fs::path(dir) / "config.resolved.json").string(), to_json(cfg).dump(2) + "\n");
}

MetricsReport run_distill(const ExperimentConfig& cfg, const std::string& teacher_checkpoint) {
  const fs::path dir(cfg.out_dir);
  write_resolved_config(cfg, cfg.out_dir);
  const Benchmark bench = load_benchmark(cfg);
  RunLog log((dir / "log.jsonl").string());

  ParamSet teacher;
  if (teacher_checkpoint.empty()) {
    teacher = train_teacher(cfg, bench, &log).params;
    save_checkpoint(teacher, (dir / "teacher.ckpt").string());
  } else {
    if (!fs::exists(teacher_checkpoint)) throw UsageError("teacher checkpoint not found: " + teacher_checkpoint);
    teacher = load_checkpoint(teacher_checkpoint);
  }

  DistillResult trained = distill_train(cfg, bench, teacher, &log, (dir / "last_good.ckpt").string());
  save_checkpoint(trained.bundle.params(), (dir / "student.ckpt").string());
  const std::string run_id = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
  MetricsReport report = evaluate(cfg, bench, trained.bundle, run_id, trained.loss_trace);
  json record = to_json(report);
  record["type"] = "metrics";
  log.write(record);
  write_file((dir / "metrics.json").string(), to_json(report).dump(2) + "\n");
  write_file((dir / "metrics.csv").string(), metrics_csv(std::span(&report, 1)));
  return report;
}

void apply_sweep_value(ExperimentConfig& cfg, const std::string& axis, double value) {
  if (axis == "alpha") {
    cfg.distill.alpha = value;
  } else if (axis == "margin") {
    if (cfg.distill.metric == DistanceMetric::Cosine) {
      cfg.distill.margin_deg = value;
    } else {
      cfg.distill.margin_l2 = value;
    }
  } else if (axis == "beta") {
    cfg.distill.beta = value;
  } else if (axis == "h") {
    cfg.distill.quality.h = value;
  } else {
    throw ConfigError("unknown sweep axis: " + axis + " (expected alpha, margin, beta or h)");
  }
}

SweepOutcome run_sweep(const ExperimentConfig& cfg) {
  const SweepConfig& sw = cfg.sweep;
  if (sw.values.empty()) throw ConfigError("sweep.values must not be empty");
  if (sw.seeds.empty()) throw ConfigError("sweep.seeds must not be empty");
  {
    ExperimentConfig probe = cfg;
    apply_sweep_value(probe, sw.axis, sw.values.front());
  }
  const fs::path root(cfg.out_dir);
  write_resolved_config(cfg, cfg.out_dir);

  const std::vector<std::string> metrics{"eer", "min_dcf", "accuracy", "val_accuracy"};
  // results[value index][seed index]
  std::vector<std::vector<std::optional<MetricsReport>>> results(sw.values.size(),
                                                                 std::vector<std::optional<MetricsReport>>(sw.seeds.size()));
  SweepOutcome outcome;
  RunLog log((root / "sweep.jsonl").string());
  for (std::size_t si = 0; si < sw.seeds.size(); ++si) {
    ExperimentConfig seeded = cfg;
    seeded.seed = sw.seeds[si];
    seeded.data.seed = sw.seeds[si];
    const std::string seed_tag = "s" + std::to_string(sw.seeds[si]);
    // One teacher per seed, shared by every value of the axis.
    const fs::path teacher_path = root / ("teacher-" + seed_tag) / "teacher.ckpt";
    std::string teacher_error;
    try {
      if (!fs::exists(teacher_path)) {
        ExperimentConfig tcfg = seeded;
        tcfg.out_dir = teacher_path.parent_path().string();
        write_resolved_config(tcfg, tcfg.out_dir);
        RunLog tlog((teacher_path.parent_path() / "log.jsonl").string());
        save_checkpoint(train_teacher(tcfg, load_benchmark(tcfg), &tlog).params, teacher_path.string());
      }
    } catch (const std::exception& e) {
      teacher_error = e.what();
    }
    for (std::size_t vi = 0; vi < sw.values.size(); ++vi) {
      ExperimentConfig run = seeded;
      apply_sweep_value(run, sw.axis, sw.values[vi]);
      run.out_dir = (root / (sw.axis + "=" + short_fmt(sw.values[vi])) / seed_tag).string();
      json status{{"type", "sweep_run"}, {"axis", sw.axis}, {"value", sw.values[vi]}, {"seed", run.seed},
                  {"out_dir", run.out_dir}};
      try {
        if (!teacher_error.empty()) throw ConfigError("teacher training failed: " + teacher_error);
        results[vi][si] = run_distill(run, teacher_path.string());
        status["status"] = "ok";
      } catch (const std::exception& e) {
        ++outcome.failures;
        status["status"] = "failed";
        status["error"] = e.what();
      }
      log.write(status);
    }
  }

  std::ostringstream csv;
  csv << sw.axis << ",runs";
  for (const auto& m : metrics) {
    csv << ',' << m << "_mean";
    for (auto s : sw.seeds) csv << ',' << m << "_s" << s;
  }
  csv << ",failures\n";
  for (std::size_t vi = 0; vi < sw.values.size(); ++vi) {
    std::size_t ok = 0;
    for (const auto& r : results[vi]) ok += r.has_value();
    csv << short_fmt(sw.values[vi]) << ',' << ok;
    for (const auto& m : metrics) {
      double sum = 0.0;
      std::vector<std::string> cells;
      for (const auto& r : results[vi]) {
        if (!r) {
          cells.emplace_back();
          continue;
        }
        double v = 0.0;
        for (const auto& [name, value] : r->scalar_metrics()) {
          if (name == m) v = value;
        }
        sum += v;
        cells.push_back(fmt(v));
      }
      csv << ',' << (ok ? fmt(sum / static_cast<double>(ok)) : std::string());
      for (const auto& c : cells) csv << ',' << c;
    }
    csv << ',' << (sw.seeds.size() - ok) << '\n';
  }
  outcome.csv = csv.str();
  write_file((root / "sweep.csv").string(), outcome.csv);
  return outcome;
}

ReportSummary build_report(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DataError("no runs found: " + dir + " is not a directory");
  std::vector<fs::path> logs;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "log.jsonl") logs.push_back(entry.path());
  }
  std::sort(logs.begin(), logs.end());

  struct Group {
    std::string mode;
    std::set<std::uint64_t> seeds;
    std::vector<std::string> runs;
    std::map<std::string, std::vector<double>> values;
    std::vector<std::string> order;  // metric names in first-seen order
  };
  std::map<std::string, Group> groups;
  ReportSummary summary;
  for (const auto& path : logs) {
    std::istringstream lines(read_file(path.string()));
    std::string line;
    while (std::getline(lines, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object()) {
        ++summary.warnings;
        continue;
      }
      if (j.value("type", std::string()) != "metrics") continue;
      MetricsReport r;
      try {
        r = metrics_report_from_json(j);
      } catch (const DataError&) {
        ++summary.warnings;
        continue;
      }
      Group& g = groups[config_hash(r.config)];
      g.mode = r.mode;
      g.seeds.insert(r.seed);
      g.runs.push_back(r.run_id);
      for (const auto& [name, value] : r.scalar_metrics()) {
        if (!g.values.count(name)) g.order.push_back(name);
        g.values[name].push_back(value);
      }
      ++summary.runs;
    }
  }
  if (groups.empty()) throw DataError("no runs found under " + dir);
  summary.groups = groups.size();

  std::vector<std::string> metrics;
  for (const auto& [hash, g] : groups) {
    for (const auto& m : g.order) {
      if (std::find(metrics.begin(), metrics.end(), m) == metrics.end()) metrics.push_back(m);
    }
  }
  auto lower_is_better = [](const std::string& m) { return m.find("eer") != std::string::npos || m == "min_dcf"; };
  std::map<std::string, std::map<std::string, double>> means;
  std::map<std::string, std::string> best;  // metric -> group hash
  for (const auto& m : metrics) {
    for (const auto& [hash, g] : groups) {
      const auto it = g.values.find(m);
      if (it == g.values.end()) continue;
      double sum = 0.0;
      for (double v : it->second) sum += v;
      const double mean = sum / static_cast<double>(it->second.size());
      means[hash][m] = mean;
      const auto b = best.find(m);
      if (b == best.end() || (lower_is_better(m) ? mean < means[b->second][m] : mean > means[b->second][m])) {
        best[m] = hash;
      }
    }
  }

  std::ostringstream md, csv;
  md << "| config | mode | runs | seeds |";
  for (const auto& m : metrics) md << ' ' << m << " |";
  md << "\n|---|---|---|---|";
  for (std::size_t i = 0; i < metrics.size(); ++i) md << "---|";
  md << '\n';
  csv << "config,mode,runs,metric,mean,best\n";
  for (const auto& [hash, g] : groups) {
    std::string seeds;
    for (auto s : g.seeds) seeds += (seeds.empty() ? "" : " ") + std::to_string(s);
    md << "| " << hash << " | " << g.mode << " | " << g.runs.size() << " | " << seeds << " |";
    for (const auto& m : metrics) {
      const auto it = means[hash].find(m);
      if (it == means[hash].end()) {
        md << " |";
        continue;
      }
      char cell[32];
      std::snprintf(cell, sizeof cell, "%.4f", it->second);
      const bool is_best = best[m] == hash;
      md << ' ' << (is_best ? "**" + std::string(cell) + "**" : std::string(cell)) << " |";
      csv << hash << ',' << g.mode << ',' << g.runs.size() << ',' << m << ',' << short_fmt(it->second) << ','
          << (is_best ? 1 : 0) << '\n';
    }
    md << '\n';
  }
  md << "\nBest value per metric in bold. " << summary.runs << " runs in " << summary.groups << " config groups";
  if (summary.warnings) md << "; " << summary.warnings << " malformed log lines skipped";
  md << ".\n";
  summary.markdown = md.str();
  summary.csv = csv.str();
  return summary;
}

}  // namespace xmd
