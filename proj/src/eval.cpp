#include "xmd/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "xmd/error.hpp"
#include "xmd/random.hpp"

namespace xmd {

namespace {

void check_trials(const TrialSet& trials) {
  if (trials.target.empty() || trials.nontarget.empty()) {
    throw UsageError("trial set needs at least one target and one nontarget score");
  }
  for (const auto* side : {&trials.target, &trials.nontarget}) {
    for (double s : *side) {
      if (!std::isfinite(s)) throw DataError("trial scores must be finite");
    }
  }
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace

std::vector<SweepPoint> threshold_sweep(const TrialSet& trials) {
  check_trials(trials);
  std::vector<double> tar = trials.target;
  std::vector<double> non = trials.nontarget;
  std::sort(tar.begin(), tar.end());
  std::sort(non.begin(), non.end());
  std::vector<double> cand;
  cand.reserve(tar.size() + non.size() + 1);
  std::merge(tar.begin(), tar.end(), non.begin(), non.end(), std::back_inserter(cand));
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  cand.push_back(std::numeric_limits<double>::infinity());

  const double nt = static_cast<double>(tar.size());
  const double nn = static_cast<double>(non.size());
  std::vector<SweepPoint> out;
  out.reserve(cand.size());
  std::size_t below_t = 0;  // targets with score < threshold
  std::size_t below_n = 0;
  for (double t : cand) {
    while (below_t < tar.size() && tar[below_t] < t) ++below_t;
    while (below_n < non.size() && non[below_n] < t) ++below_n;
    out.push_back({t, static_cast<double>(non.size() - below_n) / nn, static_cast<double>(below_t) / nt});
  }
  return out;
}

double compute_eer(const TrialSet& trials) {
  double best_gap = std::numeric_limits<double>::infinity();
  double eer = 0.0;
  for (const auto& p : threshold_sweep(trials)) {
    const double gap = std::abs(p.far - p.frr);
    if (gap < best_gap) {
      best_gap = gap;
      eer = (p.far + p.frr) / 2.0;
    }
  }
  return eer;
}

double compute_min_dcf(const TrialSet& trials, double p_tar, double c_miss, double c_fa) {
  if (!(p_tar > 0.0 && p_tar < 1.0)) throw ConfigError("p_tar must lie in (0, 1)");
  if (!(c_miss >= 0.0 && c_fa >= 0.0)) throw ConfigError("detection costs must be >= 0");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : threshold_sweep(trials)) {
    best = std::min(best, c_miss * p.frr * p_tar + c_fa * p.far * (1.0 - p_tar));
  }
  return best;
}

double classification_accuracy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.rows() != labels.size()) {
    throw ConfigError("classification_accuracy: logits " + shape_string(logits.shape()) + " vs " +
                      std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const auto row = logits.row(r);
    const auto arg = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (arg == labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("cosine_similarity: length mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

TrialSet build_trials(const Tensor& embeddings, std::span<const int> labels, const TrialConfig& cfg) {
  if (embeddings.rows() != labels.size()) throw ConfigError("build_trials: embeddings and labels differ in count");
  std::vector<int> distinct(labels.begin(), labels.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) throw UsageError("build_trials needs at least 2 classes");

  using Pair = std::pair<std::size_t, std::size_t>;
  std::vector<Pair> tar, non;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i + 1; j < labels.size(); ++j) (labels[i] == labels[j] ? tar : non).emplace_back(i, j);
  }
  if (tar.empty()) throw UsageError("build_trials: no class has two samples, so there are no target trials");

  Rng rng(cfg.seed);
  auto cap = [&](std::vector<Pair>& pairs, std::size_t limit) {
    if (pairs.size() <= limit) return;
    std::vector<Pair> kept;
    kept.reserve(limit);
    std::sample(pairs.begin(), pairs.end(), std::back_inserter(kept), limit, rng.engine());
    pairs = std::move(kept);
  };
  cap(tar, cfg.max_target);
  cap(non, cfg.max_nontarget);

  TrialSet out;
  for (auto [i, j] : tar) out.target.push_back(cosine_similarity(embeddings.row(i), embeddings.row(j)));
  for (auto [i, j] : non) out.nontarget.push_back(cosine_similarity(embeddings.row(i), embeddings.row(j)));
  return out;
}

std::string to_string(MatchingProtocol protocol) { return protocol == MatchingProtocol::Hard ? "hard" : "original"; }

double cross_modal_matching(const Tensor& anchors, const Tensor& candidates, std::span<const int> labels,
                            std::span<const int> class_groups, MatchingProtocol protocol, std::size_t num_trials,
                            std::uint64_t seed) {
  if (anchors.rows() != labels.size() || candidates.rows() != labels.size()) {
    throw ConfigError("cross_modal_matching: embeddings and labels differ in count");
  }
  if (num_trials == 0) throw ConfigError("cross_modal_matching needs at least one trial");
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
  if (members.size() < 2) throw UsageError("cross-modal matching needs at least 2 classes");

  auto group_of = [&](int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= class_groups.size()) {
      throw UsageError("hard matching needs a nuisance group for label " + std::to_string(label));
    }
    return class_groups[static_cast<std::size_t>(label)];
  };
  // Distractor labels per anchor label.
  std::map<int, std::vector<int>> rivals;
  for (const auto& [y, idx] : members) {
    auto& r = rivals[y];
    for (const auto& [z, zidx] : members) {
      if (z == y) continue;
      if (protocol == MatchingProtocol::Hard && group_of(z) != group_of(y)) continue;
      r.push_back(z);
    }
    // A group with a single class has no same-group distractor; fall back to any class.
    if (r.empty()) {
      for (const auto& [z, zidx] : members) {
        if (z != y) r.push_back(z);
      }
    }
  }

  double score = 0.0;
  for (std::size_t t = 0; t < num_trials; ++t) {
    Rng rng(derive_seed(seed, "matching-trial", t));
    const std::size_t a = rng.index(labels.size());
    const int y = labels[a];
    const auto& same = members.at(y);
    std::size_t pos = a;
    if (same.size() > 1) {
      do {
        pos = same[rng.index(same.size())];
      } while (pos == a);
    }
    const auto& r = rivals.at(y);
    const auto& other = members.at(r[rng.index(r.size())]);
    const std::size_t neg = other[rng.index(other.size())];
    const double sp = cosine_similarity(anchors.row(a), candidates.row(pos));
    const double sn = cosine_similarity(anchors.row(a), candidates.row(neg));
    score += sp > sn ? 1.0 : (sp == sn ? 0.5 : 0.0);
  }
  return score / static_cast<double>(num_trials);
}

MatchingScores matching_both_directions(const Tensor& student, const Tensor& teacher, std::span<const int> labels,
                                        std::span<const int> class_groups, MatchingProtocol protocol,
                                        std::size_t num_trials, std::uint64_t seed) {
  MatchingScores m;
  m.student_to_teacher = cross_modal_matching(student, teacher, labels, class_groups, protocol, num_trials,
                                              derive_seed(seed, "student-anchor"));
  m.teacher_to_student = cross_modal_matching(teacher, student, labels, class_groups, protocol, num_trials,
                                              derive_seed(seed, "teacher-anchor"));
  return m;
}

std::vector<std::pair<std::string, double>> MetricsReport::scalar_metrics() const {
  std::vector<std::pair<std::string, double>> out{
      {"eer", eer},
      {"min_dcf", min_dcf},
      {"accuracy", accuracy},
      {"val_accuracy", val_accuracy},
      {"val_eer", val_eer},
      {"match_af_original", matching_original.student_to_teacher},
      {"match_fa_original", matching_original.teacher_to_student},
      {"match_af_hard", matching_hard.student_to_teacher},
      {"match_fa_hard", matching_hard.teacher_to_student},
  };
  for (const auto& [db, v] : noisy_eer) out.emplace_back("eer_noisy_" + format_double(db) + "db", v);
  return out;
}

namespace {

json to_json(const MatchingScores& m) {
  return json{{"student_to_teacher", m.student_to_teacher}, {"teacher_to_student", m.teacher_to_student}};
}

MatchingScores matching_from_json(const json& j) {
  return {j.at("student_to_teacher").get<double>(), j.at("teacher_to_student").get<double>()};
}

}  // namespace

json to_json(const MetricsReport& r) {
  json noisy = json::array();
  for (const auto& [db, v] : r.noisy_eer) noisy.push_back({{"delta_db", db}, {"eer", v}});
  return json{{"run_id", r.run_id},
              {"mode", r.mode},
              {"seed", r.seed},
              {"eer", r.eer},
              {"min_dcf", r.min_dcf},
              {"accuracy", r.accuracy},
              {"val_accuracy", r.val_accuracy},
              {"val_eer", r.val_eer},
              {"matching_original", to_json(r.matching_original)},
              {"matching_hard", to_json(r.matching_hard)},
              {"noisy_eer", noisy},
              {"loss_trace", r.loss_trace},
              {"config", r.config}};
}

MetricsReport metrics_report_from_json(const json& j) {
  try {
    MetricsReport r;
    r.run_id = j.at("run_id").get<std::string>();
    r.mode = j.at("mode").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.eer = j.at("eer").get<double>();
    r.min_dcf = j.at("min_dcf").get<double>();
    r.accuracy = j.at("accuracy").get<double>();
    r.val_accuracy = j.at("val_accuracy").get<double>();
    r.val_eer = j.at("val_eer").get<double>();
    r.matching_original = matching_from_json(j.at("matching_original"));
    r.matching_hard = matching_from_json(j.at("matching_hard"));
    for (const auto& e : j.at("noisy_eer")) r.noisy_eer[e.at("delta_db").get<double>()] = e.at("eer").get<double>();
    r.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    r.config = j.value("config", json::object());
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed metrics report: ") + e.what());
  }
}

std::string metrics_csv(std::span<const MetricsReport> reports) {
  std::ostringstream out;
  out << "run_id,mode,metric,value,seed\n";
  for (const auto& r : reports) {
    for (const auto& [name, value] : r.scalar_metrics()) {
      out << r.run_id << ',' << r.mode << ',' << name << ',' << format_double(value) << ',' << r.seed << '\n';
    }
  }
  return out.str();
}

}  // namespace xmd
