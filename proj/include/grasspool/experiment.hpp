#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "grasspool/errors.hpp"
#include "grasspool/grp.hpp"
#include "grasspool/io.hpp"
#include "grasspool/kernels.hpp"
#include "grasspool/svm.hpp"
#include "grasspool/synthetic.hpp"
#include "grasspool/thread_pool.hpp"

namespace grasspool {

struct ExperimentConfig {
  SyntheticSpec synth;
  std::string sweep = "eta";        // rank | eta | kernel
  std::vector<std::string> values;  // swept values, as given on the CLI
  KernelSpec kernel;
  double svm_c = 1.0;
  int folds = 3;
  GrpParams grp;

  void validate() const {
    synth.validate();
    if (synth.classes < 2) {
      throw SingleClass("experiment: need at least 2 classes");
    }
    if (sweep != "rank" && sweep != "eta" && sweep != "kernel") {
      throw Error("experiment: sweep must be rank, eta or kernel");
    }
    if (values.empty()) throw Error("experiment: no sweep values");
    if (folds < 2) throw Error("experiment: folds must be >= 2");
    if (!(svm_c > 0.0)) throw Error("experiment: svm C must be > 0");
    kernel.validate();
  }
};

struct ConfigResult {
  std::string sweep_value;
  std::string method;  // grp | control
  double accuracy = 0.0;
  double mean_ap = 0.0;
  double mean_satisfied = 0.0;
  double mean_objective = 0.0;
  double runtime_seconds = 0.0;  // stdout only; never written to files
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<ConfigResult> rows;
};

namespace detail {

// Average precision of one ranking: items sorted by descending score
// (ties broken by index), AP = mean of precision@k over relevant ranks.
inline double average_precision(const Eigen::VectorXd& scores,
                                const std::vector<bool>& relevant) {
  const Eigen::Index m = scores.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) {
                     return scores(a) > scores(b);
                   });
  double hits = 0.0, ap = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (relevant[static_cast<std::size_t>(order[rank])]) {
      hits += 1.0;
      ap += hits / static_cast<double>(rank + 1);
    }
  }
  return hits > 0.0 ? ap / hits : 0.0;
}

struct CvOutcome {
  double accuracy = 0.0;
  double mean_ap = 0.0;
};

// Deterministic k-fold cross-validation on a precomputed Gram: sample i
// goes to fold i % folds, every sample is scored exactly once as held-out.
inline CvOutcome cross_validate(const GramMatrix& full_gram,
                                const std::vector<int>& labels, double svm_c,
                                int folds) {
  const Eigen::Index m = full_gram.values.rows();
  std::vector<int> classes(labels);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  Eigen::MatrixXd heldout_scores(m, static_cast<Eigen::Index>(classes.size()));
  Eigen::Index correct = 0;

  for (int fold = 0; fold < folds; ++fold) {
    std::vector<Eigen::Index> train, test;
    for (Eigen::Index i = 0; i < m; ++i) {
      (i % folds == fold ? test : train).push_back(i);
    }
    if (test.empty() || train.empty()) continue;

    GramMatrix sub;
    sub.spec = full_gram.spec;
    sub.values.resize(static_cast<Eigen::Index>(train.size()),
                      static_cast<Eigen::Index>(train.size()));
    std::vector<int> train_labels;
    for (std::size_t a = 0; a < train.size(); ++a) {
      train_labels.push_back(labels[static_cast<std::size_t>(train[a])]);
      for (std::size_t b = 0; b < train.size(); ++b) {
        sub.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
            full_gram.values(train[a], train[b]);
      }
    }
    const SvmModel model = svm_train(sub, train_labels, svm_c);

    for (const Eigen::Index t : test) {
      Eigen::VectorXd row(static_cast<Eigen::Index>(train.size()));
      for (std::size_t a = 0; a < train.size(); ++a) {
        row(static_cast<Eigen::Index>(a)) = full_gram.values(t, train[a]);
      }
      const auto [predicted, scores] = svm_predict(model, row);
      if (predicted == labels[static_cast<std::size_t>(t)]) ++correct;
      heldout_scores.row(t) = scores.transpose();
    }
  }

  CvOutcome out;
  out.accuracy = static_cast<double>(correct) / static_cast<double>(m);
  double ap_sum = 0.0;
  for (std::size_t ci = 0; ci < classes.size(); ++ci) {
    std::vector<bool> relevant(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) {
      relevant[static_cast<std::size_t>(i)] =
          labels[static_cast<std::size_t>(i)] == classes[ci];
    }
    ap_sum += average_precision(
        heldout_scores.col(static_cast<Eigen::Index>(ci)), relevant);
  }
  out.mean_ap = ap_sum / static_cast<double>(classes.size());
  return out;
}

// Pool every sequence of the dataset under one parameter set; parallel over
// sequences with index-ordered results.
inline std::vector<SubspaceDescriptor> pool_dataset(
    const LabeledDataset& data, const GrpParams& params) {
  std::vector<std::optional<SubspaceDescriptor>> slots(data.sequences.size());
  parallel_for_indexed(data.sequences.size(), [&](std::size_t i) {
    slots[i] = pool_grp(data.sequences[i], params);
  });
  std::vector<SubspaceDescriptor> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

inline std::vector<StiefelPoint> points_of(
    const std::vector<SubspaceDescriptor>& descriptors) {
  std::vector<StiefelPoint> out;
  out.reserve(descriptors.size());
  for (const auto& d : descriptors) out.push_back(d.point);
  return out;
}

}  // namespace detail

// Run the sweep: for every swept value, pool with GRP and with the
// lambda ~ 0 control, then cross-validate both on the requested kernel.
inline ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const LabeledDataset data = generate_synthetic(config.synth);

  ExperimentReport report;
  report.config = config;

  struct PooledPair {
    std::vector<SubspaceDescriptor> grp;
    std::vector<SubspaceDescriptor> control;
    double pool_seconds = 0.0;
  };
  // descriptors depend on (p, eta) only; cache across kernel sweeps
  std::map<std::pair<Eigen::Index, double>, PooledPair> pooled;

  for (const std::string& value : config.values) {
    GrpParams params = config.grp;
    KernelSpec kernel = config.kernel;
    if (config.sweep == "rank") {
      params.p = static_cast<Eigen::Index>(std::stoll(value));
    } else if (config.sweep == "eta") {
      params.eta = std::stod(value);
    } else {
      kernel.kind = parse_kernel_kind(value);
    }

    const auto key = std::make_pair(params.p, params.eta);
    auto found = pooled.find(key);
    if (found == pooled.end()) {
      const auto t0 = std::chrono::steady_clock::now();
      GrpParams control = params;
      control.lambda = 1e-9;
      PooledPair pair;
      pair.grp = detail::pool_dataset(data, params);
      pair.control = detail::pool_dataset(data, control);
      pair.pool_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      found = pooled.emplace(key, std::move(pair)).first;
    }

    for (const bool is_control : {false, true}) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto& descriptors =
          is_control ? found->second.control : found->second.grp;
      const GramMatrix g = gram(detail::points_of(descriptors), kernel);
      const detail::CvOutcome cv =
          detail::cross_validate(g, data.labels, config.svm_c, config.folds);

      ConfigResult row;
      row.sweep_value = value;
      row.method = is_control ? "control" : "grp";
      row.accuracy = cv.accuracy;
      row.mean_ap = cv.mean_ap;
      double sat = 0.0, obj = 0.0;
      for (const auto& desc : descriptors) {
        sat += desc.constraints_satisfied_fraction;
        obj += desc.final_objective;
      }
      row.mean_satisfied = sat / static_cast<double>(descriptors.size());
      row.mean_objective = obj / static_cast<double>(descriptors.size());
      row.runtime_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count() +
          0.5 * found->second.pool_seconds;
      report.rows.push_back(std::move(row));
    }
    found->second.pool_seconds = 0.0;  // charge pooling once per cache entry
  }
  return report;
}

namespace detail {

inline std::string fixed6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace detail

// Line-oriented key=value report. Deliberately contains no wall-clock
// timings so identical flags give byte-identical files.
inline std::string render_report(const ExperimentReport& report) {
  const ExperimentConfig& c = report.config;
  std::string out;
  out += "report=grasspool-experiment\n";
  out += "synth.classes=" + std::to_string(c.synth.classes) + "\n";
  out += "synth.sequences_per_class=" +
         std::to_string(c.synth.sequences_per_class) + "\n";
  out += "synth.frames=" + std::to_string(c.synth.n) + "\n";
  out += "synth.dim=" + std::to_string(c.synth.d) + "\n";
  out += std::string("synth.dynamics=") + to_string(c.synth.dynamics) + "\n";
  out += "synth.noise_sigma=" + detail::format_double(c.synth.noise_sigma) + "\n";
  out += "synth.seed=" + std::to_string(c.synth.seed) + "\n";
  out += "sweep=" + c.sweep + "\n";
  out += std::string("kernel=") + to_string(c.kernel.kind) + "\n";
  out += "kernel.beta=" + detail::format_double(c.kernel.beta) + "\n";
  out += "kernel.degree=" + std::to_string(c.kernel.degree) + "\n";
  out += "svm_c=" + detail::format_double(c.svm_c) + "\n";
  out += "folds=" + std::to_string(c.folds) + "\n";
  out += "grp.rank=" + std::to_string(c.grp.p) + "\n";
  out += "grp.eta=" + detail::format_double(c.grp.eta) + "\n";
  out += "grp.lambda=" + detail::format_double(c.grp.lambda) + "\n";
  out += "grp.max_iters=" + std::to_string(c.grp.cg.max_iters) + "\n";

  for (std::size_t i = 0; i + 1 < report.rows.size(); i += 2) {
    const ConfigResult& grp_row = report.rows[i];
    const ConfigResult& control_row = report.rows[i + 1];
    for (const ConfigResult* row : {&grp_row, &control_row}) {
      out += "row value=" + row->sweep_value + " method=" + row->method +
             " accuracy=" + detail::fixed6(row->accuracy) +
             " map=" + detail::fixed6(row->mean_ap) +
             " satisfied=" + detail::fixed6(row->mean_satisfied) +
             " objective=" + detail::format_double(row->mean_objective) + "\n";
    }
    out += "row value=" + grp_row.sweep_value + " method=delta accuracy=" +
           detail::fixed6(grp_row.accuracy - control_row.accuracy) + "\n";
  }
  return out;
}

inline std::string render_report_csv(const ExperimentReport& report) {
  std::string out = "sweep,value,method,accuracy,map,satisfied\n";
  for (const ConfigResult& row : report.rows) {
    out += report.config.sweep + "," + row.sweep_value + "," + row.method +
           "," + detail::fixed6(row.accuracy) + "," +
           detail::fixed6(row.mean_ap) + "," +
           detail::fixed6(row.mean_satisfied) + "\n";
  }
  return out;
}

inline void write_report(const ExperimentReport& report,
                         const std::string& path) {
  detail::write_file(path, render_report(report));
  detail::write_file(path + ".csv", render_report_csv(report));
}

}  // namespace grasspool
