// grasspool: subspace pooling of ordered feature sequences, with Grassmann
// kernel classification and diagnostic subcommands.
//
// Exit codes: 0 success, 1 flag/file/config errors, 2 numerical failures,
// 3 gradient-check tolerance failure.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#include "grasspool/experiment.hpp"
#include "grasspool/grp.hpp"
#include "grasspool/io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitToleranceFail = 3;

struct PoolArgs {
  std::string input;
  std::string format = "csv";
  int rank = 2;
  double eta = 0.1;
  double lambda = 10.0;
  int max_iters = 100;
  std::string init = "pca";
  std::uint64_t seed = 0;
  bool incremental = false;
  std::string out;
};

int run_pool(const PoolArgs& args) {
  const grasspool::FeatureSequence x =
      grasspool::load_sequence(args.input, grasspool::parse_format(args.format));

  grasspool::GrpParams params;
  params.p = args.rank;
  params.eta = args.eta;
  params.lambda = args.lambda;
  params.cg.max_iters = args.max_iters;
  params.seed = args.seed;
  if (args.init == "pca") {
    params.init = grasspool::GrpInit::Pca;
  } else if (args.init == "random") {
    params.init = grasspool::GrpInit::RandomSeeded;
  } else {
    throw grasspool::ParseError("--init must be pca or random");
  }
  params.validate(x.dim());

  const grasspool::SubspaceDescriptor desc =
      args.incremental ? grasspool::pool_grp_incremental(x, params)
                       : grasspool::pool_grp(x, params);

  const std::string out_path = args.out.empty() ? args.input + ".grpu" : args.out;
  grasspool::save_descriptor(desc.point, desc.final_objective,
                             desc.constraints_satisfied_fraction, out_path);
  for (const std::string& w : desc.warnings) {
    std::fprintf(stderr, "warning: %s\n", w.c_str());
  }
  std::printf("objective=%s iters=%d satisfied=%.6f\n",
              grasspool::detail::format_double(desc.final_objective).c_str(),
              desc.iterations_run, desc.constraints_satisfied_fraction);
  return kExitOk;
}

struct ExperimentArgs {
  std::string synth = "3,30,40,64,monotone-plane,0.05,0";
  std::string sweep = "eta";
  std::string values = "0.1";
  std::string kernel = "rbf-proj";
  double beta = 1.0;
  double svm_c = 1.0;
  int folds = 3;
  std::string report = "report.txt";
  int rank = 2;
  double eta = 0.1;
  double lambda = 10.0;
  int max_iters = 100;
};

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

grasspool::SyntheticSpec parse_synth(const std::string& blob) {
  const std::vector<std::string> parts = split_csv(blob);
  if (parts.size() != 7) {
    throw grasspool::ParseError(
        "--synth expects CLASSES,PER,N,D,DYNAMICS,SIGMA,SEED");
  }
  grasspool::SyntheticSpec spec;
  try {
    spec.classes = std::stoi(parts[0]);
    spec.sequences_per_class = std::stoi(parts[1]);
    spec.n = std::stoll(parts[2]);
    spec.d = std::stoll(parts[3]);
    spec.dynamics = grasspool::parse_dynamics(parts[4]);
    spec.noise_sigma = std::stod(parts[5]);
    spec.seed = std::stoull(parts[6]);
  } catch (const grasspool::Error&) {
    throw;
  } catch (const std::exception&) {
    throw grasspool::ParseError("--synth has a malformed field in '" + blob +
                                "'");
  }
  return spec;
}

int run_experiment_cmd(const ExperimentArgs& args) {
  grasspool::ExperimentConfig config;
  config.synth = parse_synth(args.synth);
  config.sweep = args.sweep;
  config.values = split_csv(args.values);
  config.kernel.kind = grasspool::parse_kernel_kind(args.kernel);
  config.kernel.beta = args.beta;
  config.svm_c = args.svm_c;
  config.folds = args.folds;
  config.grp.p = args.rank;
  config.grp.eta = args.eta;
  config.grp.lambda = args.lambda;
  config.grp.cg.max_iters = args.max_iters;

  const auto t0 = std::chrono::steady_clock::now();
  const grasspool::ExperimentReport report = grasspool::run_experiment(config);
  const double total_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  grasspool::write_report(report, args.report);
  for (const grasspool::ConfigResult& row : report.rows) {
    std::printf("value=%s method=%s accuracy=%.4f map=%.4f runtime=%.2fs\n",
                row.sweep_value.c_str(), row.method.c_str(), row.accuracy,
                row.mean_ap, row.runtime_seconds);
  }
  std::printf("report written to %s (plot data: %s.csv), total %.2fs\n",
              args.report.c_str(), args.report.c_str(), total_s);
  return kExitOk;
}

struct GradcheckArgs {
  int n = 20;
  int d = 30;
  int rank = 3;
  int trials = 10;
  std::uint64_t seed = 0;
};

int run_gradcheck(const GradcheckArgs& args) {
  if (args.n < 2 || args.d < 1 || args.rank < 1 || args.rank > args.d ||
      args.trials < 1) {
    throw grasspool::Error(
        "gradcheck: need n >= 2, d >= 1, 1 <= rank <= d, trials >= 1");
  }
  const bool corrupt = std::getenv("GRASSPOOL_GRADCHECK_CORRUPT") != nullptr;
  constexpr double kFdTol = 1e-5;
  constexpr double kRouteTol = 1e-11;
  constexpr double kKinkSlack = 1e-3;

  double fd_worst = 0.0;
  double route_worst = 0.0;
  std::mt19937_64 rng(args.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (int trial = 0; trial < args.trials; ++trial) {
    grasspool::GrpParams params;
    params.p = args.rank;
    params.eta = 0.1;
    params.lambda = 10.0;

    Eigen::MatrixXd frames(args.n, args.d);
    grasspool::StiefelPoint u =
        grasspool::detail::random_stiefel(args.d, args.rank, rng());
    // resample until every pair sits clear of the hinge kink
    for (int attempt = 0; attempt < 200; ++attempt) {
      for (Eigen::Index i = 0; i < frames.rows(); ++i) {
        for (Eigen::Index j = 0; j < frames.cols(); ++j) {
          frames(i, j) = gauss(rng);
        }
      }
      frames.rowwise().normalize();
      const Eigen::VectorXd e =
          (frames * u.matrix()).rowwise().squaredNorm();
      bool clear = true;
      for (Eigen::Index i = 0; i < e.size() && clear; ++i) {
        for (Eigen::Index j = i + 1; j < e.size() && clear; ++j) {
          if (std::abs(e(i) - e(j) + params.eta) < kKinkSlack) clear = false;
        }
      }
      if (clear) break;
    }
    const grasspool::FeatureSequence x(frames, /*is_normalized=*/true);

    Eigen::MatrixXd egrad = grasspool::grp_gradient_fast(u, x, params);
    if (corrupt) egrad(0, 0) += 1e-3;
    route_worst = std::max(
        route_worst,
        (egrad - grasspool::grp_gradient_naive(u, x, params))
            .cwiseAbs()
            .maxCoeff());

    const grasspool::TangentVector riem_grad =
        grasspool::project_tangent(u, egrad);
    constexpr double h = 1e-5;
    for (int dir = 0; dir < 5; ++dir) {
      Eigen::MatrixXd raw(args.d, args.rank);
      for (Eigen::Index jj = 0; jj < raw.cols(); ++jj) {
        for (Eigen::Index ii = 0; ii < raw.rows(); ++ii) {
          raw(ii, jj) = gauss(rng);
        }
      }
      grasspool::TangentVector delta = grasspool::project_tangent(u, raw);
      delta.matrix /= delta.norm();
      const double analytic =
          riem_grad.matrix.cwiseProduct(delta.matrix).sum();
      const double fwd = grasspool::grp_objective(
          grasspool::retract(u, delta, h), x, params);
      const double bwd = grasspool::grp_objective(
          grasspool::retract(u, delta, -h), x, params);
      const double numeric = (fwd - bwd) / (2.0 * h);
      const double rel = std::abs(analytic - numeric) /
                         std::max(1.0, std::abs(numeric));
      fd_worst = std::max(fd_worst, rel);
    }
  }

  std::printf("fd_max_rel_err=%.3e route_max_abs_diff=%.3e\n", fd_worst,
              route_worst);
  if (fd_worst > kFdTol || route_worst > kRouteTol) {
    std::fprintf(stderr, "gradcheck: tolerance exceeded (fd tol %.0e, route tol %.0e)\n",
                 kFdTol, kRouteTol);
    return kExitToleranceFail;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subspace pooling of temporally ordered feature sequences"};
  app.require_subcommand(1);

  PoolArgs pool_args;
  CLI::App* pool = app.add_subcommand(
      "pool", "Pool one sequence into a subspace descriptor");
  pool->add_option("--input", pool_args.input, "sequence file")->required();
  pool->add_option("--format", pool_args.format, "csv or bin");
  pool->add_option("--rank", pool_args.rank, "subspace dimension p");
  pool->add_option("--eta", pool_args.eta, "ordering margin");
  pool->add_option("--lambda", pool_args.lambda, "hinge weight");
  pool->add_option("--max-iters", pool_args.max_iters, "CG iteration cap");
  pool->add_option("--init", pool_args.init, "pca or random");
  pool->add_option("--seed", pool_args.seed, "seed for random init");
  pool->add_flag("--incremental", pool_args.incremental,
                 "greedy one-direction-at-a-time solver");
  pool->add_option("--out", pool_args.out,
                   "descriptor output path (default: INPUT.grpu)");

  ExperimentArgs exp_args;
  CLI::App* experiment = app.add_subcommand(
      "experiment", "Sweep experiments on synthetic data with k-fold SVM");
  experiment->add_option("--synth", exp_args.synth,
                         "CLASSES,PER,N,D,DYNAMICS,SIGMA,SEED");
  experiment->add_option("--sweep", exp_args.sweep, "rank, eta or kernel");
  experiment->add_option("--values", exp_args.values, "comma-separated sweep values");
  experiment->add_option("--kernel", exp_args.kernel,
                         "rbf-proj|poly-proj|linear|bc-poly|bc-rbf");
  experiment->add_option("--beta", exp_args.beta, "kernel beta");
  experiment->add_option("--svm-c", exp_args.svm_c, "SVM regularization C");
  experiment->add_option("--folds", exp_args.folds, "cross-validation folds");
  experiment->add_option("--report", exp_args.report, "report output path");
  experiment->add_option("--rank", exp_args.rank, "base subspace dimension");
  experiment->add_option("--eta", exp_args.eta, "base ordering margin");
  experiment->add_option("--lambda", exp_args.lambda, "base hinge weight");
  experiment->add_option("--max-iters", exp_args.max_iters, "CG iteration cap");

  GradcheckArgs grad_args;
  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "Finite-difference and gradient-route diagnostics");
  gradcheck->add_option("--n", grad_args.n, "frames per instance");
  gradcheck->add_option("--d", grad_args.d, "feature dimension");
  gradcheck->add_option("--rank", grad_args.rank, "subspace dimension");
  gradcheck->add_option("--trials", grad_args.trials, "random instances");
  gradcheck->add_option("--seed", grad_args.seed, "RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (pool->parsed()) return run_pool(pool_args);
    if (experiment->parsed()) return run_experiment_cmd(exp_args);
    if (gradcheck->parsed()) return run_gradcheck(grad_args);
  } catch (const grasspool::RankDeficient& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  } catch (const grasspool::CallbackFailure& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  } catch (const grasspool::NonFinite& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  } catch (const grasspool::Error& e) {
    // parse errors, shape/bound violations, io problems, bad configs
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  }
  return kExitUsage;
}
