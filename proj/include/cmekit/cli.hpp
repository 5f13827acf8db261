#pragma once

// Experiment orchestration behind the `cmekit` command line tool. Every
// command reads an io::Config, writes its primary output (CSV, JSON or an
// estimator file) to `out`, and timing diagnostics to `log`. Return value is
// the process exit code: 0 success / all checks pass, 1 runtime failure,
// 2 validation failure.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cmekit/embedding.hpp"
#include "cmekit/error.hpp"
#include "cmekit/estimator.hpp"
#include "cmekit/io.hpp"
#include "cmekit/kernel.hpp"
#include "cmekit/models.hpp"
#include "cmekit/random.hpp"
#include "cmekit/spectral.hpp"

namespace cmekit::cli {

struct Options {
  std::optional<std::uint64_t> seed;  // overrides [data] seed
  std::optional<std::string> out;     // overrides the command's output path
  bool timing = false;                // add wall_time_ms to JSON/CSV outputs
};

enum ExitCode : int { kSuccess = 0, kRuntimeFailure = 1, kValidationFailure = 2 };

namespace detail {

using Clock = std::chrono::steady_clock;

inline double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

/// Resolves a path from the config relative to the config file's directory.
inline std::string resolve_path(const io::Config& cfg, const std::string& value) {
  const std::filesystem::path p(value);
  if (p.is_absolute()) return value;
  const auto base = std::filesystem::path(cfg.source()).parent_path();
  return (base / p).string();
}

inline std::uint64_t seed_of(const io::Config& cfg, const Options& opt) {
  return opt.seed ? *opt.seed : cfg.u64("data.seed", 0);
}

inline KernelSpec kernel_from(const io::Config& cfg) {
  const auto type = cfg.str("kernel.type", "gaussian");
  if (type == "gaussian") return KernelSpec::gaussian(cfg.positive("kernel.bandwidth", 1.0));
  if (type == "laplacian") return KernelSpec::laplacian(cfg.positive("kernel.scale", 1.0));
  cfg.fail(cfg.line_of("kernel.type"), "field 'kernel.type': expected gaussian or laplacian, got '" + type + "'");
}

inline nlohmann::ordered_json kernel_json(const KernelSpec& k) {
  nlohmann::ordered_json j;
  if (const auto* g = std::get_if<GaussianKernel>(&k.variant())) {
    j["type"] = "gaussian";
    j["bandwidth"] = g->bandwidth;
  } else if (const auto* l = std::get_if<LaplacianKernel>(&k.variant())) {
    j["type"] = "laplacian";
    j["scale"] = l->scale;
  } else {
    j["type"] = "table";
  }
  return j;
}

inline SpectralFilter filter_from(const io::Config& cfg) {
  const auto type = cfg.str("estimator.filter", "tikhonov");
  if (type == "tikhonov") return Tikhonov{};
  if (type == "cutoff") return Cutoff{};
  if (type == "landweber")
    return Landweber{static_cast<int>(cfg.integer("estimator.landweber_steps", 1, 100)),
                     cfg.positive("estimator.landweber_step_size", 1.0)};
  cfg.fail(cfg.line_of("estimator.filter"),
           "field 'estimator.filter': expected tikhonov, cutoff or landweber, got '" + type + "'");
}

inline CmeEstimator fit(const io::Config& cfg, const PairedSample& sample, const KernelSpec& k,
                        const SpectralFilter& f, double lambda) {
  const auto solver = cfg.str("estimator.solver", "closed-form");
  if (solver != "closed-form" && solver != "spectral")
    cfg.fail(cfg.line_of("estimator.solver"), "field 'estimator.solver': expected closed-form or spectral");
  if (std::holds_alternative<Tikhonov>(f) && solver == "closed-form") return fit_tikhonov_closed_form(sample, k, lambda);
  return fit_cme(sample, k, f, lambda);
}

enum class Source { kFiniteModel, kOu, kDoubleWell, kPairedSample };

inline Source source_of(const io::Config& cfg) {
  if (!cfg.has("data.source")) cfg.missing("data.source");
  const auto s = cfg.str("data.source");
  if (s == "finite-model") return Source::kFiniteModel;
  if (s == "ou") return Source::kOu;
  if (s == "double-well") return Source::kDoubleWell;
  if (s == "paired-sample") return Source::kPairedSample;
  cfg.fail(cfg.line_of("data.source"),
           "field 'data.source': expected finite-model, ou, double-well or paired-sample, got '" + s + "'");
}

inline FiniteMarkovModel model_from(const io::Config& cfg) {
  if (!cfg.has("data.file")) cfg.missing("data.file");
  return io::load_model(resolve_path(cfg, cfg.str("data.file")));
}

/// Draws (or loads) the paired sample described by [data]; `n` overrides
/// data.n when given.
inline PairedSample sample_from(const io::Config& cfg, const Options& opt, std::optional<Eigen::Index> n = {}) {
  const auto source = source_of(cfg);
  const auto seed = seed_of(cfg, opt);
  auto count = [&] { return n ? *n : static_cast<Eigen::Index>(cfg.integer("data.n", 1)); };
  switch (source) {
    case Source::kFiniteModel:
      return sample_pairs(model_from(cfg), count(), seed);
    case Source::kOu:
      return ou_sample_pairs(cfg.positive("data.theta"), cfg.positive("data.tau"), count(), seed);
    case Source::kDoubleWell:
      return double_well_pairs(cfg.positive("data.beta"), cfg.positive("data.dt"),
                               static_cast<int>(cfg.integer("data.steps_per_pair", 1)), count(), seed);
    case Source::kPairedSample:
      if (!cfg.has("data.file")) cfg.missing("data.file");
      return io::load_sample(resolve_path(cfg, cfg.str("data.file")));
  }
  return {};
}

inline const std::set<std::string> kCommonKeys = {
    "kernel.type",      "kernel.bandwidth",   "kernel.scale",        "estimator.filter",
    "estimator.lambda", "estimator.solver",   "estimator.landweber_steps", "estimator.landweber_step_size",
    "data.source",      "data.file",          "data.theta",          "data.tau",
    "data.beta",        "data.dt",            "data.steps_per_pair", "data.n",
    "data.seed"};

inline std::set<std::string> keys_with(std::initializer_list<const char*> extra) {
  std::set<std::string> out = kCommonKeys;
  for (const char* k : extra) out.insert(k);
  return out;
}

/// Writes `content` to the configured output path, or to `out` when none.
inline void emit(const std::string& content, const std::optional<std::string>& path, std::ostream& out) {
  if (path) io::write_file(*path, content);
  else out << content;
}

inline std::optional<std::string> output_path(const io::Config& cfg, const Options& opt, const char* key) {
  if (opt.out) return opt.out;
  if (cfg.has(key)) return resolve_path(cfg, cfg.str(key));
  return std::nullopt;
}

inline std::string json_text(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace detail

// ---------------------------------------------------------------------------

/// Fits an estimator, writes the estimator file, and prints JSON metrics.
inline int cmd_estimate(const io::Config& cfg, const Options& opt, std::ostream& out, std::ostream& log) {
  cfg.check_keys(detail::keys_with({"output.estimator", "output.metrics"}));
  const auto start = detail::Clock::now();
  const auto k = detail::kernel_from(cfg);
  const auto f = detail::filter_from(cfg);
  const double lambda = cfg.positive("estimator.lambda");
  const auto sample = detail::sample_from(cfg, opt);

  std::optional<std::string> est_path = opt.out;
  if (!est_path && cfg.has("output.estimator")) est_path = detail::resolve_path(cfg, cfg.str("output.estimator"));
  if (!est_path) throw ValidationError(cfg.source() + ": estimate needs --out or [output] estimator");

  const auto est = detail::fit(cfg, sample, k, f, lambda);
  io::save_estimator(*est_path, est);

  nlohmann::ordered_json metrics;
  metrics["n"] = sample.size();
  metrics["lambda"] = lambda;
  metrics["filter"] = filter_name(f);
  metrics["kernel"] = detail::kernel_json(k);
  metrics["empirical_risk"] = empirical_risk(est, sample);
  metrics["regularized_empirical_risk"] = regularized_empirical_risk(est, sample);
  metrics["hs_norm_sq"] = hs_norm_sq(est);
  const double ms = detail::elapsed_ms(start);
  if (opt.timing) metrics["wall_time_ms"] = ms;
  log << "estimate: wall_time_ms=" << ms << '\n';

  std::optional<std::string> metrics_path;
  if (cfg.has("output.metrics")) metrics_path = detail::resolve_path(cfg, cfg.str("output.metrics"));
  detail::emit(detail::json_text(metrics), metrics_path, out);
  return kSuccess;
}

/// Kernel-EDMD eigenvalues as CSV: index,re,im,modulus,residual.
inline int cmd_edmd(const io::Config& cfg, const Options& opt, std::ostream& out, std::ostream& log) {
  cfg.check_keys(detail::keys_with({"edmd.r", "output.path"}));
  const auto start = detail::Clock::now();
  const auto k = detail::kernel_from(cfg);
  const double lambda = cfg.positive("estimator.lambda");
  const auto r = cfg.integer("edmd.r", 1, 1);
  const auto sample = detail::sample_from(cfg, opt);
  if (r > sample.size()) throw ValidationError("r out of range: r = " + std::to_string(r) + " > n = " + std::to_string(sample.size()));

  const auto res = edmd_eigen(sample, k, lambda, static_cast<Eigen::Index>(r));
  std::ostringstream csv;
  csv << "index,re,im,modulus,residual\n";
  for (Eigen::Index j = 0; j < res.rank(); ++j) {
    const auto mu = res.eigenvalues[j];
    csv << j << ',' << io::format_double(mu.real()) << ',' << io::format_double(mu.imag()) << ','
        << io::format_double(std::abs(mu)) << ',' << io::format_double(res.residuals[j]) << '\n';
  }
  log << "edmd: n=" << sample.size() << " wall_time_ms=" << detail::elapsed_ms(start) << '\n';
  detail::emit(csv.str(), detail::output_path(cfg, opt, "output.path"), out);
  return kSuccess;
}

/// Biased and unbiased MMD^2 between two point files.
inline int cmd_mmd(const io::Config& cfg, const Options& opt, std::ostream& out, std::ostream& log) {
  cfg.check_keys({"kernel.type", "kernel.bandwidth", "kernel.scale", "mmd.sample_p", "mmd.sample_q", "mmd.unbiased",
                  "output.path"});
  const auto start = detail::Clock::now();
  const auto k = detail::kernel_from(cfg);
  if (!cfg.has("mmd.sample_p")) cfg.missing("mmd.sample_p");
  if (!cfg.has("mmd.sample_q")) cfg.missing("mmd.sample_q");
  const auto p = io::load_points(detail::resolve_path(cfg, cfg.str("mmd.sample_p")));
  const auto q = io::load_points(detail::resolve_path(cfg, cfg.str("mmd.sample_q")));
  const auto unbiased_mode = cfg.str("mmd.unbiased", "true");
  if (unbiased_mode != "true" && unbiased_mode != "false")
    cfg.fail(cfg.line_of("mmd.unbiased"), "field 'mmd.unbiased': expected true or false");
  const bool want_unbiased = unbiased_mode == "true";
  if (want_unbiased && (p.rows() < 2 || q.rows() < 2))
    throw ValidationError("mmd: unbiased estimator requires n >= 2 and m >= 2 (set [mmd] unbiased = false)");

  nlohmann::ordered_json j;
  j["n"] = p.rows();
  j["m"] = q.rows();
  j["kernel"] = detail::kernel_json(k);
  j["biased"] = mmd_sq_biased(k, p, q);
  j["unbiased"] = want_unbiased ? nlohmann::ordered_json(mmd_sq_unbiased(k, p, q)) : nlohmann::ordered_json(nullptr);
  const double ms = detail::elapsed_ms(start);
  if (opt.timing) j["wall_time_ms"] = ms;
  log << "mmd: wall_time_ms=" << ms << '\n';
  detail::emit(detail::json_text(j), detail::output_path(cfg, opt, "output.path"), out);
  return kSuccess;
}

// ---------------------------------------------------------------------------
// oracle-verify

struct CheckRow {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double tolerance = 0.0;
  std::string status;  // PASS, FAIL or INFO
};

namespace detail {

inline CheckRow leq_row(std::string name, double lhs, double rhs, double tol) {
  return {std::move(name), lhs, rhs, tol, lhs <= rhs + tol ? "PASS" : "FAIL"};
}

inline CheckRow eq_row(std::string name, double lhs, double rhs, double tol) {
  return {std::move(name), lhs, rhs, tol, std::abs(lhs - rhs) <= tol ? "PASS" : "FAIL"};
}

/// True when all pi-weighted row differences of P - P' are multiples of a
/// single vector, the case in which the MMD identity holds with equality.
inline bool constant_direction(const FiniteMarkovModel& model) {
  const Eigen::MatrixXd diff = model.transition - *model.transition_alt;
  Eigen::MatrixXd rows(model.size(), model.size());
  Eigen::Index used = 0;
  for (Eigen::Index i = 0; i < model.size(); ++i)
    if (model.marginal[i] > 0.0) rows.row(used++) = diff.row(i);
  if (used == 0) return true;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(rows.topRows(used));
  const auto& s = svd.singularValues();
  return s.size() < 2 || s[0] == 0.0 || s[1] <= 1e-12 * s[0];
}

inline Eigen::MatrixXd random_stochastic(CounterRng& rng, Eigen::Index m) {
  Eigen::MatrixXd p(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) p(i, j) = rng.uniform() + 1e-3;
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

/// Random model on m line states with strictly positive marginal, random
/// transition and comparison matrices.
inline FiniteMarkovModel random_model(CounterRng& rng, Eigen::Index m) {
  FiniteMarkovModel model;
  model.states = line_states(m);
  model.marginal.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) model.marginal[i] = rng.uniform() + 0.05;
  model.marginal /= model.marginal.sum();
  model.transition = random_stochastic(rng, m);
  model.transition_alt = random_stochastic(rng, m);
  return model;
}

/// Every finite-model identity and inequality on one model.
inline void verify_model(const FiniteMarkovModel& model, const KernelSpec& k, const SpectralFilter& f, double lambda,
                         Eigen::Index n, std::uint64_t seed, const std::string& prefix, std::vector<CheckRow>& rows) {
  CounterRng rng(seed, 1);
  const auto m = model.size();
  const auto exact = exact_operator_values(model, k);

  {
    const auto sample = sample_pairs(model, n, seed);
    const auto est = std::holds_alternative<Tikhonov>(f) ? fit_tikhonov_closed_form(sample, k, lambda)
                                                         : fit_cme(sample, k, f, lambda);
    const double op = op_norm_diff(estimator_values(est, model, k), exact, model, k);
    rows.push_back(leq_row(prefix + "bound:op_norm_sq<=excess_risk", op * op, exact_excess_risk(est, model, k), 1e-9));
  }
  {
    Eigen::MatrixXd target = model.transition;
    Eigen::RowVectorXd h(m);
    for (Eigen::Index j = 0; j < m; ++j) h[j] = rng.uniform() - 0.5;
    target.rowwise() += h;
    const auto est = state_supported_estimator(model, k, target);
    const double op = op_norm_diff(estimator_values(est, model, k), exact, model, k);
    rows.push_back(eq_row(prefix + "sharpness:op_norm_sq==excess_risk", op * op, exact_excess_risk(est, model, k), 1e-9));
  }
  {
    const auto est = state_supported_estimator(model, k, model.transition);
    rows.push_back(leq_row(prefix + "well_specified:op_norm", op_norm_diff(estimator_values(est, model, k), exact, model, k),
                           0.0, 1e-10));
    rows.push_back(leq_row(prefix + "well_specified:excess_risk", exact_excess_risk(est, model, k), 0.0, 1e-10));
  }
  if (model.transition_alt) {
    const double op = op_norm_diff(exact, exact_operator_values_alt(model, k), model, k);
    const double integral = exact_mmd_integral(model, k);
    rows.push_back(leq_row(prefix + "mmd:op_norm_sq<=mmd_integral", op * op, integral, 1e-10));
    if (constant_direction(model)) {
      rows.push_back(eq_row(prefix + "mmd:equality", op * op, integral, 1e-10));
    } else {
      rows.push_back({prefix + "mmd:equality", op * op, integral, 1e-10, "INFO"});
    }
  }
  {
    RegressionFunctionRep fr{Eigen::MatrixXd(m, m)};
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) fr.coeffs(i, j) = 2.0 * rng.uniform() - 1.0;
    const Eigen::MatrixXd ke = gram(k, model.states).entries();
    double distance = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::RowVectorXd d = fr.coeffs.row(i) - model.transition.row(i);
      distance += model.marginal[i] * d.dot(ke * d.transpose());
    }
    const double rhs = distance + exact_risk(exact_regression_function(model), model, k);
    rows.push_back(eq_row(prefix + "risk_decomposition", exact_risk(fr, model, k), rhs, 1e-10));
  }
  {
    const Point anchor = model.states.row(0);
    const auto ons = generalized_cov_ons_check(model, k, anchor, m);
    const double big_m = generalized_cov_constant(model, k, anchor);
    double off = 0.0;
    double diag = 0.0;
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) {
        if (i == j) diag = std::max(diag, std::abs(ons(i, i) - big_m));
        else off = std::max(off, std::abs(ons(i, j)));
      }
    rows.push_back(leq_row(prefix + "noncompact:offdiag", off, 0.0, 1e-9 * big_m));
    rows.push_back(leq_row(prefix + "noncompact:diag==M", diag, 0.0, 1e-9 * big_m));
  }
}

}  // namespace detail

inline std::vector<CheckRow> oracle_checks(const FiniteMarkovModel& model, const KernelSpec& k, const SpectralFilter& f,
                                           double lambda, Eigen::Index n, std::uint64_t seed, int random_instances) {
  std::vector<CheckRow> rows;
  detail::verify_model(model, k, f, lambda, n, seed, "", rows);
  CounterRng rng(seed, 2);
  for (int i = 0; i < random_instances; ++i) {
    auto child = rng.split(static_cast<std::uint64_t>(i));
    const auto m = 2 + static_cast<Eigen::Index>(child.next_u64() % 5);
    const auto random = detail::random_model(child, m);
    detail::verify_model(random, k, f, lambda, n, child.next_u64(), "random" + std::to_string(i) + ":", rows);
  }
  return rows;
}

inline int cmd_oracle_verify(const io::Config& cfg, const Options& opt, std::ostream& out, std::ostream& log) {
  cfg.check_keys(detail::keys_with({"verify.random_instances", "output.path"}));
  const auto start = detail::Clock::now();
  if (detail::source_of(cfg) != detail::Source::kFiniteModel)
    throw ValidationError(cfg.source() + ": oracle-verify needs [data] source = finite-model");
  const auto model = detail::model_from(cfg);
  const auto k = detail::kernel_from(cfg);
  const auto f = detail::filter_from(cfg);
  const double lambda = cfg.positive("estimator.lambda", 1e-3);
  const auto n = static_cast<Eigen::Index>(cfg.integer("data.n", 1, 500));
  const auto instances = static_cast<int>(cfg.integer("verify.random_instances", 0, 20));
  const auto rows = oracle_checks(model, k, f, lambda, n, detail::seed_of(cfg, opt), instances);

  std::ostringstream csv;
  csv << "check,lhs,rhs,tolerance,status\n";
  bool ok = true;
  for (const auto& row : rows) {
    csv << row.name << ',' << io::format_double(row.lhs) << ',' << io::format_double(row.rhs) << ','
        << io::format_double(row.tolerance) << ',' << row.status << '\n';
    ok = ok && row.status != "FAIL";
  }
  log << "oracle-verify: checks=" << rows.size() << " wall_time_ms=" << detail::elapsed_ms(start) << '\n';
  detail::emit(csv.str(), detail::output_path(cfg, opt, "output.path"), out);
  return ok ? kSuccess : kRuntimeFailure;
}

// ---------------------------------------------------------------------------
// convergence

inline int cmd_convergence(const io::Config& cfg, const Options& opt, std::ostream& out, std::ostream& log) {
  cfg.check_keys(detail::keys_with(
      {"convergence.n_grid", "convergence.lambda_c", "convergence.lambda_p", "convergence.r", "output.path"}));
  const auto k = detail::kernel_from(cfg);
  const auto f = detail::filter_from(cfg);
  const auto source = detail::source_of(cfg);
  if (source != detail::Source::kFiniteModel && source != detail::Source::kOu)
    throw ValidationError(cfg.source() + ": convergence supports [data] source = finite-model or ou");
  if (!cfg.has("convergence.n_grid")) cfg.missing("convergence.n_grid");
  const auto grid = cfg.integer_list("convergence.n_grid");
  const int grid_line = cfg.line_of("convergence.n_grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 1) cfg.fail(grid_line, "field 'convergence.n_grid': entries must be >= 1");
    if (i > 0 && grid[i] <= grid[i - 1]) cfg.fail(grid_line, "field 'convergence.n_grid': must be strictly ascending");
  }
  const double c = cfg.positive("convergence.lambda_c", 1.0);
  const double p = cfg.real("convergence.lambda_p", 0.25);
  if (!(p > 0.0 && p < 1.0)) cfg.fail(cfg.line_of("convergence.lambda_p"), "field 'convergence.lambda_p': must lie in (0, 1)");
  const auto r = static_cast<Eigen::Index>(cfg.integer("convergence.r", 1, 4));

  std::optional<FiniteMarkovModel> model;
  if (source == detail::Source::kFiniteModel) model = detail::model_from(cfg);

  std::ostringstream csv;
  csv << "n,lambda,op_norm_diff,exact_excess_risk,eig_errors" << (opt.timing ? ",wall_time_ms" : "") << '\n';
  for (const auto n : grid) {
    const auto start = detail::Clock::now();
    const double lambda = c * std::pow(static_cast<double>(n), -p);
    const auto sample = detail::sample_from(cfg, opt, static_cast<Eigen::Index>(n));
    csv << n << ',' << io::format_double(lambda) << ',';
    if (model) {
      const auto est = detail::fit(cfg, sample, k, f, lambda);
      const double op = op_norm_diff(estimator_values(est, *model, k), exact_operator_values(*model, k), *model, k);
      csv << io::format_double(op) << ',' << io::format_double(exact_excess_risk(est, *model, k)) << ',';
    } else {
      const double theta = cfg.positive("data.theta");
      const double tau = cfg.positive("data.tau");
      const auto res = edmd_eigen(sample, k, lambda, std::min<Eigen::Index>(r, sample.size()));
      csv << ",,";
      for (Eigen::Index j = 0; j < res.rank(); ++j) {
        const double truth = std::exp(-static_cast<double>(j) * theta * tau);
        csv << (j > 0 ? ";" : "") << io::format_double(std::abs(res.eigenvalues[j] - truth));
      }
    }
    const double ms = detail::elapsed_ms(start);
    if (opt.timing) csv << ',' << io::format_short(ms);
    csv << '\n';
    log << "convergence: n=" << n << " wall_time_ms=" << ms << '\n';
  }
  detail::emit(csv.str(), detail::output_path(cfg, opt, "output.path"), out);
  return kSuccess;
}

// ---------------------------------------------------------------------------

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"estimate", "edmd", "mmd", "oracle-verify", "convergence"};
  return names;
}

/// Runs one command, mapping exceptions onto the exit-code contract.
inline int run(const std::string& command, const io::Config& cfg, const Options& opt, std::ostream& out,
               std::ostream& err) {
  try {
    if (command == "estimate") return cmd_estimate(cfg, opt, out, err);
    if (command == "edmd") return cmd_edmd(cfg, opt, out, err);
    if (command == "mmd") return cmd_mmd(cfg, opt, out, err);
    if (command == "oracle-verify") return cmd_oracle_verify(cfg, opt, out, err);
    if (command == "convergence") return cmd_convergence(cfg, opt, out, err);
    err << "error: unknown command '" << command << "'\n";
    return kValidationFailure;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kValidationFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}

inline int run_file(const std::string& command, const std::string& config_path, const Options& opt, std::ostream& out,
                    std::ostream& err) {
  try {
    return run(command, io::Config::load(config_path), opt, out, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kValidationFailure;
  }
}

}  // namespace cmekit::cli
