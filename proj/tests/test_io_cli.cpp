#include <filesystem>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cmekit/cli.hpp"
#include "cmekit/io.hpp"
#include "test_support.hpp"

namespace cmekit {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("cmekit_" + std::string(info->test_suite_name()) + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    io::write_file(path(name), text);
    return path(name);
  }

  struct Result {
    int code;
    std::string out;
    std::string err;
  };

  Result run(const std::string& command, const std::string& config, cli::Options opt = {}) const {
    const auto cfg = write("run.cfg", config);
    std::ostringstream out, err;
    const int code = cli::run_file(command, cfg, opt, out, err);
    return {code, out.str(), err.str()};
  }

  fs::path dir_;
};

FiniteMarkovModel swap_model() {
  FiniteMarkovModel model;
  model.states = line_states(2);
  model.marginal = Eigen::Vector2d(0.5, 0.5);
  model.transition = Eigen::Matrix2d::Identity();
  model.transition_alt = Eigen::Matrix2d{{0, 1}, {1, 0}};
  return model;
}

TEST(Io, DoubleFormattingRoundTrips) {
  CounterRng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, 20.0 * rng.uniform() - 10.0);
    EXPECT_EQ(*io::parse_double(io::format_double(v)), v);
  }
  EXPECT_EQ(*io::parse_double("+2.5"), 2.5);
  EXPECT_FALSE(io::parse_double("1.0x"));
  EXPECT_FALSE(io::parse_double(""));
  EXPECT_FALSE(io::parse_int("3.5"));
  EXPECT_FALSE(io::parse_u64("-1"));
}

TEST(Io, ModelFileRoundTrip) {
  CounterRng rng(2);
  const auto model = testing::random_model(rng, 4);
  const auto back = io::parse_model(io::format_model(model));
  EXPECT_EQ(back.states, model.states);
  EXPECT_EQ(back.marginal, model.marginal);
  EXPECT_EQ(back.transition, model.transition);
  EXPECT_EQ(*back.transition_alt, *model.transition_alt);
}

TEST(Io, ModelFileStationaryMarginal) {
  const auto model = io::parse_model(
      "cmekit-model 1\n# two states\nstates 2 1\n0\n1\n\nmarginal stationary\ntransition 2 2\n0.9 0.1\n0.2 0.8\n");
  EXPECT_NEAR(model.marginal[0], 2.0 / 3.0, 1e-12);
  EXPECT_FALSE(model.transition_alt.has_value());
}

TEST(Io, ModelFileErrorsNameTheLine) {
  try {
    io::parse_model("cmekit-model 1\nstates 2 1\n0\n1\nmarginal 1 2\n0.5 0.5\ntransition 2 2\n0.9 0.1\n0.2 zz\n", "m.txt");
    FAIL() << "expected a parse error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("m.txt:9"), std::string::npos) << e.what();
  }
  EXPECT_THROW(io::parse_model("cmekit-model 2\n"), ValidationError);
  EXPECT_THROW(io::parse_model("cmekit-model 1\nstates 2 1\n0\n1\nmarginal 1 2\n0.5 0.6\ntransition 2 2\n1 0\n0 1\n"),
               ValidationError);
}

TEST(Io, SampleAndPointsRoundTrip) {
  CounterRng rng(3);
  const auto s = testing::random_sample(rng, 7, 3);
  const auto back = io::parse_sample(io::format_sample(s));
  EXPECT_EQ(back.x, s.x);
  EXPECT_EQ(back.y, s.y);
  EXPECT_EQ(io::parse_points(io::format_points(s.x)), s.x);
  EXPECT_THROW(io::parse_sample("cmekit-sample 1\nX 2 1\n0\n1\nY 1 1\n0\n"), ValidationError);
}

TEST(Io, EstimatorRoundTripPreservesPredictions) {
  CounterRng rng(4);
  const auto s = testing::random_sample(rng, 30, 2);
  const Points table_states = line_states(3);
  const PairedSample discrete{make_points({{0}, {1}, {2}, {1}}), make_points({{1}, {2}, {0}, {0}})};
  const std::vector<CmeEstimator> estimators = {
      fit_tikhonov_closed_form(s, KernelSpec::gaussian(0.7), 1e-3),
      fit_cme(s, KernelSpec::laplacian(1.3), Cutoff{}, 1e-2),
      fit_cme(s, KernelSpec::gaussian(1.0), Landweber{40, 0.5}, 1e-3),
      fit_tikhonov_closed_form(discrete, KernelSpec::table(table_states, Eigen::Matrix3d{{2, 1, 0}, {1, 2, 1}, {0, 1, 2}}), 0.1),
  };
  for (const auto& est : estimators) {
    const auto back = io::parse_estimator(io::format_estimator(est));
    EXPECT_EQ(back.kernel(), est.kernel());
    EXPECT_EQ(back.filter(), est.filter());
    EXPECT_EQ(back.lambda(), est.lambda());
    EXPECT_EQ(back.coefficients(), est.coefficients());
    for (Eigen::Index i = 0; i < est.x().rows(); ++i) {
      const auto a = predict_embedding(est, est.x().row(i)).weights();
      const auto b = predict_embedding(back, est.x().row(i)).weights();
      EXPECT_LE((a - b).norm(), 1e-15 * std::max(a.norm(), 1e-300));
    }
    EXPECT_EQ(io::format_estimator(back), io::format_estimator(est));
  }
}

TEST(Io, ConfigParsing) {
  const auto cfg = io::Config::parse("# comment\n[kernel]\ntype = gaussian\nbandwidth = 0.5\n\n[data]\nn = 10\ngrid = 1, 2,3\n");
  EXPECT_EQ(cfg.str("kernel.type"), "gaussian");
  EXPECT_EQ(cfg.real("kernel.bandwidth"), 0.5);
  EXPECT_EQ(cfg.integer("data.n", 1), 10);
  EXPECT_EQ(cfg.integer_list("data.grid"), (std::vector<std::int64_t>{1, 2, 3}));
  EXPECT_EQ(cfg.line_of("data.n"), 7);
  EXPECT_TRUE(cfg.has_section("kernel"));

  auto message = [](const std::string& text) -> std::string {
    try {
      const auto c = io::Config::parse(text, "c.cfg");
      c.check_keys({"a.x"});
      c.positive("a.x");
    } catch (const ValidationError& e) {
      return e.what();
    }
    return "";
  };
  EXPECT_EQ(message("[a]\nx = 1\nx = 2\n"), "c.cfg:3: duplicate key 'x' in [a]");
  EXPECT_EQ(message("x = 1\n"), "c.cfg:1: key outside of any [section]");
  EXPECT_EQ(message("[a]\nx = 1\ny = 2\n"), "c.cfg:3: unknown field 'a.y'");
  EXPECT_EQ(message("[a]\nx = abc\n"), "c.cfg:2: field 'a.x': invalid number 'abc'");
  EXPECT_EQ(message("[a]\nx = -1\n"), "c.cfg:2: field 'a.x': must be > 0");
  EXPECT_EQ(message("[a\n"), "c.cfg:1: malformed section header");
  EXPECT_EQ(message("[a]\n"), "c.cfg: missing required field 'a.x'");
}

using Cli = TempDir;

TEST_F(Cli, EstimateSinglePair) {
  write("one.txt", "cmekit-sample 1\nX 1 1\n0.3\nY 1 1\n-0.4\n");
  const auto r = run("estimate",
                     "[kernel]\ntype = gaussian\nbandwidth = 1\n[estimator]\nlambda = 1\n"
                     "[data]\nsource = paired-sample\nfile = one.txt\n[output]\nestimator = est.txt\n");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j["hs_norm_sq"].get<double>(), 0.25, 1e-15);
  EXPECT_NEAR(j["regularized_empirical_risk"].get<double>(), 0.5, 1e-15);
  EXPECT_EQ(j["n"].get<int>(), 1);
  EXPECT_FALSE(j.contains("wall_time_ms"));
  EXPECT_NE(r.err.find("wall_time_ms"), std::string::npos);
  const auto est = io::load_estimator(path("est.txt"));
  EXPECT_NEAR(est.coefficients()(0, 0), 0.5, 1e-15);
}

TEST_F(Cli, EstimateHugeLambdaApproachesZeroEstimator) {
  const auto s = ou_sample_pairs(1.0, 0.5, 50, 3);
  write("s.txt", io::format_sample(s));
  const auto r = run("estimate",
                     "[estimator]\nlambda = 1e9\n[data]\nsource = paired-sample\nfile = s.txt\n"
                     "[output]\nestimator = est.txt\n");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  const CmeEstimator zero(KernelSpec::gaussian(1.0), 1.0, Tikhonov{}, s.x, s.y, Eigen::MatrixXd::Zero(50, 50));
  EXPECT_NEAR(j["empirical_risk"].get<double>(), empirical_risk(zero, s), 1e-3);
}

TEST_F(Cli, EstimateRoundTripAndDeterminism) {
  write("model.txt", io::format_model(swap_model()));
  const std::string cfg =
      "[kernel]\nbandwidth = 0.8\n[estimator]\nfilter = landweber\nlandweber_steps = 30\nlambda = 0.01\n"
      "[data]\nsource = finite-model\nfile = model.txt\nn = 40\nseed = 5\n[output]\nestimator = est.txt\n";
  const auto a = run("estimate", cfg);
  ASSERT_EQ(a.code, 0) << a.err;
  const auto file_a = io::read_file(path("est.txt"));
  const auto b = run("estimate", cfg);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(io::read_file(path("est.txt")), file_a);

  cli::Options opt;
  opt.seed = 6;
  const auto c = run("estimate", cfg, opt);
  EXPECT_NE(c.out, a.out);

  const auto loaded = io::load_estimator(path("est.txt"));
  const auto sample = sample_pairs(swap_model(), 40, 6);
  const auto in_process = fit_cme(sample, KernelSpec::gaussian(0.8), Landweber{30, 1.0}, 0.01);
  for (double q : {0.0, 0.5, 1.0}) {
    const auto x = make_points({{q}});
    const auto w1 = predict_embedding(loaded, x.row(0)).weights();
    const auto w2 = predict_embedding(in_process, x.row(0)).weights();
    EXPECT_LE((w1 - w2).norm(), 1e-15 * w2.norm());
  }

  opt.timing = true;
  const auto timed = run("estimate", cfg, opt);
  EXPECT_TRUE(nlohmann::json::parse(timed.out).contains("wall_time_ms"));
}

TEST_F(Cli, EstimateNeedsOutputPath) {
  write("model.txt", io::format_model(swap_model()));
  const auto r = run("estimate", "[estimator]\nlambda = 1\n[data]\nsource = finite-model\nfile = model.txt\nn = 5\n");
  EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, EdmdIdentityAndRange) {
  write("id.txt", "cmekit-sample 1\nX 3 1\n0\n1\n2.5\nY 3 1\n0\n1\n2.5\n");
  const std::string base = "[estimator]\nlambda = 1e-3\n[data]\nsource = paired-sample\nfile = id.txt\n[edmd]\n";
  const auto ok = run("edmd", base + "r = 3\n");
  ASSERT_EQ(ok.code, 0) << ok.err;
  std::istringstream lines(ok.out);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "index,re,im,modulus,residual");
  int rows = 0;
  double prev = 2.0;
  while (std::getline(lines, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    ASSERT_EQ(cells.size(), 5u);
    const double re = *io::parse_double(cells[1]);
    EXPECT_EQ(*io::parse_double(cells[2]), 0.0);
    EXPECT_GT(re, 0.0);
    EXPECT_LT(re, 1.0);
    EXPECT_LE(*io::parse_double(cells[3]), prev);
    prev = *io::parse_double(cells[3]);
    ++rows;
  }
  EXPECT_EQ(rows, 3);

  const auto bad = run("edmd", base + "r = 4\n");
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("r out of range"), std::string::npos);
}

TEST_F(Cli, Mmd) {
  write("p.txt", "cmekit-points 1\npoints 1 1\n0\n");
  write("q.txt", "cmekit-points 1\npoints 1 1\n1\n");
  write("pp.txt", "cmekit-points 1\npoints 3 1\n0\n0.5\n2\n");
  const auto single = run("mmd", "[mmd]\nsample_p = p.txt\nsample_q = q.txt\nunbiased = false\n");
  ASSERT_EQ(single.code, 0) << single.err;
  const auto j = nlohmann::json::parse(single.out);
  EXPECT_NEAR(j["biased"].get<double>(), 0.7869386806, 1e-10);
  EXPECT_TRUE(j["unbiased"].is_null());
  EXPECT_EQ(run("mmd", "[mmd]\nsample_p = p.txt\nsample_q = q.txt\n").code, 2);

  const auto same = run("mmd", "[kernel]\ntype = laplacian\nscale = 2\n[mmd]\nsample_p = pp.txt\nsample_q = pp.txt\n");
  ASSERT_EQ(same.code, 0) << same.err;
  const auto js = nlohmann::json::parse(same.out);
  EXPECT_EQ(js["biased"].get<double>(), 0.0);
  EXPECT_EQ(js["n"].get<int>(), 3);
  EXPECT_EQ(run("mmd", "[mmd]\nsample_p = missing.txt\nsample_q = q.txt\n").code, 2);
}

TEST_F(Cli, OracleVerify) {
  write("swap.txt", io::format_model(swap_model()));
  const auto r = run("oracle-verify",
                     "[estimator]\nlambda = 1e-3\n[data]\nsource = finite-model\nfile = swap.txt\nn = 100\nseed = 3\n"
                     "[verify]\nrandom_instances = 3\n");
  ASSERT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_EQ(r.out.rfind("check,lhs,rhs,tolerance,status\n", 0), 0u);
  EXPECT_NE(r.out.find("\nmmd:equality,"), std::string::npos);
  std::istringstream lines(r.out);
  bool equality_pass = false, random_info = false;
  for (std::string line; std::getline(lines, line);) {
    if (line.rfind("mmd:equality,", 0) == 0) equality_pass = line.ends_with(",PASS");
    if (line.rfind("random", 0) == 0 && line.find(":mmd:equality,") != std::string::npos) random_info |= line.ends_with(",INFO");
    EXPECT_FALSE(line.ends_with(",FAIL")) << line;
  }
  EXPECT_TRUE(equality_pass);
  EXPECT_TRUE(random_info);

  write("bad.txt", "cmekit-model 1\nstates 2 1\n0\n1\nmarginal 1 2\n0.5 0.5\ntransition 2 2\n0.5 0.6\n0 1\n");
  EXPECT_EQ(run("oracle-verify", "[data]\nsource = finite-model\nfile = bad.txt\n").code, 2);
}

TEST_F(Cli, Convergence) {
  write("swap.txt", io::format_model(swap_model()));
  const std::string base = "[data]\nsource = finite-model\nfile = swap.txt\nseed = 2\n[convergence]\n";
  const auto one = run("convergence", base + "n_grid = 50\n");
  ASSERT_EQ(one.code, 0) << one.err;
  EXPECT_EQ(std::count(one.out.begin(), one.out.end(), '\n'), 2);
  EXPECT_EQ(one.out.rfind("n,lambda,op_norm_diff,exact_excess_risk,eig_errors\n50,", 0), 0u);
  EXPECT_EQ(run("convergence", base + "n_grid = 50, 20\n").code, 2);
  EXPECT_EQ(run("convergence", base + "n_grid = 50\nlambda_p = 1.5\n").code, 2);

  const auto ou = run("convergence", "[data]\nsource = ou\ntheta = 1\ntau = 0.5\nseed = 1\n[convergence]\nn_grid = 100, 200\nr = 2\n");
  ASSERT_EQ(ou.code, 0) << ou.err;
  EXPECT_NE(ou.out.find("\n100,"), std::string::npos);
  EXPECT_NE(ou.out.find(",,"), std::string::npos);
}

TEST_F(Cli, ConfigErrorsAreValidationFailures) {
  EXPECT_EQ(run("edmd", "[estimator]\nlambda = 1\n[data]\nsource = nowhere\n").code, 2);
  EXPECT_EQ(run("edmd", "[estimator]\nlambda = 1\n[data]\nsource = ou\ntheta = 1\ntau = 0.5\nn = 5\n[bogus]\nkey = 1\n").code, 2);
  const auto r = run("estimate", "[kernel]\ntype = cosine\n");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("run.cfg:2: field 'kernel.type'"), std::string::npos) << r.err;
  std::ostringstream out, err;
  EXPECT_EQ(cli::run_file("edmd", path("absent.cfg"), {}, out, err), 2);
  EXPECT_EQ(cli::run("nope", io::Config::parse(""), {}, out, err), 2);
}

TEST_F(Cli, RuntimeFailureIsExitOne) {
  const auto r = run("estimate",
                     "[estimator]\nlambda = 1\n[data]\nsource = double-well\nbeta = 1\ndt = 1\nsteps_per_pair = 1\nn = 5\n"
                     "[output]\nestimator = e.txt\n");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("diverged"), std::string::npos);
}

}  // namespace
}  // namespace cmekit
