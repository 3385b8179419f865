// pathwise: fitting, denoising, data generation, benchmarking and
// certificate validation for the L1/fusion solver library.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pathwise/core.hpp"
#include "pathwise/errors.hpp"
#include "pathwise/flsa1d.hpp"
#include "pathwise/flsa2d.hpp"
#include "pathwise/fused_general.hpp"
#include "pathwise/gen.hpp"
#include "pathwise/io.hpp"
#include "pathwise/lasso_family.hpp"
#include "pathwise/oracle.hpp"

namespace {

using nlohmann::json;
using namespace pathwise;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNotConverged = 3;
constexpr int kExitGeometry = 4;
constexpr int kExitCertification = 5;

std::vector<double> parse_grid(const std::string& csv) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    const std::size_t comma = csv.find(',', pos);
    const std::string cell =
        csv.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!cell.empty()) out.push_back(std::stod(cell));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw InvalidArgumentError("empty grid '" + csv + "'");
  return out;
}

// ---------------------------------------------------------------------------
// gen

struct GenArgs {
  std::string kind = "regression";
  int n = 100, p = 10;
  double rho = 0.0, snr = 3.0;
  int side = 64;
  double sigma = 1.0;
  int blocks = 6;
  bool orthonormal_groups = false;
  int group_size = 0;
  std::uint64_t seed = 1;
  std::string output = "dataset";
};

int run_gen(const GenArgs& args) {
  gen::GenSpec spec;
  spec.n = args.n;
  spec.p = args.p;
  spec.rho = args.rho;
  spec.snr = args.snr;
  spec.side = args.side;
  spec.sigma = args.sigma;
  spec.blocks = args.blocks;
  spec.orthonormal_groups = args.orthonormal_groups;
  spec.group_size = args.group_size;
  spec.seed = args.seed;

  if (args.kind == "regression") {
    spec.kind = gen::GenSpec::Kind::Regression;
    const gen::RegressionData data = gen::make_regression(spec);
    io::write_csv_matrix(args.output + "_X.csv", data.X);
    io::write_csv_vector(args.output + "_y.csv", data.y);
    io::write_csv_vector(args.output + "_beta.csv", data.beta_true);
    json meta;
    meta["kind"] = "regression";
    meta["n"] = spec.n;
    meta["p"] = spec.p;
    meta["rho"] = spec.rho;
    meta["snr"] = spec.snr;
    meta["seed"] = spec.seed;
    meta["noise_scale"] = data.noise_scale;
    meta["orthonormal_groups"] = spec.orthonormal_groups;
    meta["group_size"] = spec.group_size;
    std::ofstream out(args.output + "_meta.json");
    out << meta.dump(2) << "\n";
    std::cout << "wrote " << args.output << "_{X,y,beta}.csv\n";
    return kExitOk;
  }

  if (args.kind != "plus-image" && args.kind != "blocks-image")
    throw InvalidArgumentError("unknown kind '" + args.kind + "'");
  spec.kind = args.kind == "plus-image" ? gen::GenSpec::Kind::PlusImage
                                        : gen::GenSpec::Kind::BlocksImage;
  const gen::ImageData data = gen::make_image(spec);
  json extra;
  extra["kind"] = args.kind;
  extra["side"] = spec.side;
  extra["sigma"] = spec.sigma;
  extra["seed"] = spec.seed;

  io::ImageMeta meta;
  meta.maxval = 65535;
  meta.extra = extra;
  meta.extra["truth"] = args.output + "_truth.pgm";
  const io::PgmImage noisy = io::quantize(data.noisy, meta);
  io::write_pgm(args.output + ".pgm", noisy);
  io::write_meta(args.output + ".json", meta);

  io::ImageMeta tmeta;
  tmeta.maxval = 65535;
  tmeta.extra = extra;
  const io::PgmImage truth = io::quantize(data.truth, tmeta);
  io::write_pgm(args.output + "_truth.pgm", truth);
  io::write_meta(args.output + "_truth.json", tmeta);
  std::cout << "wrote " << args.output << ".pgm (+truth, +sidecars)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  std::string x_path, y_path, method = "lasso", output = "path.jsonl";
  bool header = false;
  double lambda = -1.0;
  int path_points = 0;
  double lambda_min_ratio = 0.01;
  double enet_lambda2 = 0.0;
  double berhu_delta = 1.0;
  int group_size = 0;
  double fused_lambda1 = 0.0, fused_lambda2 = 0.0;
  double delta = -1.0;
  double tol = tol::convergence;
};

lasso::Penalty make_penalty(const FitArgs& args, const DesignMatrix& X, double lambda) {
  if (args.method == "lasso") return lasso::Lasso{lambda};
  if (args.method == "enet") return lasso::ElasticNet{lambda, args.enet_lambda2};
  if (args.method == "garotte") return lasso::Garotte{lambda, std::nullopt};
  if (args.method == "berhu") return lasso::Berhu{lambda, args.berhu_delta};
  if (args.method == "lad") return lasso::Lad{0.0};
  if (args.method == "ladlasso") return lasso::Lad{lambda};
  if (args.method == "grouplasso") {
    if (args.group_size < 1 || X.p % args.group_size != 0)
      throw InvalidArgumentError("--group-size must divide p for grouplasso");
    std::vector<std::vector<Eigen::Index>> groups;
    for (Eigen::Index j = 0; j < X.p; j += args.group_size) {
      std::vector<Eigen::Index> g;
      for (int c = 0; c < args.group_size; ++c) g.push_back(j + c);
      groups.push_back(std::move(g));
    }
    return lasso::GroupedLasso{lambda, std::move(groups)};
  }
  throw InvalidArgumentError("unknown method '" + args.method + "'");
}

bool certify_fit(const lasso::SeparableProblem& problem, const lasso::FitResult& fit,
                 double tol_cert) {
  if (std::holds_alternative<lasso::Lasso>(problem.penalty) ||
      std::holds_alternative<lasso::ElasticNet>(problem.penalty) ||
      std::holds_alternative<lasso::Berhu>(problem.penalty))
    return oracle::kkt_check_separable(problem, fit.coefficients, tol_cert).feasible;
  if (std::holds_alternative<lasso::Garotte>(problem.penalty))
    return oracle::kkt_check_nonneg_garotte(problem, fit.coefficients, tol_cert).feasible;
  if (std::holds_alternative<lasso::GroupedLasso>(problem.penalty))
    return oracle::kkt_check_grouped(problem, fit.coefficients, tol_cert).feasible;
  // LAD variants: coordinatewise stationarity, checked by one extra sweep.
  const lasso::FitResult probe = lasso::solve(problem, fit.coefficients, tol_cert, 1);
  const double moved =
      (probe.coefficients - fit.coefficients).cwiseAbs().maxCoeff() +
      std::abs(probe.intercept - fit.intercept);
  return moved <= 10.0 * tol_cert;
}

int run_fit(const FitArgs& args) {
  const Matrix raw_x = io::read_csv_matrix(args.x_path, args.header);
  const Vector y = io::read_csv_vector(args.y_path, args.header);
  if (raw_x.rows() != y.size())
    throw io::InputError(args.y_path, 0, "row count differs from " + args.x_path);

  io::PathFile out;
  out.header["tol"] = args.tol;
  out.header["method"] = args.method;
  out.header["n"] = raw_x.rows();
  out.header["p"] = raw_x.cols();

  if (args.method == "fused") {
    DesignMatrix X = standardize(raw_x);
    out.header["standardized"] = true;
    fused::GeneralFusedProblem problem{X, y, args.fused_lambda1, args.fused_lambda2};
    const double delta =
        args.delta > 0.0
            ? args.delta
            : (args.fused_lambda2 > 0.0 ? args.fused_lambda2 / 100.0 : 1.0);
    out.header["fused_delta"] = delta;
    const fused::FusedFitResult fit =
        fused::fused_cd_solve(problem, delta, {args.tol, 10000});
    io::PathRecord rec;
    rec.index = 0;
    rec.lambda = args.fused_lambda1;
    rec.lambda2 = args.fused_lambda2;
    rec.coefficients = fit.coefficients;
    rec.objective = fit.objective;
    rec.sweeps = fit.iterations;
    rec.converged = fit.converged;
    rec.certified = fit.certified;
    out.records.push_back(std::move(rec));
    io::write_path_file(args.output, out);
    std::cout << "wrote " << args.output << " (1 record, certified="
              << (fit.certified ? "yes" : "no") << ")\n";
    return kExitOk;
  }

  const bool needs_standardized = args.method != "grouplasso" && args.method != "lad" &&
                                  args.method != "ladlasso";
  DesignMatrix X;
  if (needs_standardized) {
    X = standardize(raw_x);
  } else {
    X.values = raw_x;
    X.n = raw_x.rows();
    X.p = raw_x.cols();
    X.column_means = Vector::Zero(X.p);
    X.column_scales = Vector::Ones(X.p);
  }
  out.header["standardized"] = needs_standardized;
  if (args.method == "enet") out.header["enet_lambda2"] = args.enet_lambda2;
  if (args.method == "berhu") out.header["berhu_delta"] = args.berhu_delta;
  if (args.method == "grouplasso") out.header["group_size"] = args.group_size;

  std::vector<double> grid;
  if (args.path_points > 0) {
    const double lmax = lasso::lambda_max(X, y);
    const double lmin = lmax * args.lambda_min_ratio;
    for (int k = 0; k < args.path_points; ++k) {
      const double t = args.path_points == 1
                           ? 0.0
                           : static_cast<double>(k) / (args.path_points - 1);
      grid.push_back(lmax * std::pow(lmin / lmax, t));
    }
  } else {
    grid.push_back(args.lambda >= 0.0 ? args.lambda : 0.5);
  }
  out.header["grid"] = grid;

  lasso::SeparableProblem problem{X, y, make_penalty(args, X, grid.front())};
  const lasso::PathResult path = lasso::fit_path(problem, grid, args.tol);

  for (std::size_t k = 0; k < path.fits.size(); ++k) {
    const lasso::FitResult& fit = path.fits[k];
    io::PathRecord rec;
    rec.index = static_cast<int>(k);
    rec.lambda = grid[k];
    rec.coefficients = fit.coefficients;
    rec.intercept = fit.intercept;
    rec.objective = fit.objective;
    rec.sweeps = fit.iterations;
    rec.converged = fit.converged;
    lasso::SeparableProblem sub{X, y, lasso::with_primary(problem.penalty, grid[k])};
    if (std::holds_alternative<lasso::Garotte>(sub.penalty))
      std::get<lasso::Garotte>(sub.penalty).beta_ls =
          std::get<lasso::Garotte>(problem.penalty).beta_ls
              ? std::get<lasso::Garotte>(problem.penalty).beta_ls
              : std::optional<Vector>(Eigen::ColPivHouseholderQR<Matrix>(X.values).solve(y));
    rec.certified = certify_fit(sub, fit, tol::kkt);
    out.records.push_back(std::move(rec));
  }
  io::write_path_file(args.output, out);
  std::cout << "wrote " << args.output << " (" << out.records.size() << " records)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// denoise

struct DenoiseArgs {
  std::string input, meta_path, output = "denoised";
  double lambda1 = -1.0, lambda2 = -1.0, lambda3 = -1.0;
  bool two_fold = false;
  std::string lambda1_grid = "0,0.1,0.25,0.5,1", lambda2_grid = "0.25,0.5,1,2,4";
  bool pure_fusion = false;
  double delta = -1.0;
  double tol = tol::convergence;
  int jobs = 1;
};

int run_denoise(const DenoiseArgs& args) {
  const io::PgmImage img = io::read_pgm(args.input);
  io::ImageMeta meta;
  meta.scale = 1.0;
  meta.offset = 0.0;
  meta.maxval = img.maxval;
  std::string meta_path = args.meta_path;
  if (meta_path.empty()) {
    const std::string guess =
        args.input.size() > 4 ? args.input.substr(0, args.input.size() - 4) + ".json" : "";
    if (!guess.empty() && std::ifstream(guess).good()) meta_path = guess;
  }
  if (!meta_path.empty()) meta = io::read_meta(meta_path);

  flsa2d::PixelGrid grid;
  grid.values = io::to_float(img, meta);

  double lambda1 = std::max(args.lambda1, 0.0);
  double lambda2 = std::max(args.lambda2, 0.0);
  json selection;
  if (args.two_fold) {
    flsa2d::TwoFoldOptions opts;
    opts.delta = args.delta;
    opts.tol = args.tol;
    opts.jobs = args.jobs;
    std::vector<double> l1g = parse_grid(args.lambda1_grid);
    if (args.pure_fusion) l1g = {0.0};
    const std::vector<double> l2g = parse_grid(args.lambda2_grid);
    const flsa2d::TwoFoldResult sel = flsa2d::two_fold_validate(grid, l1g, l2g, opts);
    lambda1 = sel.lambda1;
    lambda2 = sel.lambda2;
    selection["lambda1_grid"] = l1g;
    selection["lambda2_grid"] = l2g;
    std::vector<std::vector<double>> surface;
    for (Eigen::Index i = 0; i < sel.error_surface.rows(); ++i)
      surface.emplace_back(sel.error_surface.row(i).begin(), sel.error_surface.row(i).end());
    selection["error_surface"] = surface;
  }
  if (args.pure_fusion) lambda1 = 0.0;

  flsa2d::SolveOptions2D sopts;
  sopts.tol = args.tol;
  if (args.lambda3 >= 0.0 && lambda2 > 0.0) sopts.lambda3_ratio = args.lambda3 / lambda2;
  const double delta = args.delta > 0.0 ? args.delta : (lambda2 > 0.0 ? lambda2 / 200.0 : 1.0);
  const flsa2d::Flsa2dSolution sol = flsa2d::flsa2d_solve(grid, lambda1, lambda2, delta, sopts);

  // Keep the input's affine mapping so an identity fit reproduces the input
  // bit for bit; clamp anything the shrinkage pushed outside.
  io::PgmImage out_img = img;
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      const double q = (sol.beta(r, c) - meta.offset) / meta.scale;
      const long v = std::lround(std::min(std::max(q, 0.0), double(img.maxval)));
      out_img.pixels[static_cast<std::size_t>(r) * img.width + c] =
          static_cast<std::uint16_t>(v);
    }
  io::write_pgm(args.output + ".pgm", out_img);

  io::ImageMeta out_meta = meta;
  out_meta.extra = meta.extra.is_object() ? meta.extra : json::object();
  out_meta.extra["lambda1"] = lambda1;
  out_meta.extra["lambda2"] = lambda2;
  out_meta.extra["lambda3"] = sol.lambda3;
  out_meta.extra["groups"] = sol.partition.size();
  if (!selection.is_null()) out_meta.extra["two_fold"] = selection;
  io::write_meta(args.output + ".json", out_meta);

  std::ofstream part(args.output + "_partition.jsonl");
  for (std::size_t k = 0; k < sol.partition.size(); ++k) {
    const int pixel0 = sol.partition[k].front();
    json j;
    j["record"] = "group";
    j["id"] = k;
    j["value"] = sol.beta(pixel0 / grid.n2(), pixel0 % grid.n2());
    j["pixels"] = sol.partition[k];
    part << j.dump() << "\n";
  }
  std::cout << "wrote " << args.output << ".pgm (lambda1=" << lambda1
            << ", lambda2=" << lambda2 << ", groups=" << sol.partition.size() << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
  std::string suite = "lasso-scaling";
  int runs = 5;
  std::uint64_t seed = 1;
  std::string output = "bench_report";
  int jobs = 1;
};

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double loglog_slope(const std::vector<double>& sizes, const std::vector<double>& times) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double x = std::log(sizes[i]);
    const double y = std::log(std::max(times[i], 1e-9));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

template <class Fn>
double time_median(int runs, Fn&& fn) {
  std::vector<double> times;
  for (int r = 0; r < runs; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  return median_of(times);
}

int run_bench(const BenchArgs& args) {
  json rows = json::array();
  std::ostringstream md;

  auto lasso_fit_time = [&](int n, int p) {
    gen::GenSpec spec;
    spec.kind = gen::GenSpec::Kind::Regression;
    spec.n = n;
    spec.p = p;
    spec.rho = 0.1;
    spec.seed = args.seed;
    const gen::RegressionData data = gen::make_regression(spec);
    const DesignMatrix X = standardize(data.X);
    const double lmax = lasso::lambda_max(X, data.y);
    const lasso::SeparableProblem problem{X, data.y, lasso::Lasso{0.5 * lmax}};
    auto once = [&]() { lasso::lasso_cd(problem, Vector::Zero(p), 1e-7); };
    const auto t0 = std::chrono::steady_clock::now();
    once();
    const double single = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const int reps = std::max(1, static_cast<int>(std::ceil(0.002 / std::max(single, 1e-6))));
    return time_median(args.runs, [&]() {
             for (int k = 0; k < reps; ++k) once();
           }) /
           reps;
  };

  if (args.suite == "lasso-scaling") {
    md << "| suite | vary | n | p | median_s |\n|---|---|---|---|---|\n";
    std::vector<double> ns{200, 400, 800, 1600, 3200}, tn;
    for (double n : ns) {
      const double t = lasso_fit_time(static_cast<int>(n), 100);
      tn.push_back(t);
      md << "| lasso-scaling | n | " << n << " | 100 | " << t << " |\n";
      rows.push_back({{"suite", "lasso-scaling"},
                      {"vary", "n"},
                      {"n", n},
                      {"p", 100},
                      {"median_seconds", t}});
    }
    std::vector<double> ps{50, 100, 200, 400, 800}, tp;
    for (double p : ps) {
      const double t = lasso_fit_time(400, static_cast<int>(p));
      tp.push_back(t);
      md << "| lasso-scaling | p | 400 | " << p << " | " << t << " |\n";
      rows.push_back({{"suite", "lasso-scaling"},
                      {"vary", "p"},
                      {"n", 400},
                      {"p", p},
                      {"median_seconds", t}});
    }
    const double slope_n = loglog_slope(ns, tn);
    const double slope_p = loglog_slope(ps, tp);
    md << "\nlog-log slope vs n: " << slope_n << "\nlog-log slope vs p: " << slope_p << "\n";
    rows.push_back({{"suite", "lasso-scaling"}, {"slope_n", slope_n}, {"slope_p", slope_p}});
  } else if (args.suite == "flsa-path") {
    md << "| suite | n | median_s |\n|---|---|---|\n";
    for (int n : {10000, 100000}) {
      std::mt19937_64 rng(args.seed);
      std::normal_distribution<double> gauss(0.0, 1.0);
      Vector y(n);
      for (int i = 0; i < n; ++i) y[i] = gauss(rng);
      const std::vector<double> emit{2.0};
      const double t = time_median(args.runs, [&]() {
        flsa::flsa_solve_path(y, flsa::make_schedule(0.0, 2.0, 2.0 / 200.0), {}, &emit);
      });
      md << "| flsa-path | " << n << " | " << t << " |\n";
      rows.push_back({{"suite", "flsa-path"}, {"n", n}, {"median_seconds", t}});
    }
  } else if (args.suite == "flsa2d-grid") {
    md << "| suite | side | median_s |\n|---|---|---|\n";
    for (int side : {8, 16, 32}) {
      gen::GenSpec spec;
      spec.kind = gen::GenSpec::Kind::PlusImage;
      spec.side = side;
      spec.sigma = 1.0;
      spec.seed = args.seed;
      const gen::ImageData data = gen::make_plus_image(spec);
      flsa2d::PixelGrid grid{data.noisy};
      const double t = time_median(args.runs, [&]() {
        flsa2d::flsa2d_solve(grid, 0.0, 2.0, 2.0 / 50.0);
      });
      md << "| flsa2d-grid | " << side << " | " << t << " |\n";
      rows.push_back({{"suite", "flsa2d-grid"}, {"side", side}, {"median_seconds", t}});
    }
  } else {
    throw InvalidArgumentError("unknown suite '" + args.suite + "'");
  }

  std::ofstream mdfile(args.output + ".md");
  mdfile << md.str();
  std::ofstream jsonfile(args.output + ".jsonl");
  for (const auto& row : rows) jsonfile << row.dump() << "\n";
  std::cout << md.str();
  return kExitOk;
}

// ---------------------------------------------------------------------------
// validate

struct ValidateArgs {
  std::string path, x_path, y_path;
  bool header = false;
  double tol = tol::kkt;
};

int run_validate(const ValidateArgs& args) {
  const io::PathFile file = io::read_path_file(args.path);
  const std::string method = file.header.value("method", "");
  const Matrix raw_x = io::read_csv_matrix(args.x_path, args.header);
  const Vector y = io::read_csv_vector(args.y_path, args.header);
  const bool standardized = file.header.value("standardized", true);

  DesignMatrix X;
  if (standardized) {
    X = standardize(raw_x);
  } else {
    X.values = raw_x;
    X.n = raw_x.rows();
    X.p = raw_x.cols();
    X.column_means = Vector::Zero(X.p);
    X.column_scales = Vector::Ones(X.p);
  }

  std::optional<Vector> garotte_ls;
  if (method == "garotte")
    garotte_ls = Eigen::ColPivHouseholderQR<Matrix>(X.values).solve(y);

  for (const auto& rec : file.records) {
    bool ok = false;
    if (method == "fused") {
      const fused::GeneralFusedProblem problem{X, y, rec.lambda, rec.lambda2};
      const Vector grad = X.values.transpose() * (X.values * rec.coefficients - y);
      ok = oracle::kkt_check_graph_grad(grad, rec.coefficients,
                                        Vector::Constant(X.p, rec.lambda),
                                        oracle::chain_edges(X.p, rec.lambda2),
                                        {args.tol, tol::equality, 20000})
               .feasible;
      const double obj = fused::general_fused_objective(problem, rec.coefficients);
      ok = ok && std::abs(obj - rec.objective) <= 1e-6 * (1.0 + std::abs(obj));
    } else {
      FitArgs fa;
      fa.method = method;
      fa.enet_lambda2 = file.header.value("enet_lambda2", 0.0);
      fa.berhu_delta = file.header.value("berhu_delta", 1.0);
      fa.group_size = file.header.value("group_size", 0);
      lasso::SeparableProblem problem{X, y, make_penalty(fa, X, rec.lambda)};
      if (auto* g = std::get_if<lasso::Garotte>(&problem.penalty)) g->beta_ls = garotte_ls;
      lasso::FitResult fit;
      fit.coefficients = rec.coefficients;
      fit.intercept = rec.intercept;
      ok = certify_fit(problem, fit, args.tol);
      const double obj = lasso::objective_value(X, y, problem.penalty, rec.coefficients,
                                                rec.intercept);
      ok = ok && std::abs(obj - rec.objective) <= 1e-6 * (1.0 + std::abs(obj));
    }
    if (!ok) {
      std::cerr << "certification failed at record " << rec.index << " (lambda "
                << rec.lambda << ")\n";
      return kExitCertification;
    }
  }
  std::cout << "all " << file.records.size() << " records certified\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pathwise coordinate optimization: lasso family, fused lasso, FLSA"};
  app.require_subcommand(1);

  GenArgs gen_args;
  CLI::App* gen_cmd = app.add_subcommand("gen", "generate datasets and images");
  gen_cmd->add_option("--kind", gen_args.kind, "regression|plus-image|blocks-image");
  gen_cmd->add_option("--n", gen_args.n);
  gen_cmd->add_option("--p", gen_args.p);
  gen_cmd->add_option("--rho", gen_args.rho);
  gen_cmd->add_option("--snr", gen_args.snr);
  gen_cmd->add_option("--side", gen_args.side);
  gen_cmd->add_option("--sigma", gen_args.sigma);
  gen_cmd->add_option("--blocks", gen_args.blocks);
  gen_cmd->add_flag("--orthonormal-groups", gen_args.orthonormal_groups);
  gen_cmd->add_option("--group-size", gen_args.group_size);
  gen_cmd->add_option("--seed", gen_args.seed)->required();
  gen_cmd->add_option("--output", gen_args.output);

  FitArgs fit_args;
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit a penalized model, write a path file");
  fit_cmd->add_option("--X", fit_args.x_path)->required();
  fit_cmd->add_option("--y", fit_args.y_path)->required();
  fit_cmd->add_option("--method", fit_args.method,
                      "lasso|enet|garotte|lad|ladlasso|grouplasso|berhu|fused");
  fit_cmd->add_flag("--header", fit_args.header, "CSV files carry a header line");
  fit_cmd->add_option("--lambda", fit_args.lambda);
  fit_cmd->add_option("--path", fit_args.path_points, "points on an automatic lambda grid");
  fit_cmd->add_option("--lambda-min-ratio", fit_args.lambda_min_ratio);
  fit_cmd->add_option("--lambda2", fit_args.enet_lambda2, "ridge weight (enet)");
  fit_cmd->add_option("--delta-berhu", fit_args.berhu_delta);
  fit_cmd->add_option("--group-size", fit_args.group_size);
  fit_cmd->add_option("--lambda1", fit_args.fused_lambda1, "sparsity weight (fused)");
  fit_cmd->add_option("--fused-lambda2", fit_args.fused_lambda2, "fusion weight (fused)");
  fit_cmd->add_option("--delta", fit_args.delta);
  fit_cmd->add_option("--tol", fit_args.tol);
  fit_cmd->add_option("--output", fit_args.output);

  DenoiseArgs den_args;
  CLI::App* den_cmd = app.add_subcommand("denoise", "2D fused-lasso image denoising");
  den_cmd->add_option("--input", den_args.input)->required();
  den_cmd->add_option("--meta", den_args.meta_path);
  den_cmd->add_option("--lambda1", den_args.lambda1);
  den_cmd->add_option("--lambda2", den_args.lambda2);
  den_cmd->add_option("--lambda3", den_args.lambda3);
  den_cmd->add_flag("--two-fold", den_args.two_fold);
  den_cmd->add_option("--lambda1-grid", den_args.lambda1_grid);
  den_cmd->add_option("--lambda2-grid", den_args.lambda2_grid);
  den_cmd->add_flag("--pure-fusion", den_args.pure_fusion, "force lambda1 = 0");
  den_cmd->add_option("--delta", den_args.delta);
  den_cmd->add_option("--tol", den_args.tol);
  den_cmd->add_option("--jobs", den_args.jobs);
  den_cmd->add_option("--output", den_args.output);

  BenchArgs bench_args;
  CLI::App* bench_cmd = app.add_subcommand("bench", "timing suites with scaling slopes");
  bench_cmd->add_option("--suite", bench_args.suite, "lasso-scaling|flsa-path|flsa2d-grid");
  bench_cmd->add_option("--runs", bench_args.runs)->check(CLI::Range(1, 100));
  bench_cmd->add_option("--seed", bench_args.seed);
  bench_cmd->add_option("--jobs", bench_args.jobs);
  bench_cmd->add_option("--output", bench_args.output);

  ValidateArgs val_args;
  CLI::App* val_cmd = app.add_subcommand("validate", "re-check a path file's certificates");
  val_cmd->add_option("--path", val_args.path)->required();
  val_cmd->add_option("--X", val_args.x_path)->required();
  val_cmd->add_option("--y", val_args.y_path)->required();
  val_cmd->add_flag("--header", val_args.header);
  val_cmd->add_option("--tol", val_args.tol);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (gen_cmd->parsed()) return run_gen(gen_args);
    if (fit_cmd->parsed()) return run_fit(fit_args);
    if (den_cmd->parsed()) return run_denoise(den_args);
    if (bench_cmd->parsed()) return run_bench(bench_args);
    if (val_cmd->parsed()) return run_validate(val_args);
  } catch (const NotConvergedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNotConverged;
  } catch (const GridTooSmallError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitGeometry;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
