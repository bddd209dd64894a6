// Command-line front end: census-based stereo matching with risk-minimizing
// disparity prediction, plus direct access to the solver, the metrics, and
// the differentiability demo.
//
// Exit codes: 0 success, 1 I/O or parse failure, 2 validation failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stereorisk/stereorisk.hpp"

namespace sr = stereorisk;

namespace {

struct CommonFlags {
  double sigma = 1.1;
  double tau = 0.1;
  double beta = 1.0;
  std::string kernel = "laplacian";
  double temperature = 2.0;
  int census_window = 7;
  int threads = 0;  // 0 = auto (STEREO_RISK_THREADS, then hardware)
};

void add_risk_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--sigma", f.sigma, "Kernel bandwidth in pixels");
  cmd->add_option("--tau", f.tau, "Stopping tolerance on |G|");
  cmd->add_option("--beta", f.beta, "Huber transition half-width");
  cmd->add_option("--kernel", f.kernel, "Interpolation kernel: laplacian|gaussian");
}

sr::RiskConfig make_risk_config(const CommonFlags& f, sr::ErrorNorm norm) {
  sr::RiskConfig cfg;
  cfg.kernel = sr::Kernel(sr::kernel_from_string(f.kernel), f.sigma);
  cfg.tau = f.tau;
  cfg.norm = norm;
  cfg.huber_beta = f.beta;
  return cfg;
}

sr::Predictor predictor_from_string(std::string name) {
  for (char& ch : name) ch = static_cast<char>(std::tolower(ch));
  if (name == "expectation") return sr::Predictor::Expectation;
  if (name == "l1risk") return sr::Predictor::L1Risk;
  if (name == "l2risk") return sr::Predictor::L2Risk;
  if (name == "huber") return sr::Predictor::Huber;
  throw sr::InputError("unknown predictor '" + name + "'");
}

sr::EvalMask build_mask(const sr::DisparityMap& gt,
                        const std::optional<sr::GrayImage>& noc) {
  const std::size_t n = gt.values.size();
  std::vector<std::uint8_t> eval(n, 1), noc_flags(n, 1);
  if (noc) {
    if (noc->width != gt.width || noc->height != gt.height) {
      throw sr::InputError("noc mask dimensions differ from ground truth");
    }
    for (std::size_t i = 0; i < n; ++i) {
      noc_flags[i] = noc->pixels[i] > 0.0 ? 1 : 0;
    }
  }
  return sr::EvalMask(gt.width, gt.height, std::move(eval),
                      std::move(noc_flags));
}

void print_metrics(const sr::DisparityMap& pred, const sr::DisparityMap& gt,
                   const std::optional<sr::GrayImage>& noc,
                   const std::string& out_path) {
  const sr::EvalMask mask = build_mask(gt, noc);
  const sr::EvalReport report =
      sr::evaluate_disparity(pred, gt, mask, noc.has_value());
  const std::string text = sr::report_json(report).dump(2);
  if (out_path.empty()) {
    std::cout << text << "\n";
  } else {
    std::ofstream out(out_path);
    if (!out) throw sr::IoError(out_path + ": cannot open for writing");
    out << text << "\n";
  }
}

int cmd_match(const std::string& left_path, const std::string& right_path,
              const std::string& gt_path, const std::string& noc_path,
              const std::string& out_path, const sr::MatchOptions& opt) {
  const sr::GrayImage left = sr::read_image(left_path);
  const sr::GrayImage right = sr::read_image(right_path);
  const sr::MatchResult result = sr::match_stereo(left, right, opt);
  sr::write_pfm(out_path, result.disparity);
  if (!gt_path.empty()) {
    const sr::DisparityMap gt = sr::read_pfm(gt_path);
    std::optional<sr::GrayImage> noc;
    if (!noc_path.empty()) noc = sr::read_image(noc_path);
    print_metrics(result.disparity, gt, noc, "");
  }
  return 0;
}

int cmd_minimize(const std::string& pmf_path, const CommonFlags& flags,
                 bool sigma_set, bool kernel_set, const std::string& norm_name,
                 const std::string& sweep_path) {
  sr::PmfFile file = [&] {
    try {
      return sr::read_pmf_json(pmf_path);
    } catch (const sr::InputError& e) {
      // Invalid pmf contents are a parse-stage failure of the input file.
      throw sr::IoError(e.what());
    }
  }();

  CommonFlags effective = flags;
  if (!sigma_set && file.sigma) effective.sigma = *file.sigma;
  sr::ErrorNorm norm = sr::ErrorNorm::L1;
  if (norm_name == "l2") norm = sr::ErrorNorm::L2;
  else if (norm_name == "huber") norm = sr::ErrorNorm::Huber;
  else if (norm_name != "l1") throw sr::InputError("unknown norm '" + norm_name + "'");
  sr::RiskConfig cfg = make_risk_config(effective, norm);
  if (!kernel_set && file.kernel) {
    cfg.kernel = sr::Kernel(*file.kernel, cfg.kernel.sigma);
  }

  const sr::SolveResult res = sr::solve_generic(file.pmf, cfg);
  std::printf("y_star %.9g\n", res.y_star);
  std::printf("iterations %d\n", res.iterations);
  std::printf("final_g %.9g\n", res.final_derivative);

  if (!sweep_path.empty()) {
    std::ofstream out(sweep_path);
    if (!out) throw sr::IoError(sweep_path + ": cannot open for writing");
    out << "y,risk\n";
    const double lo = file.pmf.min_hypothesis() - cfg.kernel.sigma;
    const double hi = file.pmf.max_hypothesis() + cfg.kernel.sigma;
    constexpr int samples = 1000;
    char line[64];
    for (int i = 0; i <= samples; ++i) {
      const double y = lo + (hi - lo) * i / samples;
      const double f = sr::risk_l1(file.pmf, cfg.kernel, y);
      std::snprintf(line, sizeof line, "%.9g,%.9g\n", y, f);
      out << line;
    }
  }
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path,
             const std::string& noc_path, const std::string& out_path) {
  const sr::DisparityMap pred = sr::read_pfm(pred_path);
  const sr::DisparityMap gt = sr::read_pfm(gt_path);
  std::optional<sr::GrayImage> noc;
  if (!noc_path.empty()) noc = sr::read_image(noc_path);
  print_metrics(pred, gt, noc, out_path);
  return 0;
}

int cmd_bench(int width, int height, int shift, std::uint64_t seed,
              const std::string& left_path, const std::string& right_path,
              double max_disp, const std::string& predictor_name,
              bool box_filter, const CommonFlags& flags) {
  sr::GrayImage left, right;
  if (!left_path.empty() || !right_path.empty()) {
    if (left_path.empty() || right_path.empty()) {
      throw sr::InputError("bench: provide both --left and --right or neither");
    }
    left = sr::read_image(left_path);
    right = sr::read_image(right_path);
  } else {
    sr::StereoPair pair = sr::synthetic_pair(width, height, shift, seed);
    left = std::move(pair.left);
    right = std::move(pair.right);
  }

  const sr::RiskConfig cfg = make_risk_config(flags, sr::ErrorNorm::L1);
  const sr::Predictor predictor = predictor_from_string(predictor_name);
  const int threads = sr::resolve_threads(flags.threads);

  const auto t0 = std::chrono::steady_clock::now();
  sr::CostVolume vol =
      sr::build_cost_volume(left, right, sr::sample_coarse(max_disp),
                            flags.census_window, threads);
  if (box_filter) sr::box_filter_volume(vol);
  const auto t1 = std::chrono::steady_clock::now();
  std::vector<int> iters;
  sr::PredictStats stats;
  const sr::DisparityMap map =
      sr::predict_map(vol, cfg, predictor, flags.temperature, threads, &stats,
                      &iters);
  const auto t2 = std::chrono::steady_clock::now();

  const double vol_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  const double solve_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
  const double pixels = static_cast<double>(vol.width) * vol.height;

  // Iteration statistics restricted to pixels whose whole hypothesis set is
  // in frame, i.e. pmfs free of the out-of-frame sentinel plateau.
  const int margin = static_cast<int>(std::ceil(vol.hypotheses.back()));
  long long interior_n = 0, interior_sum = 0;
  for (int r = 0; r < map.height; ++r) {
    for (int c = margin; c < map.width; ++c) {
      if (!map.valid_at(r, c)) continue;
      ++interior_n;
      interior_sum += iters[map.index(r, c)];
    }
  }

  std::printf("image %dx%d, %d hypotheses, %d threads\n", vol.width,
              vol.height, vol.hyp_count, threads);
  std::printf("stage census+cost volume: %.1f ms\n", vol_ms);
  std::printf("stage solve (%s): %.1f ms, %.0f pixels/s\n",
              predictor_name.c_str(), solve_ms, pixels / (solve_ms / 1000.0));
  if (stats.pixels > 0) {
    std::printf("iterations mean %.2f max %d over %lld pixels\n",
                static_cast<double>(stats.iter_sum) / stats.pixels,
                stats.iter_max, stats.pixels);
  }
  if (interior_n > 0) {
    std::printf("iterations interior mean %.2f over %lld pixels\n",
                static_cast<double>(interior_sum) / interior_n, interior_n);
  }
  return 0;
}

int cmd_demo_fit(double target, double d_min, double d_max, int steps,
                 double lr, double sigma, const std::string& out_path) {
  if (d_max < d_min) throw sr::InputError("demo-fit: d-max below d-min");
  std::vector<double> hyps;
  for (double d = d_min; d <= d_max + 0.5; d += 1.0) hyps.push_back(d);
  sr::RiskConfig cfg = sr::fit_demo_config();
  cfg.kernel = sr::Kernel(sr::KernelType::Laplacian, sigma);
  const std::vector<sr::FitStep> trace =
      sr::fit_pmf_demo(target, hyps, steps, lr, cfg);

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw sr::IoError(out_path + ": cannot open for writing");
    out = &file;
  }
  *out << "step,loss,y\n";
  char line[80];
  for (std::size_t i = 0; i < trace.size(); ++i) {
    std::snprintf(line, sizeof line, "%zu,%.9g,%.9g\n", i, trace[i].loss,
                  trace[i].y);
    *out << line;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous disparity estimation by convex risk minimization"};
  app.require_subcommand(1);

  CommonFlags flags;

  // match
  auto* match = app.add_subcommand("match", "Census stereo matching pipeline");
  std::string left_path, right_path, gt_path, noc_path, out_path;
  sr::MatchOptions opt;
  std::string predictor_name = "l1risk";
  bool no_cascade = false;
  match->add_option("--left", left_path, "Left image (PGM or PNG)")->required();
  match->add_option("--right", right_path, "Right image")->required();
  match->add_option("--gt", gt_path, "Ground-truth disparity (PFM)");
  match->add_option("--noc", noc_path, "Non-occlusion mask image");
  match->add_option("--out", out_path, "Output disparity (PFM)")->required();
  match->add_option("--max-disp", opt.max_disp, "Disparity range");
  match->add_option("--predictor", predictor_name,
                    "expectation|l1risk|l2risk|huber");
  add_risk_flags(match, flags);
  match->add_option("--temperature", flags.temperature, "Softmax temperature");
  match->add_option("--census-window", flags.census_window, "Census window (odd, <= 7)");
  match->add_flag("--no-cascade", no_cascade, "Single full-resolution stage");
  match->add_flag("--box-filter,!--no-box-filter", opt.box_filter,
                  "5x5 cost-volume smoothing (default on)");
  match->add_option("--threads", flags.threads, "Worker threads (0 = auto)");

  // minimize
  auto* minimize = app.add_subcommand("minimize", "Solve one pmf for y*");
  std::string pmf_path, sweep_path, norm_name = "l1";
  minimize->add_option("pmf", pmf_path, "Pmf JSON file")->required();
  add_risk_flags(minimize, flags);
  minimize->add_option("--norm", norm_name, "l1|l2|huber");
  minimize->add_option("--sweep", sweep_path, "Write a CSV sweep of F(y)");

  // eval
  auto* eval = app.add_subcommand("eval", "Compare disparity maps");
  std::string pred_path, eval_gt, eval_noc, eval_out;
  eval->add_option("pred", pred_path, "Predicted disparity (PFM)")->required();
  eval->add_option("--gt", eval_gt, "Ground-truth disparity (PFM)")->required();
  eval->add_option("--noc", eval_noc, "Non-occlusion mask image");
  eval->add_option("--out", eval_out, "Report path (default stdout)");

  // bench
  auto* bench = app.add_subcommand("bench", "Timing and iteration statistics");
  int bench_w = 256, bench_h = 256, bench_shift = 5;
  std::uint64_t seed = 42;
  double bench_max_disp = 192.0;
  std::string bench_left, bench_right, bench_predictor = "l1risk";
  bench->add_option("--width", bench_w, "Synthetic pair width");
  bench->add_option("--height", bench_h, "Synthetic pair height");
  bench->add_option("--shift", bench_shift, "Synthetic pair disparity");
  bench->add_option("--seed", seed, "Synthetic pattern seed");
  bench->add_option("--left", bench_left, "Use this image instead");
  bench->add_option("--right", bench_right, "Use this image instead");
  bench->add_option("--max-disp", bench_max_disp, "Disparity range");
  bench->add_option("--predictor", bench_predictor,
                    "expectation|l1risk|l2risk|huber");
  bool bench_box_filter = true;
  bench->add_flag("--box-filter,!--no-box-filter", bench_box_filter,
                  "5x5 cost-volume smoothing (default on)");
  add_risk_flags(bench, flags);
  bench->add_option("--temperature", flags.temperature, "Softmax temperature");
  bench->add_option("--census-window", flags.census_window, "Census window");
  bench->add_option("--threads", flags.threads, "Worker threads (0 = auto)");

  // demo-fit
  auto* demo = app.add_subcommand("demo-fit",
                                  "Gradient-descent fit through the solver");
  double target = 4.3, d_min = 0.0, d_max = 9.0, lr = 0.5, demo_sigma = 1.1;
  int steps = 500;
  std::string demo_out;
  demo->add_option("--target", target, "Disparity to fit");
  demo->add_option("--d-min", d_min, "Lowest integer hypothesis");
  demo->add_option("--d-max", d_max, "Highest integer hypothesis");
  demo->add_option("--steps", steps, "Gradient steps");
  demo->add_option("--lr", lr, "Learning rate");
  demo->add_option("--sigma", demo_sigma, "Kernel bandwidth");
  demo->add_option("--out", demo_out, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (match->parsed()) {
      opt.predictor = predictor_from_string(predictor_name);
      opt.risk = make_risk_config(flags, sr::ErrorNorm::L1);
      if (opt.predictor == sr::Predictor::Huber) {
        opt.risk.norm = sr::ErrorNorm::Huber;
      }
      opt.temperature = flags.temperature;
      opt.census_window = flags.census_window;
      opt.cascade = !no_cascade;
      opt.threads = flags.threads;
      return cmd_match(left_path, right_path, gt_path, noc_path, out_path, opt);
    }
    if (minimize->parsed()) {
      return cmd_minimize(pmf_path, flags, minimize->count("--sigma") > 0,
                          minimize->count("--kernel") > 0, norm_name,
                          sweep_path);
    }
    if (eval->parsed()) {
      return cmd_eval(pred_path, eval_gt, eval_noc, eval_out);
    }
    if (bench->parsed()) {
      return cmd_bench(bench_w, bench_h, bench_shift, seed, bench_left,
                       bench_right, bench_max_disp, bench_predictor,
                       bench_box_filter, flags);
    }
    if (demo->parsed()) {
      return cmd_demo_fit(target, d_min, d_max, steps, lr, demo_sigma,
                          demo_out);
    }
  } catch (const sr::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const sr::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
