#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cbpfa/batch_vb.hpp"
#include "cbpfa/eval.hpp"
#include "cbpfa/gibbs.hpp"
#include "cbpfa/image.hpp"
#include "cbpfa/model_io.hpp"
#include "cbpfa/online_vb.hpp"
#include "cbpfa/patches.hpp"
#include "cbpfa/resample.hpp"
#include "cbpfa/super_resolve.hpp"
#include "cbpfa/threading.hpp"

namespace {

using namespace cbpfa;

struct TrainArgs {
  std::string input_dir;
  std::string output;
  std::string method = "gibbs";
  std::string trace_path;
  int ratio = 2;
  int patch_size = 8;
  int train_stride = 1;
  long max_patches = 100000;
  Hyperparameters hyper;
  // gibbs
  int burn_in = 1500;
  int collect = 1500;
  int thin = 1;
  // batch vb
  double tol = 1e-5;
  int max_sweeps = 200;
  int init_sweeps = 5;
  // online vb
  long mini_batch = 5000;
  double kappa = 0.501;
  double rho0 = 3.0;
  int passes = 1;
  bool paper_literal = false;
  std::uint64_t seed = 0;
};

PatchMatrix gather_training_patches(const TrainArgs& a) {
  std::vector<std::string> files = list_image_files(a.input_dir);
  if (files.empty())
    throw ImageError("no images (.png/.pgm/.bmp) in " + a.input_dir);
  std::vector<PatchMatrix> parts;
  parts.reserve(files.size());
  for (const std::string& path : files) {
    YCbCrImage img = load_image(path);
    int w = img.width() - img.width() % a.ratio;
    int h = img.height() - img.height() % a.ratio;
    if (w < a.patch_size || h < a.patch_size) {
      std::fprintf(stderr, "warning: %s too small, skipped\n", path.c_str());
      continue;
    }
    ImagePlane y = img.y.cropped(w, h);
    parts.push_back(
        build_coupled_patches(y, a.ratio, a.patch_size, a.train_stride));
  }
  if (parts.empty()) throw ImageError("no usable training images");
  PatchMatrix all = concat_patches(parts);
  std::fprintf(stderr, "extracted %lld coupled patches from %zu images\n",
               static_cast<long long>(all.count()), parts.size());
  return subsample_columns(all, a.max_patches, a.seed);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw ImageError("cannot write " + path);
  os << text;
}

int cmd_train(const TrainArgs& a) {
  a.hyper.validate();
  PatchMatrix X = gather_training_patches(a);

  GlobalVariationalState g;
  PosteriorEstimate est;
  std::string trace;

  if (a.method == "gibbs") {
    GibbsConfig cfg;
    cfg.burn_in = a.burn_in;
    cfg.collect = a.collect;
    cfg.thin = a.thin;
    cfg.seed = a.seed;
    GibbsRunResult run = run_gibbs(X, a.hyper, cfg);
    g = std::move(run.state);
    est = std::move(run.estimate);
    std::string csv = "sweep,loglik,used_elements,gamma,alpha\n";
    for (std::size_t s = 0; s < run.stats.loglik.size(); ++s) {
      char line[160];
      std::snprintf(line, sizeof(line), "%zu,%.6f,%d,%.8g,%.8g\n", s + 1,
                    run.stats.loglik[s], run.stats.used_elements[s],
                    run.stats.gamma_trace[s], run.stats.alpha_trace[s]);
      csv += line;
    }
    trace = std::move(csv);
  } else if (a.method == "vb") {
    VbOptions opts;
    opts.tol = a.tol;
    opts.max_sweeps = a.max_sweeps;
    opts.init_sweeps = a.init_sweeps;
    opts.seed = a.seed;
    opts.paper_literal_updates = a.paper_literal;
    VbRunResult run = run_batch_vb(X, a.hyper, opts);
    g = std::move(run.g);
    est = std::move(run.estimate);
    std::string csv = "sweep,elbo,used_elements\n";
    for (const auto& tp : run.trace) {
      char line[120];
      std::snprintf(line, sizeof(line), "%d,%.6f,%d\n", tp.sweep, tp.elbo,
                    tp.used_elements);
      csv += line;
    }
    trace = std::move(csv);
  } else if (a.method == "online") {
    LearningSchedule sched(a.rho0, a.kappa, a.mini_batch, 0);
    OnlineVbOptions opts;
    opts.passes = a.passes;
    opts.init_sweeps = a.init_sweeps;
    opts.seed = a.seed;
    opts.step.paper_literal_updates = a.paper_literal;
    OnlineRunResult run = run_online_vb(X, a.hyper, sched, opts);
    g = std::move(run.g);
    est = std::move(run.estimate);
    std::string csv = "t,rho,elbo_batch_estimate,used_elements,heldout_psnr\n";
    for (const auto& tp : run.trace) {
      char line[160];
      std::snprintf(line, sizeof(line), "%d,%.8g,%.6f,%d,%s\n", tp.t, tp.rho,
                    tp.elbo_batch_estimate, tp.used_elements,
                    tp.heldout_psnr < 0 ? "" : std::to_string(
                                                   tp.heldout_psnr).c_str());
      csv += line;
    }
    trace = std::move(csv);
  } else {
    std::fprintf(stderr, "unknown method: %s\n", a.method.c_str());
    return 2;
  }

  est.patch_size = a.patch_size;
  est.sr_ratio = a.ratio;
  save_model(a.output, g, est);
  std::fprintf(stderr, "model written to %s\n", a.output.c_str());
  if (!a.trace_path.empty()) write_text(a.trace_path, trace);
  return 0;
}

struct SrArgs {
  std::string model;
  std::string input;
  std::string output;
  std::string ground_truth;
  SRConfig cfg;
  bool no_postprocess = false;
};

int cmd_sr(SrArgs& a) {
  ModelFile mf = load_model(a.model);
  a.cfg.patch_size = mf.estimate.patch_size;
  a.cfg.sr_ratio = mf.estimate.sr_ratio;
  a.cfg.postprocess = !a.no_postprocess;
  a.cfg.validate();

  YCbCrImage lr = load_image(a.input);
  YCbCrImage out = super_resolve(lr, mf.estimate, a.cfg);
  save_image(a.output, out);
  std::fprintf(stderr, "wrote %dx%d image to %s\n", out.width(), out.height(),
               a.output.c_str());

  if (!a.ground_truth.empty()) {
    YCbCrImage gt = load_image(a.ground_truth);
    int w = gt.width() - gt.width() % a.cfg.sr_ratio;
    int h = gt.height() - gt.height() % a.cfg.sr_ratio;
    ImagePlane gt_y = gt.y.cropped(w, h);
    if (gt_y.width != out.width() || gt_y.height != out.height()) {
      std::fprintf(stderr, "ground truth size mismatch after cropping\n");
      return 2;
    }
    ImagePlane bic = resize_bicubic(lr.y, w, h);
    PsnrResult sr_psnr = psnr(gt_y, out.y);
    PsnrResult bic_psnr = psnr(gt_y, bic);
    std::printf("psnr_sr=%s\n", sr_psnr.identical
                                    ? "identical"
                                    : std::to_string(sr_psnr.db).c_str());
    std::printf("psnr_bicubic=%s\n",
                bic_psnr.identical ? "identical"
                                   : std::to_string(bic_psnr.db).c_str());
  }
  return 0;
}

struct DownscaleArgs {
  std::string input;
  std::string output;
  int ratio = 2;
};

int cmd_downscale(const DownscaleArgs& a) {
  YCbCrImage img = load_image(a.input);
  int w = img.width() - img.width() % a.ratio;
  int h = img.height() - img.height() % a.ratio;
  if (w < a.ratio || h < a.ratio) {
    std::fprintf(stderr, "image too small for ratio %d\n", a.ratio);
    return 2;
  }
  YCbCrImage out;
  out.y = downsample(img.y.cropped(w, h), a.ratio);
  out.cb = downsample(img.cb.cropped(w, h), a.ratio);
  out.cr = downsample(img.cr.cropped(w, h), a.ratio);
  save_image(a.output, out);
  return 0;
}

struct EvalArgs {
  std::string test_dir;
  std::string model;
  std::string out_path;
  std::vector<std::string> methods = {"nearest", "bilinear", "bicubic"};
  BenchmarkConfig cfg;
};

int cmd_eval(EvalArgs& a) {
  std::vector<std::string> files = list_image_files(a.test_dir);
  if (files.empty()) {
    std::fprintf(stderr, "no images in %s\n", a.test_dir.c_str());
    return 2;
  }
  a.cfg.methods = a.methods;

  ModelFile mf;
  const PosteriorEstimate* model = nullptr;
  bool wants_bp = false;
  for (const auto& m : a.methods) wants_bp |= (m == "bp");
  if (wants_bp) {
    if (a.model.empty()) {
      std::fprintf(stderr, "method 'bp' requires --model\n");
      return 2;
    }
    mf = load_model(a.model);
    a.cfg.sr.patch_size = mf.estimate.patch_size;
    a.cfg.sr.sr_ratio = mf.estimate.sr_ratio;
    if (mf.estimate.sr_ratio != a.cfg.sr_ratio) {
      std::fprintf(stderr, "model ratio %d does not match --ratio %d\n",
                   mf.estimate.sr_ratio, a.cfg.sr_ratio);
      return 2;
    }
    model = &mf.estimate;
  }

  BenchmarkReport report = run_benchmark(files, model, a.cfg);
  report.model_id = a.model;
  std::printf("%s", report.to_table().c_str());
  if (!a.out_path.empty()) write_text(a.out_path, report.to_csv());
  return report.failed_images > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coupled beta-process dictionary learning and image "
               "super-resolution"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a key=value file");
  app.allow_config_extras(false);

  int threads = 0;
  app.add_option("--threads", threads,
                 "Worker threads (0 = all cores)")
      ->envname("CBPFA_THREADS")
      ->capture_default_str();

  TrainArgs t;
  CLI::App* train = app.add_subcommand("train", "Learn a coupled dictionary");
  train->add_option("--input", t.input_dir, "Directory of HR training images")
      ->required();
  train->add_option("--output", t.output, "Output model file (CBPD)")
      ->required();
  train->add_option("--method", t.method, "gibbs | vb | online")
      ->check(CLI::IsMember({"gibbs", "vb", "online"}))
      ->capture_default_str();
  train->add_option("--ratio", t.ratio, "Super-resolution ratio")
      ->check(CLI::Range(2, 8))->capture_default_str();
  train->add_option("--patch-size", t.patch_size, "Patch side length")
      ->check(CLI::Range(2, 64))->capture_default_str();
  train->add_option("--train-stride", t.train_stride,
                    "Stride for training patch extraction")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--max-patches", t.max_patches,
                    "Training patch budget after subsampling")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--K", t.hyper.K, "Truncation level")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--c0", t.hyper.c0, "Beta-process concentration")
      ->capture_default_str();
  train->add_option("--eta0", t.hyper.eta0, "Beta-process mean")
      ->capture_default_str();
  train->add_option("--c", t.hyper.c, "Gamma shape for noise precision")
      ->capture_default_str();
  train->add_option("--d", t.hyper.d, "Gamma rate for noise precision")
      ->capture_default_str();
  train->add_option("--e", t.hyper.e, "Gamma shape for weight precision")
      ->capture_default_str();
  train->add_option("--f", t.hyper.f, "Gamma rate for weight precision")
      ->capture_default_str();
  train->add_option("--burn-in", t.burn_in, "Gibbs burn-in sweeps")
      ->capture_default_str();
  train->add_option("--collect", t.collect, "Gibbs collection sweeps")
      ->capture_default_str();
  train->add_option("--thin", t.thin, "Gibbs thinning interval")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--tol", t.tol, "Relative ELBO improvement stop")
      ->capture_default_str();
  train->add_option("--max-sweeps", t.max_sweeps, "Batch VB sweep cap")
      ->capture_default_str();
  train->add_option("--init-sweeps", t.init_sweeps,
                    "MCMC warm-start sweeps for VB")
      ->capture_default_str();
  train->add_option("--mini-batch", t.mini_batch, "Online VB mini-batch size")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--kappa", t.kappa, "Forgetting rate in (0.5, 1]")
      ->capture_default_str();
  train->add_option("--rho0", t.rho0, "Learning-rate delay")
      ->capture_default_str();
  train->add_option("--passes", t.passes, "Online VB passes over the data")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train->add_flag("--paper-literal-updates", t.paper_literal,
                  "Use the update equations exactly as published");
  train->add_option("--trace", t.trace_path, "Write a per-sweep trace CSV");
  train->add_option("--seed", t.seed, "RNG seed")->capture_default_str();

  SrArgs s;
  CLI::App* sr = app.add_subcommand("sr", "Super-resolve an LR image");
  sr->add_option("--model", s.model, "Trained CBPD model")->required();
  sr->add_option("--input", s.input, "LR input image")->required();
  sr->add_option("--output", s.output, "HR output image")->required();
  sr->add_option("--ground-truth", s.ground_truth,
                 "HR reference; prints PSNR vs bicubic");
  sr->add_option("--stride", s.cfg.stride, "Reconstruction stride")
      ->capture_default_str();
  sr->add_option("--code-iters", s.cfg.code_iters,
                 "Local inference sweeps per patch")
      ->capture_default_str();
  std::string inference = "vb";
  sr->add_option("--code-inference", inference, "vb | gibbs")
      ->check(CLI::IsMember({"vb", "gibbs"}))->capture_default_str();
  sr->add_flag("--soft-codes", s.cfg.soft_codes,
               "Use nu.*theta instead of thresholded codes");
  sr->add_flag("--no-postprocess", s.no_postprocess,
               "Skip the back-projection step");
  sr->add_option("--postprocess-c", s.cfg.postprocess_c,
                 "Back-projection anchor weight")
      ->capture_default_str();
  sr->add_option("--postprocess-iters", s.cfg.postprocess_iters,
                 "Back-projection iterations")
      ->capture_default_str();
  sr->add_option("--postprocess-step", s.cfg.postprocess_step,
                 "Back-projection initial step")
      ->capture_default_str();
  sr->add_flag("--postprocess-literal", s.cfg.postprocess_literal_objective,
               "Keep the downsampling operator in the anchor term");
  sr->add_option("--seed", s.cfg.seed, "RNG seed")->capture_default_str();

  DownscaleArgs d;
  CLI::App* down = app.add_subcommand("downscale",
                                      "Produce an LR image from an HR image");
  down->add_option("--input", d.input, "HR input image")->required();
  down->add_option("--output", d.output, "LR output image")->required();
  down->add_option("--ratio", d.ratio, "Reduction ratio")
      ->check(CLI::Range(2, 8))->capture_default_str();

  EvalArgs e;
  CLI::App* ev = app.add_subcommand("eval", "PSNR benchmark over a directory");
  ev->add_option("--test-dir", e.test_dir, "Ground-truth HR images")
      ->required();
  ev->add_option("--model", e.model, "CBPD model (for method 'bp')");
  ev->add_option("--methods", e.methods,
                 "Methods: nearest bilinear bicubic bp")
      ->delimiter(',')->capture_default_str();
  ev->add_option("--ratio", e.cfg.sr_ratio, "Super-resolution ratio")
      ->check(CLI::Range(2, 8))->capture_default_str();
  ev->add_option("--out", e.out_path, "Write the report CSV here");
  ev->add_option("--stride", e.cfg.sr.stride, "Reconstruction stride for bp")
      ->capture_default_str();
  ev->add_option("--code-iters", e.cfg.sr.code_iters,
                 "Local inference sweeps for bp")
      ->capture_default_str();
  ev->add_flag("--shave-border", e.cfg.shave_border,
               "Crop a patch-sized border before PSNR");
  ev->add_option("--seed", e.cfg.sr.seed, "RNG seed")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  set_thread_count(threads);

  try {
    if (train->parsed()) return cmd_train(t);
    if (sr->parsed()) {
      s.cfg.code_inference = inference == "gibbs"
                                 ? SRConfig::CodeInference::kGibbs
                                 : SRConfig::CodeInference::kVb;
      return cmd_sr(s);
    }
    if (down->parsed()) return cmd_downscale(d);
    if (ev->parsed()) return cmd_eval(e);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 0;
}
