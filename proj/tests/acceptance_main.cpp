// Acceptance suite: one self-contained check per criterion, each printing
// a single PASS/FAIL line. Run with a criterion number (1-10) or with no
// argument for the full battery.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "cbpfa/batch_vb.hpp"
#include "cbpfa/elbo.hpp"
#include "cbpfa/eval.hpp"
#include "cbpfa/generative.hpp"
#include "cbpfa/gibbs.hpp"
#include "cbpfa/online_vb.hpp"
#include "cbpfa/patches.hpp"
#include "cbpfa/resample.hpp"
#include "cbpfa/rng.hpp"
#include "cbpfa/super_resolve.hpp"
#include "test_support.hpp"

using namespace cbpfa;
using cbpfa::testsupport::mean_matched_abs_cosine;
using cbpfa::testsupport::synthetic_scene;

namespace {

Hyperparameters default_hypers(int K) {
  Hyperparameters h;
  h.c0 = 2.0;
  h.eta0 = 0.5;
  h.c = h.d = h.e = h.f = 1e-6;
  h.K = K;
  return h;
}

Hyperparameters proper_hypers(int K) {
  Hyperparameters h = default_hypers(K);
  h.c = h.d = h.e = h.f = 2.0;
  return h;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------- 1
Outcome criterion_elbo_monotonicity() {
  double worst = 0.0;
  for (int instance = 0; instance < 10; ++instance) {
    Hyperparameters truth = proper_hypers(6 + (instance % 3));
    GenerativeOptions gen;
    gen.fixed_gamma = 50.0 + 400.0 * instance;
    gen.fixed_alpha = 1.0;
    GenerativeDraw draw =
        sample_generative(truth, 16, 200, 1000 + instance, gen);

    Hyperparameters fit = instance % 2 == 0 ? default_hypers(16)
                                            : proper_hypers(16);
    auto [g, l] = gibbs_init(draw.x, fit, 5, 77 + instance);
    double prev = compute_elbo(g, l, draw.x, fit);
    for (int sweep = 0; sweep < 8; ++sweep) {
      batch_vb_sweep(g, l, draw.x, fit);
      double elbo = compute_elbo(g, l, draw.x, fit);
      double rel = (elbo - prev) / std::abs(prev);
      worst = std::min(worst, rel);
      prev = elbo;
    }
  }
  Outcome out;
  out.pass = worst >= -1e-8;
  out.detail = "worst relative sweep change " + std::to_string(worst);
  return out;
}

// ---------------------------------------------------------------- 2
Outcome criterion_online_batch_equivalence() {
  Hyperparameters h = proper_hypers(16);
  GenerativeOptions gen;
  gen.fixed_gamma = 400.0;
  gen.fixed_alpha = 1.0;
  GenerativeDraw draw = sample_generative(h, 16, 400, 2024, gen);

  auto [g, l0] = gibbs_init(draw.x, h, 5, 99);
  LocalFitOptions fit;
  fit.seed = 1234;
  LocalState l = fit_local_state(g, draw.x, h, fit);
  GlobalVariationalState batch = compute_global_update(
      g, l, draw.x, h, static_cast<double>(draw.x.count()));

  LearningSchedule sched(0.0, 0.9, draw.x.count(), draw.x.count());
  OnlineStepOptions opts;
  opts.local_fit = fit;
  GlobalVariationalState online = online_step(g, draw.x, 1, sched, h, opts);

  double worst = 0.0;
  auto track = [&](double a, double b) {
    worst = std::max(worst, std::abs(a - b) / std::abs(b));
  };
  double phi_scale = batch.phi.cwiseAbs().maxCoeff();
  worst = std::max(worst,
                   (online.phi - batch.phi).cwiseAbs().maxCoeff() / phi_scale);
  for (Eigen::Index k = 0; k < batch.K(); ++k) {
    track(online.Phi[k], batch.Phi[k]);
    track(online.tau1[k], batch.tau1[k]);
    track(online.tau2[k], batch.tau2[k]);
  }
  track(online.lambda1, batch.lambda1);
  track(online.lambda2, batch.lambda2);
  track(online.eps1, batch.eps1);
  track(online.eps2, batch.eps2);

  Outcome out;
  out.pass = worst < 1e-10;
  out.detail = "max relative parameter gap " + std::to_string(worst);
  return out;
}

// ---------------------------------------------------------------- 3
struct GewekeStats {
  double gamma = 0.0, alpha = 0.0, z_sum = 0.0, d_sq = 0.0;
};

Outcome criterion_geweke() {
  const Eigen::Index P = 2, N = 4;
  Hyperparameters h = proper_hypers(2);
  const int draws = 50000;

  // Forward: independent draws of (parameters, data) from the prior.
  std::vector<GewekeStats> fwd(draws);
  for (int i = 0; i < draws; ++i) {
    GenerativeDraw d = sample_generative(h, P, N, 50000 + i);
    fwd[i] = {d.gamma, d.alpha, d.z.sum(), d.dictionary.data.squaredNorm()};
  }

  // Successive-conditional: alternate a Gibbs sweep with a data redraw.
  GenerativeDraw start = sample_generative(h, P, N, 7);
  PatchMatrix X = start.x;
  GibbsState st = init_gibbs_state(X, h, 11);
  st.gamma = start.gamma;
  st.alpha = start.alpha;
  std::vector<GewekeStats> chain(draws);
  for (int i = 0; i < draws; ++i) {
    gibbs_sweep(st, X, h);
    gibbs_resample_data(st, X);
    chain[i] = {st.gamma, st.alpha, st.Z.sum(), st.D.squaredNorm()};
  }

  auto field = [](const GewekeStats& s, int j) {
    switch (j) {
      case 0: return s.gamma;
      case 1: return s.alpha;
      case 2: return s.z_sum;
      default: return s.d_sq;
    }
  };
  auto mean_of = [&](const std::vector<GewekeStats>& v, int j) {
    double m = 0.0;
    for (const auto& s : v) m += field(s, j);
    return m / v.size();
  };
  auto iid_se = [&](const std::vector<GewekeStats>& v, int j, double m) {
    double var = 0.0;
    for (const auto& s : v) var += (field(s, j) - m) * (field(s, j) - m);
    return std::sqrt(var / (v.size() - 1.0) / v.size());
  };
  // Batch means absorb the chain autocorrelation.
  auto batch_se = [&](const std::vector<GewekeStats>& v, int j) {
    const int n_batches = 100;
    const int per = draws / n_batches;
    std::vector<double> means(n_batches, 0.0);
    for (int b = 0; b < n_batches; ++b) {
      for (int i = 0; i < per; ++i) means[b] += field(v[b * per + i], j);
      means[b] /= per;
    }
    double m = 0.0;
    for (double x : means) m += x;
    m /= n_batches;
    double var = 0.0;
    for (double x : means) var += (x - m) * (x - m);
    return std::sqrt(var / (n_batches - 1.0) / n_batches);
  };

  const char* names[4] = {"gamma", "alpha", "sum_z", "dict_sq"};
  Outcome out;
  out.pass = true;
  for (int j = 0; j < 4; ++j) {
    double mf = mean_of(fwd, j);
    double mc = mean_of(chain, j);
    double se = std::sqrt(std::pow(iid_se(fwd, j, mf), 2) +
                          std::pow(batch_se(chain, j), 2));
    double gap = std::abs(mf - mc);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s fwd=%.4f chain=%.4f gap=%.4f 3se=%.4f",
                  names[j], mf, mc, gap, 3.0 * se);
    if (!out.detail.empty()) out.detail += "; ";
    out.detail += buf;
    if (gap > 3.0 * se) out.pass = false;
  }
  return out;
}

// ---------------------------------------------------------------- 4
Outcome criterion_recovery() {
  // Sparse planted codes (mean usage 0.25, ~2 active factors per patch);
  // gamma fixed so the per-patch SNR is ~20 dB.
  Hyperparameters truth = proper_hypers(8);
  truth.c0 = 20.0;
  truth.eta0 = 0.25;
  GenerativeOptions gen;
  gen.fixed_gamma = 1600.0;
  gen.fixed_alpha = 1.0;
  GenerativeDraw draw = sample_generative(truth, 16, 2000, 777, gen);

  Hyperparameters fit = default_hypers(16);

  GibbsConfig gibbs_cfg;
  gibbs_cfg.burn_in = 500;
  gibbs_cfg.collect = 500;
  gibbs_cfg.seed = 5;
  GibbsRunResult gibbs = run_gibbs(draw.x, fit, gibbs_cfg);
  double gibbs_match = mean_matched_abs_cosine(
      draw.dictionary.data, gibbs.estimate.dictionary.data);

  VbOptions vb_opts;
  vb_opts.max_sweeps = 300;
  vb_opts.init_sweeps = 10;
  vb_opts.seed = 6;
  VbRunResult vb = run_batch_vb(draw.x, fit, vb_opts);
  double vb_match = mean_matched_abs_cosine(draw.dictionary.data,
                                            vb.estimate.dictionary.data);

  Outcome out;
  out.pass = gibbs_match >= 0.9 && vb_match >= 0.9;
  out.detail = "gibbs cosine " + std::to_string(gibbs_match) +
               ", vb cosine " + std::to_string(vb_match);
  return out;
}

// ---------------------------------------------------------------- 5
Outcome criterion_shrinkage() {
  Hyperparameters truth = proper_hypers(5);
  GenerativeOptions gen;
  gen.fixed_gamma = 1280.0;  // SNR ~ 20 dB at P=16, K_true=5
  gen.fixed_alpha = 1.0;
  GenerativeDraw draw = sample_generative(truth, 16, 1000, 555, gen);

  Hyperparameters fit = default_hypers(64);
  GibbsConfig cfg;
  cfg.burn_in = 150;
  cfg.collect = 150;
  cfg.seed = 9;
  GibbsRunResult run = run_gibbs(draw.x, fit, cfg);

  std::vector<int> collection(
      run.stats.used_elements.begin() + run.stats.burn_in,
      run.stats.used_elements.end());
  std::sort(collection.begin(), collection.end());
  double median = collection[collection.size() / 2];

  Outcome out;
  out.pass = median >= 4.0 && median <= 12.0;
  out.detail = "median used elements " + std::to_string(median) +
               " (truth 5, truncation 64)";
  return out;
}

// ---------------------------------------------------------------- 6
Outcome criterion_code_round_trip() {
  const Eigen::Index P = 64, K = 32;
  PosteriorEstimate est;
  est.dictionary = CoupledDictionary(P, K);
  Rng rng(66, 0);
  for (Eigen::Index k = 0; k < K; ++k)
    for (Eigen::Index j = 0; j < 2 * P; ++j)
      est.dictionary.data(j, k) = rng.normal();
  for (Eigen::Index k = 0; k < K; ++k) {  // orthonormal LR halves
    auto lr = est.dictionary.data.topRows(P);
    for (Eigen::Index j = 0; j < k; ++j) {
      double proj = lr.col(k).dot(lr.col(j));
      est.dictionary.data.col(k) -= proj * est.dictionary.data.col(j);
    }
    est.dictionary.data.col(k) /=
        est.dictionary.data.col(k).topRows(P).norm();
  }
  est.pi_hat = Eigen::VectorXd::Constant(K, 0.5);
  est.gamma_hat = 1e8;
  est.alpha_hat = 1.0;

  SRConfig cfg;
  cfg.code_iters = 40;
  cfg.code_init_sweeps = 3;

  int ok = 0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    cfg.seed = 900 + trial;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(K);
    int nz = 1 + static_cast<int>(rng.next_u32() % 3);
    for (int t = 0; t < nz; ++t)
      w[rng.next_u32() % K] = rng.normal() + (rng.bernoulli(0.5) ? 2.0 : -2.0);
    PatchMatrix lr;
    lr.patch_size = 8;
    lr.stride = 1;
    lr.data = est.dictionary.lr_half() * w;
    lr.coords = {{0, 0}};
    if (lr.data.norm() == 0.0) {
      ++ok;  // empty support synthesizes zero exactly
      continue;
    }
    LocalState codes = infer_codes_lr(lr, est, cfg);
    PatchMatrix hr =
        synthesize_hr(codes, est, Eigen::VectorXd::Zero(1), lr, false);
    Eigen::VectorXd expect = est.dictionary.hr_half() * w;
    double rel = (hr.data.col(0) - expect).norm() / expect.norm();
    if (rel < 0.05) ++ok;
  }
  Outcome out;
  out.pass = ok >= 190;
  out.detail = std::to_string(ok) + "/200 trials under 5% relative error";
  return out;
}

// ---------------------------------------------------------------- 7
Outcome criterion_end_to_end_sr() {
  const int size = 96, ratio = 2, patch = 8;

  std::vector<PatchMatrix> parts;
  for (int i = 0; i < 10; ++i) {
    ImagePlane scene = synthetic_scene(size, size, 7000 + i);
    parts.push_back(build_coupled_patches(scene, ratio, patch, 1));
  }
  PatchMatrix all = concat_patches(parts);
  PatchMatrix X = subsample_columns(all, 40000, 3);

  Hyperparameters h = default_hypers(64);
  LearningSchedule sched(3.0, 0.501, 2000, 0);
  OnlineVbOptions opts;
  opts.passes = 2;
  opts.seed = 8;
  OnlineRunResult run = run_online_vb(X, h, sched, opts);
  PosteriorEstimate est = run.estimate;
  est.patch_size = patch;
  est.sr_ratio = ratio;

  SRConfig cfg;
  cfg.patch_size = patch;
  cfg.sr_ratio = ratio;
  cfg.stride = 2;
  cfg.code_iters = 20;
  cfg.seed = 4;

  Outcome out;
  out.pass = true;
  int wins = 0;
  for (int i = 0; i < 3; ++i) {
    ImagePlane truth = synthetic_scene(size, size, 9100 + i);
    YCbCrImage lr;
    lr.y = downsample(truth, ratio);
    lr.cb = ImagePlane(size / ratio, size / ratio, 128.0);
    lr.cr = ImagePlane(size / ratio, size / ratio, 128.0);

    ImagePlane sr = super_resolve(lr, est, cfg).y;
    ImagePlane bic = resize_bicubic(lr.y, size, size);
    double sr_db = psnr(truth, sr).db;
    double bic_db = psnr(truth, bic).db;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "img%d sr=%.3f bicubic=%.3f ", i, sr_db,
                  bic_db);
    out.detail += buf;
    if (sr_db < bic_db - 0.1) out.pass = false;
    if (sr_db > bic_db) ++wins;
  }
  if (wins < 2) out.pass = false;
  out.detail += "wins=" + std::to_string(wins) + "/3";
  return out;
}

// ---------------------------------------------------------------- 8
Outcome criterion_back_projection() {
  SRConfig cfg;
  cfg.sr_ratio = 2;
  cfg.postprocess_c = 0.7;
  cfg.postprocess_iters = 30;
  cfg.postprocess_step = 0.1;

  ImagePlane hr(16, 16), anchor(16, 16);
  Rng rng(88, 0);
  for (double& v : hr.data) v = 120.0 + 25.0 * rng.normal();
  hr.clamp_range();
  ImagePlane lr = downsample(hr, 2);
  for (std::size_t i = 0; i < anchor.size(); ++i)
    anchor.data[i] = std::clamp(hr.data[i] + 8.0 * rng.normal(), 0.0, 255.0);

  double before = back_project_objective(anchor, lr, anchor, cfg);
  ImagePlane polished = back_project(anchor, lr, cfg);
  double after = back_project_objective(polished, lr, anchor, cfg);
  bool non_increasing = after <= before;

  // Analytic vs central-difference gradient, relative agreement.
  ImagePlane grad = back_project_gradient(anchor, lr, anchor, cfg);
  double worst_rel = 0.0;
  Rng dir_rng(89, 0);
  ImagePlane dir(16, 16);
  for (double& v : dir.data) v = dir_rng.normal();
  double h = 1e-5;
  ImagePlane xp = anchor, xm = anchor;
  for (std::size_t i = 0; i < dir.size(); ++i) {
    xp.data[i] += h * dir.data[i];
    xm.data[i] -= h * dir.data[i];
  }
  double fd = (back_project_objective(xp, lr, anchor, cfg) -
               back_project_objective(xm, lr, anchor, cfg)) /
              (2.0 * h);
  double dot = 0.0;
  for (std::size_t i = 0; i < dir.size(); ++i)
    dot += grad.data[i] * dir.data[i];
  worst_rel = std::abs(dot - fd) / std::abs(fd);

  Outcome out;
  out.pass = non_increasing && worst_rel < 1e-5;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "objective %.3f -> %.3f, directional-derivative rel err %.2e",
                before, after, worst_rel);
  out.detail = buf;
  return out;
}

// ---------------------------------------------------------------- 9
Outcome criterion_pipeline_exactness() {
  Outcome out;
  out.pass = true;

  PsnrResult uniform = psnr(ImagePlane(10, 10, 50.0), ImagePlane(10, 10, 55.0));
  if (std::abs(uniform.db - 34.15140352195873) > 1e-4) {
    out.pass = false;
    out.detail += "psnr closed form off; ";
  }

  // Integer-valued plane: extract/reassemble must be bit-exact.
  Rng rng(99, 0);
  ImagePlane img(23, 19);
  for (double& v : img.data) v = static_cast<double>(rng.next_u32() % 256);
  for (int stride : {1, 2, 3, 5}) {
    PatchMatrix patches = extract_patches(img, 7, stride);
    ImagePlane back = reassemble(patches, 23, 19);
    for (std::size_t i = 0; i < img.size(); ++i)
      if (back.data[i] != img.data[i]) {
        out.pass = false;
        out.detail += "round trip not bit-exact at stride " +
                      std::to_string(stride) + "; ";
        break;
      }
  }

  ImagePlane flat(9, 7, 42.0);
  auto check_constant = [&](const ImagePlane& p, const char* what) {
    for (double v : p.data)
      if (std::abs(v - 42.0) > 1e-9) {
        out.pass = false;
        out.detail += std::string(what) + " breaks constants; ";
        return;
      }
  };
  check_constant(resize_bicubic(flat, 21, 13), "bicubic");
  check_constant(resize_bilinear(flat, 21, 13), "bilinear");
  check_constant(resize_nearest(flat, 21, 13), "nearest");
  check_constant(downsample(ImagePlane(8, 8, 42.0), 2), "downsample");

  if (out.detail.empty()) out.detail = "psnr, round trip, constants all exact";
  return out;
}

// ---------------------------------------------------------------- 10
Outcome criterion_schedule() {
  Outcome out;
  out.pass = true;

  LearningSchedule paper(3.0, 0.501, 10, 100);
  double rho1 = step_size(1, paper);
  if (std::abs(rho1 - 0.49930733305051445) > 1e-6) {
    out.pass = false;
    out.detail += "step_size(1) off; ";
  }

  double prev = 2.0;
  for (int t = 1; t <= 1000000; t += (t < 1000 ? 1 : 997)) {
    double rho = step_size(t, paper);
    if (!(rho > 0.0) || !(rho < prev)) {
      out.pass = false;
      out.detail += "schedule not positive/decreasing; ";
      break;
    }
    prev = rho;
  }

  bool rejected = false;
  try {
    LearningSchedule bad(3.0, 0.5, 10, 100);
  } catch (const ModelError&) {
    rejected = true;
  }
  try {
    LearningSchedule bad(3.0, 1.5, 10, 100);
    rejected = false;
  } catch (const ModelError&) {
  }
  if (!rejected) {
    out.pass = false;
    out.detail += "kappa bounds not enforced; ";
  }
  if (out.detail.empty())
    out.detail = "rho(1)=" + std::to_string(rho1) +
                 ", strictly decreasing, kappa bounds enforced";
  return out;
}

struct Criterion {
  int number;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "ELBO monotonicity", criterion_elbo_monotonicity},
    {2, "online/batch degenerate equivalence", criterion_online_batch_equivalence},
    {3, "Gibbs joint-distribution check", criterion_geweke},
    {4, "synthetic posterior recovery", criterion_recovery},
    {5, "nonparametric shrinkage", criterion_shrinkage},
    {6, "noiseless code round trip", criterion_code_round_trip},
    {7, "desk-scale end-to-end SR", criterion_end_to_end_sr},
    {8, "back-projection contract", criterion_back_projection},
    {9, "PSNR and pipeline exactness", criterion_pipeline_exactness},
    {10, "schedule properties", criterion_schedule},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  if (argc > 1) only = std::atoi(argv[1]);

  bool all_pass = true;
  for (const Criterion& c : kCriteria) {
    if (only != 0 && c.number != only) continue;
    auto start = std::chrono::steady_clock::now();
    Outcome result;
    try {
      result = c.run();
    } catch (const std::exception& ex) {
      result.pass = false;
      result.detail = std::string("exception: ") + ex.what();
    }
    double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::printf("%s criterion %d (%s): %s [%.1fs]\n",
                result.pass ? "PASS" : "FAIL", c.number, c.name,
                result.detail.c_str(), secs);
    std::fflush(stdout);
    all_pass = all_pass && result.pass;
  }
  return all_pass ? 0 : 1;
}
