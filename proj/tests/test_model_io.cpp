#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cbpfa/generative.hpp"
#include "cbpfa/gibbs.hpp"
#include "cbpfa/model_io.hpp"

using namespace cbpfa;

namespace {

std::string temp_model(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_SUITE("model_io") {

TEST_CASE("state round trips bit-exactly") {
  Hyperparameters h;
  h.c0 = 2.0;
  h.eta0 = 0.5;
  h.c = h.d = h.e = h.f = 2.0;
  h.K = 5;
  GenerativeDraw draw = sample_generative(h, 8, 20, 71);
  auto [g, l] = gibbs_init(draw.x, h, 3, 71);

  PosteriorEstimate est;
  est.dictionary = CoupledDictionary(8, 5);
  est.dictionary.data = g.phi;
  est.pi_hat = g.pi_mean();
  est.gamma_hat = g.gamma_mean();
  est.alpha_hat = g.alpha_mean();
  est.patch_size = 4;
  est.sr_ratio = 2;
  est.hyper = h;
  est.method = "gibbs";
  est.seed = 71;
  est.n_train_patches = 20;

  std::string path = temp_model("cbpfa_roundtrip.cbpd");
  save_model(path, g, est);
  ModelFile back = load_model(path);

  CHECK((back.state.phi - g.phi).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.state.Phi - g.Phi).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.state.tau1 - g.tau1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.state.lambda1 == g.lambda1);
  CHECK(back.state.lambda2 == g.lambda2);
  CHECK(back.state.eps1 == g.eps1);
  CHECK(back.estimate.patch_size == 4);
  CHECK(back.estimate.sr_ratio == 2);
  CHECK(back.estimate.hyper.c0 == 2.0);
  CHECK(back.estimate.hyper.K == 5);
  CHECK(back.estimate.method == "gibbs");
  CHECK(back.estimate.seed == 71);
  CHECK(back.estimate.n_train_patches == 20);
  CHECK(back.estimate.gamma_hat ==
        doctest::Approx(g.gamma_mean()).epsilon(1e-15));
  std::filesystem::remove(path);
}

TEST_CASE("header starts with magic, version, and metadata length") {
  Hyperparameters h;
  h.K = 2;
  h.c = h.d = h.e = h.f = 1.0;
  GenerativeDraw draw = sample_generative(h, 2, 4, 73);
  auto [g, l] = gibbs_init(draw.x, h, 1, 73);
  PosteriorEstimate est;
  est.hyper = h;
  std::string path = temp_model("cbpfa_header.cbpd");
  save_model(path, g, est);

  std::ifstream is(path, std::ios::binary);
  char magic[4];
  is.read(magic, 4);
  CHECK(std::string(magic, 4) == "CBPD");
  std::uint32_t version = 0, meta_len = 0;
  is.read(reinterpret_cast<char*>(&version), 4);
  is.read(reinterpret_cast<char*>(&meta_len), 4);
  CHECK(version == 1);
  std::string meta(meta_len, '\0');
  is.read(meta.data(), meta_len);
  CHECK(meta.find("\"arrays\"") != std::string::npos);
  CHECK(meta.find("\"pcg32\"") != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("corrupt files are rejected") {
  std::string path = temp_model("cbpfa_corrupt.cbpd");
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOPE" << std::string(100, 'x');
  }
  CHECK_THROWS_AS(load_model(path), ModelError);
  CHECK_THROWS_AS(load_model(temp_model("missing_file.cbpd")), ModelError);
  std::filesystem::remove(path);
}

TEST_CASE("truncated array block is detected") {
  Hyperparameters h;
  h.K = 3;
  h.c = h.d = h.e = h.f = 1.0;
  GenerativeDraw draw = sample_generative(h, 3, 5, 79);
  auto [g, l] = gibbs_init(draw.x, h, 1, 79);
  PosteriorEstimate est;
  est.hyper = h;
  std::string path = temp_model("cbpfa_trunc.cbpd");
  save_model(path, g, est);

  auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 16);
  CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("truncated"),
                       ModelError);
  std::filesystem::remove(path);
}

}  // TEST_SUITE
