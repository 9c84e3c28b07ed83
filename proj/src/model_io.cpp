#include "cbpfa/model_io.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "cbpfa/rng.hpp"

namespace cbpfa {

namespace {

static_assert(std::endian::native == std::endian::little,
              "CBPD writer assumes a little-endian host");

constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

void put_f64(std::ostream& os, const double* data, std::size_t count) {
  os.write(reinterpret_cast<const char*>(data),
           static_cast<std::streamsize>(count * sizeof(double)));
}

void get_f64(std::istream& is, double* data, std::size_t count) {
  is.read(reinterpret_cast<char*>(data),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!is) throw ModelError("CBPD file truncated inside array block");
}

}  // namespace

void save_model(const std::string& path, const GlobalVariationalState& g,
                const PosteriorEstimate& est) {
  g.validate();
  const Eigen::Index M = g.M();
  const Eigen::Index K = g.K();
  if (M % 2 != 0) throw ModelError("coupled dimension must be even");

  nlohmann::json meta;
  meta["P"] = M / 2;
  meta["K"] = K;
  meta["patch_size"] = est.patch_size;
  meta["sr_ratio"] = est.sr_ratio;
  meta["hyperparameters"] = {
      {"c0", est.hyper.c0}, {"eta0", est.hyper.eta0}, {"c", est.hyper.c},
      {"d", est.hyper.d},   {"e", est.hyper.e},       {"f", est.hyper.f},
      {"K", est.hyper.K},
  };
  meta["rng"] = {{"algorithm", rng_algorithm_name()}, {"seed", est.seed}};
  meta["arrays"] = nlohmann::json::array({
      {{"name", "phi"}, {"rows", M}, {"cols", K}},
      {{"name", "Phi"}, {"rows", K}, {"cols", 1}},
      {{"name", "tau1"}, {"rows", K}, {"cols", 1}},
      {{"name", "tau2"}, {"rows", K}, {"cols", 1}},
      {{"name", "lambda"}, {"rows", 2}, {"cols", 1}},
      {{"name", "eps"}, {"rows", 2}, {"cols", 1}},
  });
  meta["method"] = est.method;
  meta["n_train_patches"] = est.n_train_patches;
  std::string meta_str = meta.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw ModelError("cannot open model file for writing: " + path);
  os.write("CBPD", 4);
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(meta_str.size()));
  os.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));

  put_f64(os, g.phi.data(), static_cast<std::size_t>(M * K));
  put_f64(os, g.Phi.data(), static_cast<std::size_t>(K));
  put_f64(os, g.tau1.data(), static_cast<std::size_t>(K));
  put_f64(os, g.tau2.data(), static_cast<std::size_t>(K));
  double lambda[2] = {g.lambda1, g.lambda2};
  put_f64(os, lambda, 2);
  double eps[2] = {g.eps1, g.eps2};
  put_f64(os, eps, 2);
  if (!os) throw ModelError("short write to model file: " + path);
}

ModelFile load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ModelError("cannot open model file: " + path);

  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "CBPD", 4) != 0)
    throw ModelError("not a CBPD model file: " + path);
  std::uint32_t version = get_u32(is);
  if (version != kVersion)
    throw ModelError("unsupported CBPD version " + std::to_string(version));
  std::uint32_t meta_len = get_u32(is);
  std::string meta_str(meta_len, '\0');
  is.read(meta_str.data(), meta_len);
  if (!is) throw ModelError("CBPD file truncated inside metadata");

  nlohmann::json meta = nlohmann::json::parse(meta_str);
  const Eigen::Index P = meta.at("P").get<Eigen::Index>();
  const Eigen::Index K = meta.at("K").get<Eigen::Index>();
  const Eigen::Index M = 2 * P;

  // The manifest must name the arrays this reader knows, in order.
  const char* expected[] = {"phi", "Phi", "tau1", "tau2", "lambda", "eps"};
  const auto& arrays = meta.at("arrays");
  if (arrays.size() != 6)
    throw ModelError("CBPD manifest must list six arrays");
  for (std::size_t i = 0; i < 6; ++i)
    if (arrays[i].at("name").get<std::string>() != expected[i])
      throw ModelError("unexpected CBPD array manifest entry: " +
                       arrays[i].at("name").get<std::string>());

  ModelFile out;
  GlobalVariationalState& g = out.state;
  g.phi.resize(M, K);
  g.Phi.resize(K);
  g.tau1.resize(K);
  g.tau2.resize(K);
  get_f64(is, g.phi.data(), static_cast<std::size_t>(M * K));
  get_f64(is, g.Phi.data(), static_cast<std::size_t>(K));
  get_f64(is, g.tau1.data(), static_cast<std::size_t>(K));
  get_f64(is, g.tau2.data(), static_cast<std::size_t>(K));
  double lambda[2], eps[2];
  get_f64(is, lambda, 2);
  get_f64(is, eps, 2);
  g.lambda1 = lambda[0];
  g.lambda2 = lambda[1];
  g.eps1 = eps[0];
  g.eps2 = eps[1];
  g.validate();

  PosteriorEstimate& est = out.estimate;
  est.dictionary = CoupledDictionary(P, K);
  est.dictionary.data = g.phi;
  est.pi_hat = g.pi_mean();
  est.gamma_hat = g.gamma_mean();
  est.alpha_hat = g.alpha_mean();
  est.patch_size = meta.at("patch_size").get<int>();
  est.sr_ratio = meta.at("sr_ratio").get<int>();
  const auto& hyper = meta.at("hyperparameters");
  est.hyper.c0 = hyper.at("c0").get<double>();
  est.hyper.eta0 = hyper.at("eta0").get<double>();
  est.hyper.c = hyper.at("c").get<double>();
  est.hyper.d = hyper.at("d").get<double>();
  est.hyper.e = hyper.at("e").get<double>();
  est.hyper.f = hyper.at("f").get<double>();
  est.hyper.K = hyper.at("K").get<int>();
  est.method = meta.value("method", "");
  est.seed = meta.at("rng").value("seed", std::uint64_t{0});
  est.n_train_patches = meta.value("n_train_patches", Eigen::Index{0});
  return out;
}

}  // namespace cbpfa
