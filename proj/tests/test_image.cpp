#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "cbpfa/image.hpp"
#include "cbpfa/rng.hpp"

using namespace cbpfa;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

YCbCrImage random_rgb_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed, 0);
  ImagePlane r(w, h), g(w, h), b(w, h);
  for (std::size_t i = 0; i < r.size(); ++i) {
    r.data[i] = static_cast<double>(rng.next_u32() % 256);
    g.data[i] = static_cast<double>(rng.next_u32() % 256);
    b.data[i] = static_cast<double>(rng.next_u32() % 256);
  }
  YCbCrImage img;
  img.y = ImagePlane(w, h);
  img.cb = ImagePlane(w, h);
  img.cr = ImagePlane(w, h);
  for (std::size_t i = 0; i < r.size(); ++i)
    rgb_to_ycbcr(r.data[i], g.data[i], b.data[i], img.y.data[i],
                 img.cb.data[i], img.cr.data[i]);
  return img;
}

}  // namespace

TEST_SUITE("image") {

TEST_CASE("bt601 identity cases") {
  double y, cb, cr;
  rgb_to_ycbcr(255, 255, 255, y, cb, cr);
  CHECK(y == doctest::Approx(255.0).epsilon(1e-12));
  CHECK(cb == doctest::Approx(128.0).epsilon(1e-12));
  CHECK(cr == doctest::Approx(128.0).epsilon(1e-12));
  rgb_to_ycbcr(0, 0, 0, y, cb, cr);
  CHECK(y == doctest::Approx(0.0));
}

TEST_CASE("bt601 inverse is exact") {
  Rng rng(11, 0);
  for (int trial = 0; trial < 200; ++trial) {
    double r = 255.0 * rng.uniform();
    double g = 255.0 * rng.uniform();
    double b = 255.0 * rng.uniform();
    double y, cb, cr, r2, g2, b2;
    rgb_to_ycbcr(r, g, b, y, cb, cr);
    ycbcr_to_rgb(y, cb, cr, r2, g2, b2);
    CHECK(r2 == doctest::Approx(r).epsilon(1e-10));
    CHECK(g2 == doctest::Approx(g).epsilon(1e-10));
    CHECK(b2 == doctest::Approx(b).epsilon(1e-10));
  }
}

TEST_CASE("pixel quantization rounds half-up and clamps") {
  CHECK(quantize_pixel(0.5) == 1);
  CHECK(quantize_pixel(0.49999) == 0);
  CHECK(quantize_pixel(254.5) == 255);
  CHECK(quantize_pixel(-3.0) == 0);
  CHECK(quantize_pixel(300.0) == 255);
}

TEST_CASE("pgm round trip and gray chroma") {
  ImagePlane y(7, 5);
  for (std::size_t i = 0; i < y.size(); ++i)
    y.data[i] = static_cast<double>((i * 37) % 256);
  std::string path = temp_path("cbpfa_test_gray.pgm");
  save_plane(path, y);

  YCbCrImage back = load_image(path);
  REQUIRE(back.width() == 7);
  REQUIRE(back.height() == 5);
  for (std::size_t i = 0; i < y.size(); ++i) {
    CHECK(back.y.data[i] == doctest::Approx(y.data[i]));
    CHECK(back.cb.data[i] == 128.0);
    CHECK(back.cr.data[i] == 128.0);
  }
  std::filesystem::remove(path);
}

TEST_CASE("png round trip preserves bytes") {
  YCbCrImage img = random_rgb_image(13, 9, 5);
  std::string path = temp_path("cbpfa_test_rgb.png");
  save_image(path, img);
  YCbCrImage back = load_image(path);
  REQUIRE(back.width() == 13);
  REQUIRE(back.height() == 9);
  // One quantization already happened on save; reloading must match it.
  std::string path2 = temp_path("cbpfa_test_rgb2.png");
  save_image(path2, back);
  YCbCrImage back2 = load_image(path2);
  for (std::size_t i = 0; i < back.y.size(); ++i) {
    CHECK(back2.y.data[i] == back.y.data[i]);
    CHECK(back2.cb.data[i] == back.cb.data[i]);
    CHECK(back2.cr.data[i] == back.cr.data[i]);
  }
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("bmp round trip preserves bytes") {
  YCbCrImage img = random_rgb_image(6, 11, 7);
  std::string a = temp_path("cbpfa_test.bmp");
  save_image(a, img);
  YCbCrImage once = load_image(a);
  std::string b = temp_path("cbpfa_test2.bmp");
  save_image(b, once);
  YCbCrImage twice = load_image(b);
  for (std::size_t i = 0; i < once.y.size(); ++i)
    CHECK(twice.y.data[i] == once.y.data[i]);
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST_CASE("unreadable and malformed files raise") {
  CHECK_THROWS_AS(load_image(temp_path("does_not_exist.png")), ImageError);
  std::string path = temp_path("cbpfa_bogus.png");
  FILE* f = std::fopen(path.c_str(), "wb");
  std::fputs("not an image at all", f);
  std::fclose(f);
  CHECK_THROWS_AS(load_image(path), ImageError);
  std::filesystem::remove(path);
}

TEST_CASE("16-bit pgm is rejected with a bit-depth error") {
  std::string path = temp_path("cbpfa_16bit.pgm");
  FILE* f = std::fopen(path.c_str(), "wb");
  std::fputs("P5\n2 2\n65535\n", f);
  for (int i = 0; i < 8; ++i) std::fputc(0, f);
  std::fclose(f);
  CHECK_THROWS_WITH_AS(load_image(path),
                       doctest::Contains("bit depth"), ImageError);
  std::filesystem::remove(path);
}

}  // TEST_SUITE
