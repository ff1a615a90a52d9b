#include <doctest.h>

#include <fstream>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "cossif/errors.hpp"
#include "cossif/image.hpp"
#include "testutil.hpp"

using namespace cossif;
using testutil::TempDir;

TEST_CASE("rescale to the same side is pixel-identical") {
  const Image img = testutil::pattern_image(64, 3);
  const Image out = rescale(img, 64);
  CHECK(out.pixels == img.pixels);
}

TEST_CASE("rescale reduces 256x256 to 64x64") {
  const Image img = testutil::pattern_image(256, 4);
  const Image out = rescale(img, 64);
  CHECK(out.width == 64);
  CHECK(out.height == 64);
  CHECK(out.pixels.size() == 64u * 64u * 3u);
}

TEST_CASE("rescale of a constant image preserves the value") {
  // 2x2 uniform gray down to a single pixel: any convex combination of
  // equal values is that value.
  const Image img = testutil::solid_image(2, 93, 93, 93);
  const Image out = rescale(img, 1);
  CHECK(out.width == 1);
  CHECK(out.at(0, 0, 0) == 93);
  CHECK(out.at(0, 0, 1) == 93);
  CHECK(out.at(0, 0, 2) == 93);

  const Image big = rescale(testutil::solid_image(5, 7, 200, 31), 13);
  for (int y = 0; y < 13; ++y) {
    for (int x = 0; x < 13; ++x) {
      CHECK(big.at(x, y, 0) == 7);
      CHECK(big.at(x, y, 1) == 200);
      CHECK(big.at(x, y, 2) == 31);
    }
  }
}

TEST_CASE("rescale rejects side 0") {
  const Image img = testutil::pattern_image(4, 5);
  CHECK_THROWS_AS(rescale(img, 0), DataError);
}

TEST_CASE("vectorize flattens R, G, B planes at raw/255") {
  const Image img = testutil::pattern_image(64, 6);
  const PixelVector v = vectorize(img, "img");
  REQUIRE(v.values.size() == 12288);
  CHECK(v.dim() == 12288);
  for (float x : v.values) {
    CHECK(x >= 0.0f);
    CHECK(x <= 1.0f);
  }
  // Plane order R || G || B, row-major within each plane.
  CHECK(v.values[0] == doctest::Approx(img.at(0, 0, 0) / 255.0));
  CHECK(v.values[64] == doctest::Approx(img.at(0, 1, 0) / 255.0));
  CHECK(v.values[64 * 64] == doctest::Approx(img.at(0, 0, 1) / 255.0));
  CHECK(v.values[2 * 64 * 64] == doctest::Approx(img.at(0, 0, 2) / 255.0));
}

TEST_CASE("vectorize of a single pixel") {
  Image img = testutil::solid_image(1, 255, 0, 127);
  const PixelVector v = vectorize(img, "px");
  REQUIRE(v.values.size() == 3);
  CHECK(v.values[0] == 1.0f);
  CHECK(v.values[1] == 0.0f);
  CHECK(v.values[2] == 127.0f / 255.0f);
}

TEST_CASE("constant-color image gives constant channel blocks") {
  const PixelVector v = vectorize(testutil::solid_image(8, 10, 20, 30), "c");
  for (int c = 0; c < 3; ++c) {
    const float expected = v.values[static_cast<std::size_t>(c) * 64];
    for (int i = 0; i < 64; ++i) {
      CHECK(v.values[static_cast<std::size_t>(c) * 64 + i] == expected);
    }
  }
}

TEST_CASE("all-black image is flagged as zero vector") {
  const PixelVector v = vectorize(testutil::solid_image(4, 0, 0, 0), "black");
  CHECK(is_zero_vector(v));
  CHECK(!is_zero_vector(vectorize(testutil::solid_image(4, 0, 1, 0), "dot")));
}

TEST_CASE("vectorize rejects non-square rasters") {
  Image img;
  img.width = 4;
  img.height = 2;
  img.pixels.resize(4 * 2 * 3, 0);
  CHECK_THROWS_AS(vectorize(img, "rect"), DataError);
}

TEST_CASE("png round trip preserves pixels") {
  TempDir tmp("png");
  const Image img = testutil::pattern_image(32, 8);
  const auto path = tmp.path() / "img.png";
  write_png(img, path);
  const Image back = decode_image(path);
  CHECK(back.width == 32);
  CHECK(back.pixels == img.pixels);
}

TEST_CASE("decode failures are data errors") {
  TempDir tmp("decode");
  CHECK_THROWS_AS(decode_image(tmp.path() / "missing.png"), DataError);

  const auto bad = tmp.path() / "corrupt.png";
  std::ofstream(bad, std::ios::binary) << "definitely not a png";
  CHECK_THROWS_AS(decode_image(bad), DataError);
}

TEST_CASE("grayscale replicates to three channels and alpha is dropped") {
  TempDir tmp("formats");

  const auto png_gray = tmp.path() / "gray.png";
  cv::Mat gray(16, 16, CV_8UC1);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) gray.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(x * 16 + y);
  }
  REQUIRE(cv::imwrite(png_gray.string(), gray));
  const Image g = decode_image(png_gray);
  REQUIRE(g.pixels.size() == 16u * 16u * 3u);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const auto v = gray.at<std::uint8_t>(y, x);
      CHECK(g.at(x, y, 0) == v);
      CHECK(g.at(x, y, 1) == v);
      CHECK(g.at(x, y, 2) == v);
    }
  }

  const auto png_rgba = tmp.path() / "rgba.png";
  cv::Mat rgba(8, 8, CV_8UC4, cv::Scalar(10, 20, 30, 128));  // BGRA
  REQUIRE(cv::imwrite(png_rgba.string(), rgba));
  const Image a = decode_image(png_rgba);
  REQUIRE(a.pixels.size() == 8u * 8u * 3u);
  CHECK(a.at(0, 0, 0) == 30);  // R
  CHECK(a.at(0, 0, 1) == 20);  // G
  CHECK(a.at(0, 0, 2) == 10);  // B
}

TEST_CASE("jpeg files decode") {
  TempDir tmp("jpeg");
  const auto jpg = tmp.path() / "img.jpg";
  cv::Mat mat(32, 32, CV_8UC3, cv::Scalar(40, 90, 160));
  REQUIRE(cv::imwrite(jpg.string(), mat));
  const Image img = decode_image(jpg);
  CHECK(img.width == 32);
  CHECK(img.height == 32);
}
