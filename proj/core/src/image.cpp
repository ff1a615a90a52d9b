#include "cossif/image.hpp"

#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "cossif/errors.hpp"

namespace cossif {

Image decode_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw DataError("image file not found: " + path.string());
  }
  cv::Mat mat;
  try {
    // IMREAD_COLOR yields 3-channel BGR for every supported input:
    // grayscale is replicated, alpha is dropped.
    mat = cv::imread(path.string(), cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw DataError("failed to decode " + path.string() + ": " + e.what());
  }
  if (mat.empty()) {
    throw DataError("failed to decode " + path.string());
  }
  if (mat.type() != CV_8UC3) {
    throw DataError("unsupported pixel format in " + path.string());
  }

  Image image;
  image.width = mat.cols;
  image.height = mat.rows;
  image.pixels.resize(static_cast<std::size_t>(mat.cols) * mat.rows * 3);
  for (int y = 0; y < mat.rows; ++y) {
    const cv::Vec3b* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < mat.cols; ++x) {
      image.at(x, y, 0) = row[x][2];  // BGR -> RGB
      image.at(x, y, 1) = row[x][1];
      image.at(x, y, 2) = row[x][0];
    }
  }
  return image;
}

void write_png(const Image& image, const std::filesystem::path& path) {
  cv::Mat mat(image.height, image.width, CV_8UC3);
  for (int y = 0; y < image.height; ++y) {
    cv::Vec3b* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width; ++x) {
      row[x][0] = image.at(x, y, 2);
      row[x][1] = image.at(x, y, 1);
      row[x][2] = image.at(x, y, 0);
    }
  }
  const std::vector<int> params = {cv::IMWRITE_PNG_COMPRESSION, 6};
  if (!cv::imwrite(path.string(), mat, params)) {
    throw DataError("failed to write PNG: " + path.string());
  }
}

Image rescale(const Image& image, int side) {
  if (side < 1) throw DataError("rescale: side must be >= 1");
  if (image.width < 1 || image.height < 1) {
    throw DataError("rescale: empty input image");
  }
  if (image.width == side && image.height == side) return image;

  Image out;
  out.width = side;
  out.height = side;
  out.pixels.resize(static_cast<std::size_t>(side) * side * 3);

  const double x_scale = static_cast<double>(image.width) / side;
  const double y_scale = static_cast<double>(image.height) / side;

  for (int y = 0; y < side; ++y) {
    double sy = (y + 0.5) * y_scale - 0.5;
    sy = std::min(std::max(sy, 0.0), static_cast<double>(image.height - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double fy = sy - y0;
    for (int x = 0; x < side; ++x) {
      double sx = (x + 0.5) * x_scale - 0.5;
      sx = std::min(std::max(sx, 0.0), static_cast<double>(image.width - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double fx = sx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = image.at(x0, y0, c) * (1.0 - fx) + image.at(x1, y0, c) * fx;
        const double bottom = image.at(x0, y1, c) * (1.0 - fx) + image.at(x1, y1, c) * fx;
        const double value = top * (1.0 - fy) + bottom * fy;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(value));
      }
    }
  }
  return out;
}

PixelVector vectorize(const Image& image, std::string image_id) {
  if (image.width != image.height) {
    throw DataError("vectorize: image is not square (" + std::to_string(image.width) +
                    "x" + std::to_string(image.height) + ")");
  }
  const int side = image.width;
  PixelVector v;
  v.image_id = std::move(image_id);
  v.side = side;
  v.values.resize(static_cast<std::size_t>(3) * side * side);
  const std::size_t plane = static_cast<std::size_t>(side) * side;
  for (int c = 0; c < 3; ++c) {
    float* dst = v.values.data() + c * plane;
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        dst[y * side + x] = static_cast<float>(image.at(x, y, c)) / 255.0f;
      }
    }
  }
  return v;
}

bool is_zero_vector(const PixelVector& v) {
  for (float x : v.values) {
    if (x != 0.0f) return false;
  }
  return true;
}

}  // namespace cossif
