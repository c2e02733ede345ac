#include "crsr/error.hpp"
#include "crsr/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iostream>

namespace crsr {

namespace fs = std::filesystem;

Rgb8Image read_png(const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&image, path.c_str()) == 0) {
    throw IoError(path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  Rgb8Image out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr) == 0) {
    const std::string message = image.message;
    png_image_free(&image);
    throw IoError(path.string() + ": " + message);
  }
  return out;
}

void write_png(const fs::path& path, const Rgb8Image& image) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  if (png_image_write_to_file(&png, path.c_str(), 0, image.pixels.data(), 0, nullptr) == 0) {
    throw IoError(path.string() + ": " + png.message);
  }
}

Rgb8Image to_rgb8(const torch::Tensor& image) {
  if (image.dim() != 3 || image.size(0) != 3) {
    throw ShapeError("to_rgb8 expects a (3, H, W) tensor");
  }
  auto hwc = ((image.to(torch::kFloat64) + 1.0) * 127.5)
                 .round()
                 .clamp(0.0, 255.0)
                 .permute({1, 2, 0})
                 .to(torch::kUInt8)
                 .contiguous();
  Rgb8Image out;
  out.height = static_cast<int>(hwc.size(0));
  out.width = static_cast<int>(hwc.size(1));
  const auto* data = hwc.data_ptr<uint8_t>();
  out.pixels.assign(data, data + hwc.numel());
  return out;
}

torch::Tensor from_rgb8(const Rgb8Image& image) {
  auto hwc = torch::from_blob(const_cast<uint8_t*>(image.pixels.data()),
                              {image.height, image.width, 3}, torch::kUInt8);
  return hwc.permute({2, 0, 1}).to(torch::kFloat32).div(127.5).sub(1.0).contiguous();
}

ImageFolder load_image_folder(const fs::path& dir, int64_t target_size, Role role) {
  if (!fs::is_directory(dir)) {
    throw NoDataError(dir.string() + " is not a directory");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw NoDataError(dir.string() + " contains no PNG files");
  }

  std::vector<torch::Tensor> tensors;
  std::vector<std::string> names;
  std::vector<std::string> warnings;
  for (const auto& file : files) {
    Rgb8Image raw;
    try {
      raw = read_png(file);
    } catch (const IoError& e) {
      warnings.push_back("skipped undecodable image " + file.filename().string() + ": " + e.what());
      std::cerr << "warning: " << warnings.back() << '\n';
      continue;
    }
    auto img = from_rgb8(raw);
    const int64_t side = std::min<int64_t>(raw.width, raw.height);
    const int64_t top = (raw.height - side) / 2;
    const int64_t left = (raw.width - side) / 2;
    img = img.slice(1, top, top + side).slice(2, left, left + side);
    if (side != target_size) {
      img = bicubic_resize(img.to(torch::kFloat64), target_size, target_size, true)
                .clamp(-1.0, 1.0)
                .to(torch::kFloat32);
    }
    tensors.push_back(img);
    names.push_back(file.filename().string());
  }
  if (tensors.empty()) {
    throw NoDataError(dir.string() + ": every PNG failed to decode");
  }
  return ImageFolder{ImageBatch(torch::stack(tensors), role), std::move(names),
                     std::move(warnings)};
}

void save_image_grid(const ImageBatch& x, const fs::path& path) {
  const int64_t n = x.size();
  const auto cols = static_cast<int64_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  const int64_t rows = (n + cols - 1) / cols;
  const int64_t h = x.height();
  const int64_t w = x.width();
  auto canvas = torch::full({3, rows * h, cols * w}, -1.0F);
  for (int64_t i = 0; i < n; ++i) {
    const int64_t r = i / cols;
    const int64_t c = i % cols;
    canvas.slice(1, r * h, (r + 1) * h).slice(2, c * w, (c + 1) * w).copy_(x.data()[i]);
  }
  if (path.has_parent_path() && !fs::exists(path.parent_path())) {
    throw IoError(path.parent_path().string() + " does not exist");
  }
  write_png(path, to_rgb8(canvas));
}

void save_images(const ImageBatch& x, const fs::path& dir, const std::vector<std::string>& names) {
  if (static_cast<int64_t>(names.size()) != x.size()) {
    throw ShapeError("save_images: one name per image required");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoError(dir.string() + ": " + ec.message());
  }
  for (int64_t i = 0; i < x.size(); ++i) {
    write_png(dir / names[static_cast<size_t>(i)], to_rgb8(x.data()[i]));
  }
}

}  // namespace crsr
