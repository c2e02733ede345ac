#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "crsr/error.hpp"
#include "crsr/imaging.hpp"
#include "crsr/toy_faces.hpp"

namespace fs = std::filesystem;
using namespace crsr;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("crsr_unit_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

torch::Tensor random_images(int64_t n, int64_t size, uint64_t seed, double amplitude = 0.9) {
  torch::manual_seed(seed);
  return (torch::rand({n, 3, size, size}, torch::kFloat64) * 2.0 - 1.0) * amplitude;
}

// Catmull-Rom evaluated from its piecewise definition.
double catmull_rom(double x) {
  x = std::abs(x);
  if (x < 1.0) return 1.5 * x * x * x - 2.5 * x * x + 1.0;
  if (x < 2.0) return -0.5 * x * x * x + 2.5 * x * x - 4.0 * x + 2.0;
  return 0.0;
}

// Direct 2-D convolution with a stretched cubic kernel; taps outside the
// image are dropped and the remaining weights renormalised.
torch::Tensor reference_downsample(const torch::Tensor& img, int64_t factor) {
  const int64_t in = img.size(-1);
  const int64_t out = in / factor;
  const double s = static_cast<double>(factor);
  auto result = torch::zeros({img.size(0), out, out}, torch::kFloat64);
  auto src = img.accessor<double, 3>();
  auto dst = result.accessor<double, 3>();
  for (int64_t c = 0; c < img.size(0); ++c) {
    for (int64_t oy = 0; oy < out; ++oy) {
      for (int64_t ox = 0; ox < out; ++ox) {
        const double cy = (oy + 0.5) * s;
        const double cx = (ox + 0.5) * s;
        double acc = 0.0;
        double norm = 0.0;
        for (int64_t y = 0; y < in; ++y) {
          for (int64_t x = 0; x < in; ++x) {
            const double w = catmull_rom((y + 0.5 - cy) / s) * catmull_rom((x + 0.5 - cx) / s);
            acc += w * src[c][y][x];
            norm += w;
          }
        }
        dst[c][oy][ox] = acc / norm;
      }
    }
  }
  return result;
}

DegradationConfig degenerate_degradation() {
  DegradationConfig cfg;
  cfg.blur_sigma_range = {0.0, 0.0};
  cfg.noise_sigma_range = {0.0, 0.0};
  cfg.compression_quality_range = {100, 100};
  return cfg;
}

}  // namespace

TEST_SUITE("imaging") {
  TEST_CASE("image batches validate role sizes and range") {
    CHECK_NOTHROW(ImageBatch(torch::zeros({2, 3, 16, 16}), Role::GenuineLr));
    CHECK_NOTHROW(ImageBatch(torch::zeros({1, 3, 64, 64}), Role::SuperResolved));
    CHECK_THROWS_AS(ImageBatch(torch::zeros({2, 3, 64, 64}), Role::ArtificialLr), ShapeError);
    CHECK_THROWS_AS(ImageBatch(torch::zeros({2, 3, 16, 16}), Role::AuxHr), ShapeError);
    CHECK_THROWS_AS(ImageBatch(torch::zeros({2, 1, 16, 16}), Role::GenuineLr), ShapeError);
    CHECK_THROWS_AS(ImageBatch(torch::zeros({0, 3, 16, 16}), Role::GenuineLr), NoDataError);
    CHECK_THROWS_AS(ImageBatch(torch::full({1, 3, 16, 16}, 1.5), Role::GenuineLr), NumericError);
    CHECK_THROWS_AS(ImageBatch(torch::full({1, 3, 16, 16}, NAN), Role::GenuineLr), NumericError);
  }

  TEST_CASE("batches are copies") {
    auto t = torch::zeros({1, 3, 16, 16});
    ImageBatch b(t, Role::GenuineLr);
    t.fill_(0.5);
    CHECK(b.data().abs().max().item<float>() == 0.0F);
  }

  TEST_CASE("cubic kernel matches Catmull-Rom") {
    for (double x = -2.5; x <= 2.5; x += 0.125) {
      CHECK(cubic_kernel(x) == doctest::Approx(catmull_rom(x)).epsilon(1e-12));
    }
  }

  TEST_CASE("resize matrix rows sum to one") {
    for (auto [in, out, aa] : {std::tuple{64, 16, true}, {16, 64, false}, {64, 16, false}}) {
      auto m = resize_matrix(in, out, aa, torch::kFloat64);
      CHECK(m.sizes() == torch::IntArrayRef({out, in}));
      CHECK((m.sum(1) - 1.0).abs().max().item<double>() < 1e-12);
    }
  }

  TEST_CASE("bicubic downsample matches a direct-convolution reference") {
    auto img = random_images(1, 64, 3)[0];
    auto ours = downsample(img, ResampleSpec{});
    auto ref = reference_downsample(img, 4);
    CHECK((ours - ref).abs().max().item<double>() <= 1e-3);
    CHECK((ours - ref).abs().max().item<double>() <= 1e-9);
  }

  TEST_CASE("downsample of a constant image is that constant") {
    ImageBatch hr(torch::full({2, 3, 64, 64}, 0.5), Role::AuxHr);
    auto lr = bicubic_downsample(hr);
    CHECK(lr.role() == Role::ArtificialLr);
    CHECK(lr.data().sizes() == torch::IntArrayRef({2, 3, 16, 16}));
    CHECK((lr.data() - 0.5).abs().max().item<float>() < 1e-6F);
  }

  TEST_CASE("downsample is linear") {
    auto x = random_images(2, 64, 5, 0.4);
    auto y = random_images(2, 64, 6, 0.4);
    const double a = 0.7;
    const double b = -1.3;
    auto lhs = downsample(a * x + b * y, ResampleSpec{});
    auto rhs = a * downsample(x, ResampleSpec{}) + b * downsample(y, ResampleSpec{});
    CHECK((lhs - rhs).abs().max().item<double>() < 1e-6);
  }

  TEST_CASE("non-dividing factor is a shape error") {
    CHECK_THROWS_AS(downsample(torch::zeros({3, 64, 64}), ResampleSpec{5}), ShapeError);
    ImageBatch hr(torch::zeros({1, 3, 64, 64}), Role::AuxHr);
    CHECK_THROWS_AS(bicubic_downsample(hr, ResampleSpec{2}), ShapeError);
  }

  TEST_CASE("bicubic and nearest upsampling") {
    ImageBatch lr(random_images(2, 16, 8).to(torch::kFloat32), Role::ArtificialLr);
    auto up = bicubic_upsample(lr);
    CHECK(up.data().sizes() == torch::IntArrayRef({2, 3, 64, 64}));
    CHECK(up.data().abs().max().item<float>() <= 1.0F);
    auto nn = nearest_upsample(lr);
    CHECK(nn.data()[1][2][4 * 7 + 3][4 * 11].item<float>() == lr.data()[1][2][7][11].item<float>());
  }

  TEST_CASE("degenerate degradation collapses to bicubic downsampling") {
    ImageBatch hr(random_images(3, 64, 9).to(torch::kFloat32), Role::AuxHr);
    auto genuine = degrade_to_genuine_like(hr, degenerate_degradation());
    CHECK(genuine.role() == Role::GenuineLr);
    CHECK((genuine.data() - bicubic_downsample(hr).data()).abs().max().item<float>() <= 1e-6F);
  }

  TEST_CASE("degradation of a constant image without noise stays constant") {
    DegradationConfig cfg = degenerate_degradation();
    cfg.blur_sigma_range = {0.5, 2.5};
    ImageBatch hr(torch::full({2, 3, 64, 64}, -0.25), Role::AuxHr);
    auto out = degrade_to_genuine_like(hr, cfg);
    CHECK((out.data() + 0.25).abs().max().item<float>() < 1e-6F);
  }

  TEST_CASE("degradation is deterministic in its seed") {
    auto faces = make_toy_faces({2, 2, 1, 1});
    DegradationConfig cfg;
    cfg.seed = 42;
    std::vector<DegradationDraw> draws;
    auto a = degrade_to_genuine_like(faces.images, cfg, &draws);
    auto b = degrade_to_genuine_like(faces.images, cfg);
    CHECK(torch::equal(a.data(), b.data()));
    REQUIRE(draws.size() == 4);
    for (const auto& d : draws) {
      CHECK(d.blur_sigma >= 0.5);
      CHECK(d.blur_sigma <= 2.5);
      CHECK(d.noise_sigma >= 0.01);
      CHECK(d.noise_sigma <= 0.05);
      CHECK(d.quality >= 30);
      CHECK(d.quality <= 70);
    }
    cfg.seed = 43;
    CHECK_FALSE(torch::equal(a.data(), degrade_to_genuine_like(faces.images, cfg).data()));
    CHECK(a.data().abs().max().item<float>() <= 1.0F);
  }

  TEST_CASE("degradation rejects non-HR input and bad ranges") {
    ImageBatch lr(torch::zeros({1, 3, 16, 16}), Role::ArtificialLr);
    CHECK_THROWS_AS(degrade_to_genuine_like(lr, DegradationConfig{}), ShapeError);
    DegradationConfig bad;
    bad.blur_sigma_range = {2.0, 1.0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = DegradationConfig{};
    bad.compression_quality_range = {0, 50};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }

  TEST_CASE("block DCT quantisation") {
    auto img = random_images(1, 16, 10)[0];
    CHECK((block_dct_quantize(img, 100) - img).abs().max().item<double>() < 1e-9);
    auto flat = torch::full({3, 16, 16}, 0.3, torch::kFloat64);
    CHECK((block_dct_quantize(flat, 30) - 0.3).abs().max().item<double>() < 0.02);
    auto q = block_dct_quantize(img, 30);
    CHECK((q - img).abs().max().item<double>() > 1e-3);
    CHECK_THROWS_AS(block_dct_quantize(torch::zeros({3, 12, 12}, torch::kFloat64), 50), ShapeError);
  }

  TEST_CASE("gaussian blur preserves the mean of a periodic-free constant") {
    auto img = torch::full({3, 16, 16}, 0.2, torch::kFloat64);
    CHECK((gaussian_blur(img, 1.5) - 0.2).abs().max().item<double>() < 1e-12);
    auto rnd = random_images(1, 16, 11)[0];
    CHECK(torch::equal(gaussian_blur(rnd, 0.0), rnd));
    CHECK(gaussian_blur(rnd, 2.0).std().item<double>() < rnd.std().item<double>());
  }

  TEST_CASE("8-bit conversion maps the range endpoints") {
    auto img = torch::zeros({3, 2, 2});
    img[0][0][0] = 1.0;
    img[0][0][1] = -1.0;
    auto rgb = to_rgb8(img);
    CHECK(rgb.width == 2);
    CHECK(rgb.height == 2);
    CHECK(rgb.pixels[0] == 255);
    CHECK(rgb.pixels[3] == 0);
    auto back = from_rgb8(rgb);
    CHECK(back[0][0][0].item<float>() == 1.0F);
    CHECK(back[0][0][1].item<float>() == -1.0F);
  }

  TEST_CASE("PNG round trip stays within one quantisation step") {
    auto dir = fresh_dir("png_roundtrip");
    ImageBatch x(random_images(3, 64, 12, 1.0).to(torch::kFloat32), Role::AuxHr);
    save_images(x, dir, {"a.png", "b.png", "c.png"});
    auto loaded = load_image_folder(dir, 64, Role::AuxHr);
    CHECK(loaded.names == std::vector<std::string>{"a.png", "b.png", "c.png"});
    CHECK(loaded.warnings.empty());
    CHECK((loaded.images.data() - x.data()).abs().max().item<float>() <= 2.0F / 255.0F + 1e-6F);
  }

  TEST_CASE("image folder loading skips corrupt files") {
    auto dir = fresh_dir("png_corrupt");
    ImageBatch x(random_images(4, 64, 13).to(torch::kFloat32), Role::AuxHr);
    save_images(x, dir, {"0.png", "1.png", "2.png", "3.png"});
    fs::resize_file(dir / "2.png", 20);
    auto loaded = load_image_folder(dir, 64, Role::AuxHr);
    CHECK(loaded.images.size() == 3);
    REQUIRE(loaded.warnings.size() == 1);
    CHECK(loaded.warnings[0].find("2.png") != std::string::npos);
  }

  TEST_CASE("image folder loading resizes and crops") {
    auto dir = fresh_dir("png_resize");
    Rgb8Image img;
    img.width = 80;
    img.height = 64;
    img.pixels.assign(80 * 64 * 3, 255);
    write_png(dir / "wide.png", img);
    auto loaded = load_image_folder(dir, 16, Role::GenuineLr);
    CHECK(loaded.images.data().sizes() == torch::IntArrayRef({1, 3, 16, 16}));
    CHECK((loaded.images.data() - 1.0).abs().max().item<float>() < 1e-6F);
  }

  TEST_CASE("empty folders are a NoData error") {
    auto dir = fresh_dir("png_empty");
    CHECK_THROWS_AS(load_image_folder(dir, 64, Role::AuxHr), NoDataError);
    std::ofstream(dir / "junk.png") << "not a png";
    CHECK_THROWS_AS(load_image_folder(dir, 64, Role::AuxHr), NoDataError);
  }

  TEST_CASE("image grids tile row-major") {
    auto dir = fresh_dir("grid");
    auto data = torch::full({4, 3, 16, 16}, -1.0);
    data[1].fill_(1.0);
    save_image_grid(ImageBatch(data, Role::GenuineLr), dir / "grid.png");
    auto grid = read_png(dir / "grid.png");
    CHECK(grid.width == 32);
    CHECK(grid.height == 32);
    auto px = [&](int x, int y) { return grid.pixels[static_cast<size_t>((y * 32 + x) * 3)]; };
    CHECK(px(0, 0) == 0);
    CHECK(px(20, 3) == 255);
    CHECK(px(3, 20) == 0);

    save_image_grid(ImageBatch(torch::zeros({1, 3, 64, 64}), Role::AuxHr), dir / "one.png");
    auto one = read_png(dir / "one.png");
    CHECK(one.width == 64);
    CHECK(one.height == 64);
    CHECK_THROWS_AS(save_image_grid(ImageBatch(data, Role::GenuineLr), dir / "missing" / "x.png"),
                    IoError);
  }

  TEST_CASE("toy faces carry identity-major labels") {
    auto faces = make_toy_faces({3, 2, 5, 5});
    CHECK(faces.images.size() == 6);
    CHECK(faces.identities == std::vector<int>{0, 0, 1, 1, 2, 2});
    auto again = make_toy_faces({3, 2, 5, 5});
    CHECK(torch::equal(faces.images.data(), again.images.data()));
    auto dir = fresh_dir("toy");
    write_toy_faces(faces, dir);
    auto loaded = load_image_folder(dir, 64, Role::AuxHr);
    CHECK(read_labels(dir / "labels.txt", loaded.names) == faces.identities);
    CHECK_THROWS_AS(read_labels(dir / "labels.txt", {"nope.png"}), ConfigError);
  }
}
