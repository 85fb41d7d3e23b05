#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsc/model.hpp"

namespace gsc {

/// Pinhole camera. x = rotation * world + translation maps into camera space
/// with +z forward, +x right and +y down. Pixel (i, j) samples image-plane
/// coordinate (i, j).
struct Camera {
  Mat3 rotation = Mat3::identity();
  Vec3 translation{};
  double fx = 1, fy = 1, cx = 0, cy = 0;
  int width = 1, height = 1;

  /// Throws InvalidInput for nonpositive focal lengths, an empty raster or a
  /// rotation that is not orthonormal.
  void validate() const;
  Vec3 center() const;
};

/// Looking from eye towards target with world +z as the up hint.
Camera look_at(const Vec3& eye, const Vec3& target, double fov_x_deg, int width, int height);

/// count cameras evenly spaced on a horizontal ring around center.
std::vector<Camera> ring_cameras(const Vec3& center, double radius, double height_offset, int count,
                                 double fov_x_deg, int width, int height);

struct Image {
  int width = 0, height = 0;
  std::vector<float> rgb;  // row-major, 3 samples per pixel

  Image() = default;
  Image(int w, int h, const Vec3& fill = {0, 0, 0});

  float& at(int x, int y, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  float at(int x, int y, int c) const { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  bool operator==(const Image&) const = default;
};

/// Degree-3 real SH color, 0.5 + C0 * dc + ..., unclamped.
Vec3 eval_sh(const Vec3& dir, const Vec3& sh_dc, const ShRest& sh_ac);

struct Splat2D {
  double u = 0, v = 0;                // pixel-space mean
  std::array<double, 3> cov{};        // xx, xy, yy including the 0.3 px^2 floor
  double depth = 0;                   // camera-space z
};

inline constexpr double kNearPlane = 0.01;
inline constexpr double kCovarianceFloor = 0.3;

/// Empty when the mean lies at or behind the near plane.
std::optional<Splat2D> project_gaussian(const Camera& cam, const Vec3& mean, const Mat3& cov);

/// Front-to-back alpha compositing over background. render() splits tiles
/// across OpenMP threads; render_serial() is the single-threaded reference
/// and produces bit-identical output.
Image render(const GaussianCloud& cloud, const Camera& cam, const Vec3& background = {0, 0, 0});
Image render_serial(const GaussianCloud& cloud, const Camera& cam, const Vec3& background = {0, 0, 0});

void write_ppm(const Image& img, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);
/// [u32 width][u32 height][3 * width * height float32], little-endian.
void write_image_raw(const Image& img, const std::filesystem::path& path);
Image read_image_raw(const std::filesystem::path& path);
/// Dispatch on extension: .ppm or raw floats otherwise.
Image read_image(const std::filesystem::path& path);

/// One camera per line: 12 extrinsic values (row-major [R | t]), fx fy cx cy,
/// width height. Blank lines and lines starting with '#' are skipped.
std::vector<Camera> parse_cameras(const std::string& text);
std::string format_cameras(std::span<const Camera> cams);
std::vector<Camera> read_cameras(const std::filesystem::path& path);
void write_cameras(std::span<const Camera> cams, const std::filesystem::path& path);

}  // namespace gsc
