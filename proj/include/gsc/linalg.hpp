#pragma once

#include <array>
#include <cmath>

namespace gsc {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

/// Unit quaternion, (w, x, y, z) component order.
struct Quat {
  double w = 1, x = 0, y = 0, z = 0;

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
  /// Normalized copy with w >= 0.
  Quat canonical() const;
};

Quat operator*(const Quat& a, const Quat& b);

/// Row-major 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{};

  static Mat3 identity() { return diag({1, 1, 1}); }
  static Mat3 diag(const Vec3& d) {
    Mat3 r;
    r(0, 0) = d[0];
    r(1, 1) = d[1];
    r(2, 2) = d[2];
    return r;
  }

  double& operator()(int r, int c) { return m[3 * r + c]; }
  double operator()(int r, int c) const { return m[3 * r + c]; }

  Mat3 transposed() const;
  double trace() const { return m[0] + m[4] + m[8]; }
};

Mat3 operator*(const Mat3& a, const Mat3& b);
Mat3 operator+(const Mat3& a, const Mat3& b);
Mat3 operator-(const Mat3& a, const Mat3& b);
Mat3 operator*(double s, const Mat3& a);
Vec3 operator*(const Mat3& a, const Vec3& v);
double frobenius(const Mat3& a);

/// Rotation matrix of a unit quaternion.
Mat3 rotation_matrix(const Quat& q);

/// Symmetric eigendecomposition: a = V diag(values) V^T, columns of V are eigenvectors.
struct SymEigen {
  Vec3 values;
  Mat3 vectors;
};

/// Eigendecomposition of the symmetric part of a. Diagonal input takes the
/// closed-form path; otherwise cyclic Jacobi sweeps run to a relative
/// off-diagonal tolerance of 1e-15.
SymEigen sym_eigen(const Mat3& a);

/// Rebuild V f(diag) V^T with f applied to each eigenvalue.
template <typename F>
Mat3 sym_apply(const SymEigen& e, F&& f) {
  Mat3 r;
  const Vec3 fv{f(e.values[0]), f(e.values[1]), f(e.values[2])};
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += e.vectors(i, k) * fv[k] * e.vectors(j, k);
      r(i, j) = s;
      r(j, i) = s;
    }
  return r;
}

/// Principal square root of a PSD matrix; negative eigenvalues are clamped to 0.
Mat3 sqrtm_psd(const Mat3& a);

/// Symmetrize (a + a^T) / 2.
Mat3 symmetrized(const Mat3& a);

}  // namespace gsc
