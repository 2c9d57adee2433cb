#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace bps {

using cdouble = std::complex<double>;

// Spatial dimension is runtime (2 or 3); small vectors/matrices are stored
// with fixed capacity 3 and an explicit size.
constexpr int kMaxDim = 3;

struct Vec {
  int n = 2;
  std::array<double, kMaxDim> v{{0, 0, 0}};

  Vec() = default;
  explicit Vec(int dim) : n(dim) {}
  Vec(double x, double y) : n(2), v{{x, y, 0}} {}
  Vec(double x, double y, double z) : n(3), v{{x, y, z}} {}

  double& operator[](int i) { return v[static_cast<size_t>(i)]; }
  double operator[](int i) const { return v[static_cast<size_t>(i)]; }

  Vec& operator+=(const Vec& o) {
    for (int i = 0; i < n; ++i) v[i] += o.v[i];
    return *this;
  }
  Vec& operator*=(double s) {
    for (int i = 0; i < n; ++i) v[i] *= s;
    return *this;
  }
  friend Vec operator+(Vec a, const Vec& b) { return a += b; }
  friend Vec operator*(double s, Vec a) { return a *= s; }
  friend Vec operator-(Vec a, const Vec& b) {
    for (int i = 0; i < a.n; ++i) a.v[i] -= b.v[i];
    return a;
  }
  double dot(const Vec& o) const {
    double s = 0;
    for (int i = 0; i < n; ++i) s += v[i] * o.v[i];
    return s;
  }
  double norm() const { return std::sqrt(dot(*this)); }
};

struct Mat {
  int n = 2;
  std::array<std::array<double, kMaxDim>, kMaxDim> a{};

  Mat() = default;
  explicit Mat(int dim) : n(dim) {}

  double& operator()(int i, int j) { return a[static_cast<size_t>(i)][static_cast<size_t>(j)]; }
  double operator()(int i, int j) const { return a[static_cast<size_t>(i)][static_cast<size_t>(j)]; }

  static Mat identity(int dim) {
    Mat m(dim);
    for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
  }
  Mat& operator+=(const Mat& o) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a[i][j] += o.a[i][j];
    return *this;
  }
  friend Mat operator+(Mat x, const Mat& y) { return x += y; }
  friend Mat operator*(double s, Mat x) {
    for (int i = 0; i < x.n; ++i)
      for (int j = 0; j < x.n; ++j) x.a[i][j] *= s;
    return x;
  }
  Vec apply(const Vec& x) const {
    Vec r(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) r[i] += a[i][j] * x[j];
    return r;
  }
  Mat mul(const Mat& o) const {
    Mat r(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) r(i, j) += a[i][k] * o.a[k][j];
    return r;
  }
  double frobenius2() const {
    double s = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += a[i][j] * a[i][j];
    return s;
  }
  bool symmetric(double tol = 1e-12) const {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (std::abs(a[i][j] - a[j][i]) > tol) return false;
    return true;
  }
  double trace() const {
    double s = 0;
    for (int i = 0; i < n; ++i) s += a[i][i];
    return s;
  }
};

inline bool is_power_of_two(int m) { return m > 0 && (m & (m - 1)) == 0; }

struct SimError : std::runtime_error {
  explicit SimError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bps
