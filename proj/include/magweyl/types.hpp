#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

namespace magweyl {

using cplx = std::complex<double>;

// Points and displacements in X = R^N, N <= 3. Unused trailing components stay zero.
using vec = std::array<double, 3>;

inline constexpr double pi = 3.14159265358979323846;

inline vec operator+(const vec& a, const vec& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline vec operator-(const vec& a, const vec& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline vec operator-(const vec& a) { return {-a[0], -a[1], -a[2]}; }
inline vec operator*(double s, const vec& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const vec& a, const vec& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const vec& a) { return std::sqrt(dot(a, a)); }

using scalar_fn = std::function<double(const vec&)>;

struct evaluation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Violated input contract (exit status 3 in the CLI).
struct precondition_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Iteration or tolerance failure (exit status 4 in the CLI).
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct parse_error : std::runtime_error {
  int line, column;
  parse_error(int l, int c, const std::string& what)
      : std::runtime_error("line " + std::to_string(l) + ", column " + std::to_string(c) + ": " + what),
        line(l), column(c) {}
};

inline double finite_or_throw(double v, const char* what) {
  if (!std::isfinite(v)) throw evaluation_error(std::string("non-finite value in ") + what);
  return v;
}

}  // namespace magweyl
