#pragma once
// Scalar types the evaluation pass is instantiated with besides double.

#include <cmath>
#include <limits>

namespace zc {

// Forward-mode dual number: value plus directional derivative. Running the
// reverse pass on Dual parameters seeded with a direction v yields H v in the
// tangent part of the parameter gradients.
struct Dual {
  double v = 0.0;
  double d = 0.0;

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value) {}  // NOLINT(google-explicit-constructor)
  constexpr Dual(double value, double tangent) : v(value), d(tangent) {}

  Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
  Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
  Dual& operator*=(const Dual& o) { d = d * o.v + v * o.d; v *= o.v; return *this; }
  Dual& operator/=(const Dual& o) {
    d = (d * o.v - v * o.d) / (o.v * o.v);
    v /= o.v;
    return *this;
  }
};

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }
inline Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
inline bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
inline bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
inline Dual sqrt(const Dual& a) {
  const double s = std::sqrt(a.v);
  return {s, a.d / (2.0 * s)};
}
inline Dual exp(const Dual& a) {
  const double e = std::exp(a.v);
  return {e, e * a.d};
}
inline Dual log(const Dual& a) { return {std::log(a.v), a.d / a.v}; }
inline double value_of(const Dual& a) { return a.v; }
inline bool is_finite(const Dual& a) { return std::isfinite(a.v) && std::isfinite(a.d); }

// Nonnegative number stored as its natural log. Products become sums and
// sums become log-sum-exp, so path products far outside double range stay
// representable. Only the operations a nonnegative linear network needs
// are defined; subtraction requires a >= b.
struct LogMag {
  double l = -std::numeric_limits<double>::infinity();

  constexpr LogMag() = default;
  LogMag(double x) : l(x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity()) {}  // NOLINT
  static LogMag from_log(double lg) {
    LogMag m;
    m.l = lg;
    return m;
  }

  LogMag& operator+=(const LogMag& o) {
    if (o.l == -std::numeric_limits<double>::infinity()) return *this;
    if (l == -std::numeric_limits<double>::infinity()) { l = o.l; return *this; }
    const double hi = l > o.l ? l : o.l;
    const double lo = l > o.l ? o.l : l;
    l = hi + std::log1p(std::exp(lo - hi));
    return *this;
  }
  LogMag& operator*=(const LogMag& o) { l += o.l; return *this; }
  LogMag& operator/=(const LogMag& o) { l -= o.l; return *this; }
};

inline LogMag operator+(LogMag a, const LogMag& b) { return a += b; }
inline LogMag operator*(LogMag a, const LogMag& b) { return a *= b; }
inline LogMag operator/(LogMag a, const LogMag& b) { return a /= b; }
inline bool operator<(const LogMag& a, const LogMag& b) { return a.l < b.l; }
inline bool operator>(const LogMag& a, const LogMag& b) { return a.l > b.l; }
inline double value_of(const LogMag& a) { return std::exp(a.l); }
inline bool is_finite(const LogMag& a) { return !std::isnan(a.l) && a.l != std::numeric_limits<double>::infinity(); }

inline double value_of(double a) { return a; }
inline bool is_finite(double a) { return std::isfinite(a); }

}  // namespace zc
