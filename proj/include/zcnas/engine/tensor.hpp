#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

namespace zc {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_string(const Shape& s);

// Dense row-major tensor. The engine instantiates it with double, with
// Dual (Hessian-vector products) and with LogMag (overflow-safe synflow).
template <class T>
struct BasicTensor {
  Shape shape;
  std::vector<T> data;

  BasicTensor() = default;
  explicit BasicTensor(Shape s, T fill = T(0.0)) : shape(std::move(s)), data(numel(shape), fill) {}
  BasicTensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {}

  std::size_t size() const noexcept { return data.size(); }
  T* ptr() noexcept { return data.data(); }
  const T* ptr() const noexcept { return data.data(); }
  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  std::size_t rank() const noexcept { return shape.size(); }
};

using Tensor = BasicTensor<double>;

}  // namespace zc
