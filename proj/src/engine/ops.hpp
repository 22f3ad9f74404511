#pragma once
// Operator kernels shared by every scalar instantiation of the pass.
// Tensors are batch-major: [N, C, H, W] for maps, [N, F] for vectors.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <cstddef>
#include <type_traits>
#include <vector>

#include "zcnas/engine/scalars.hpp"
#include "zcnas/engine/tensor.hpp"
#include "zcnas/kernels/kernels.hpp"

namespace zc::ops {

using kernels::Trans;

struct ConvGeom {
  std::size_t n, ci, h, w, co, k, stride, pad, ho, wo;
  std::size_t kdim() const { return ci * k * k; }
  std::size_t plane() const { return ho * wo; }
};

template <class T>
void im2col(const BasicTensor<T>& x, const ConvGeom& g, std::vector<T>& col) {
  const std::size_t np = g.n * g.plane();
  col.assign(g.kdim() * np, T(0.0));
  for (std::size_t c = 0; c < g.ci; ++c)
    for (std::size_t ki = 0; ki < g.k; ++ki)
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        T* row = col.data() + ((c * g.k + ki) * g.k + kj) * np;
        for (std::size_t n = 0; n < g.n; ++n) {
          const T* src = x.ptr() + (n * g.ci + c) * g.h * g.w;
          T* dst = row + n * g.plane();
          for (std::size_t oh = 0; oh < g.ho; ++oh) {
            const long ih = static_cast<long>(oh * g.stride + ki) - static_cast<long>(g.pad);
            if (ih < 0 || ih >= static_cast<long>(g.h)) continue;
            for (std::size_t ow = 0; ow < g.wo; ++ow) {
              const long iw = static_cast<long>(ow * g.stride + kj) - static_cast<long>(g.pad);
              if (iw < 0 || iw >= static_cast<long>(g.w)) continue;
              dst[oh * g.wo + ow] = src[static_cast<std::size_t>(ih) * g.w + static_cast<std::size_t>(iw)];
            }
          }
        }
      }
}

template <class T>
void col2im_add(const std::vector<T>& col, const ConvGeom& g, BasicTensor<T>& dx) {
  const std::size_t np = g.n * g.plane();
  for (std::size_t c = 0; c < g.ci; ++c)
    for (std::size_t ki = 0; ki < g.k; ++ki)
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        const T* row = col.data() + ((c * g.k + ki) * g.k + kj) * np;
        for (std::size_t n = 0; n < g.n; ++n) {
          T* dst = dx.ptr() + (n * g.ci + c) * g.h * g.w;
          const T* src = row + n * g.plane();
          for (std::size_t oh = 0; oh < g.ho; ++oh) {
            const long ih = static_cast<long>(oh * g.stride + ki) - static_cast<long>(g.pad);
            if (ih < 0 || ih >= static_cast<long>(g.h)) continue;
            for (std::size_t ow = 0; ow < g.wo; ++ow) {
              const long iw = static_cast<long>(ow * g.stride + kj) - static_cast<long>(g.pad);
              if (iw < 0 || iw >= static_cast<long>(g.w)) continue;
              dst[static_cast<std::size_t>(ih) * g.w + static_cast<std::size_t>(iw)] += src[oh * g.wo + ow];
            }
          }
        }
      }
}

template <class T>
void conv2d_forward(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>* b,
                    const ConvGeom& g, BasicTensor<T>& y) {
  std::vector<T> col;
  im2col(x, g, col);
  const std::size_t np = g.n * g.plane();
  std::vector<T> ymat(g.co * np);
  kernels::gemm(Trans::No, Trans::No, g.co, np, g.kdim(), w.ptr(), g.kdim(), col.data(), np, ymat.data(), np,
                false);
  y = BasicTensor<T>({g.n, g.co, g.ho, g.wo});
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t c = 0; c < g.co; ++c) {
      const T* src = ymat.data() + c * np + n * g.plane();
      T* dst = y.ptr() + (n * g.co + c) * g.plane();
      if (b) {
        const T bias = (*b)[c];
        for (std::size_t p = 0; p < g.plane(); ++p) dst[p] = src[p] + bias;
      } else {
        for (std::size_t p = 0; p < g.plane(); ++p) dst[p] = src[p];
      }
    }
}

template <class T>
void conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& dy,
                     const ConvGeom& g, BasicTensor<T>* dx, BasicTensor<T>& dw, BasicTensor<T>* db) {
  const std::size_t np = g.n * g.plane();
  std::vector<T> dymat(g.co * np);
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t c = 0; c < g.co; ++c) {
      const T* src = dy.ptr() + (n * g.co + c) * g.plane();
      T* dst = dymat.data() + c * np + n * g.plane();
      for (std::size_t p = 0; p < g.plane(); ++p) dst[p] = src[p];
    }
  std::vector<T> col;
  im2col(x, g, col);
  kernels::gemm(Trans::No, Trans::Yes, g.co, g.kdim(), np, dymat.data(), np, col.data(), np, dw.ptr(),
                g.kdim(), true);
  if (db) {
    for (std::size_t c = 0; c < g.co; ++c) {
      T s(0.0);
      for (std::size_t p = 0; p < np; ++p) s += dymat[c * np + p];
      (*db)[c] += s;
    }
  }
  if (dx) {
    std::vector<T> dcol(g.kdim() * np);
    kernels::gemm(Trans::Yes, Trans::No, g.kdim(), np, g.co, w.ptr(), g.kdim(), dymat.data(), np, dcol.data(),
                  np, false);
    col2im_add(dcol, g, *dx);
  }
}

template <class T>
void linear_forward(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>* b, std::size_t n,
                    std::size_t in, std::size_t out, BasicTensor<T>& y) {
  y = BasicTensor<T>({n, out});
  kernels::gemm(Trans::No, Trans::Yes, n, out, in, x.ptr(), in, w.ptr(), in, y.ptr(), out, false);
  if (b)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t o = 0; o < out; ++o) y[i * out + o] += (*b)[o];
}

template <class T>
void linear_backward(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& dy, std::size_t n,
                     std::size_t in, std::size_t out, BasicTensor<T>* dx, BasicTensor<T>& dw,
                     BasicTensor<T>* db) {
  kernels::gemm(Trans::Yes, Trans::No, out, in, n, dy.ptr(), out, x.ptr(), in, dw.ptr(), in, true);
  if (db)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t o = 0; o < out; ++o) (*db)[o] += dy[i * out + o];
  if (dx) kernels::gemm(Trans::No, Trans::No, n, in, out, dy.ptr(), out, w.ptr(), in, dx->ptr(), in, true);
}

template <class T>
void relu_forward(const BasicTensor<T>& x, BasicTensor<T>& y) {
  y = BasicTensor<T>(x.shape);
  const T zero(0.0);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > zero ? x[i] : zero;
}

template <class T>
void relu_backward(const BasicTensor<T>& x, const BasicTensor<T>& dy, BasicTensor<T>& dx) {
  const T zero(0.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] > zero) dx[i] += dy[i];
}

// Average pooling excludes padded cells from the divisor.
template <class T>
void avgpool_forward(const BasicTensor<T>& x, std::size_t k, std::size_t s, std::size_t p, std::size_t ho,
                     std::size_t wo, BasicTensor<T>& y) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  y = BasicTensor<T>({n, c, ho, wo});
  for (std::size_t nc = 0; nc < n * c; ++nc) {
    const T* src = x.ptr() + nc * h * w;
    T* dst = y.ptr() + nc * ho * wo;
    for (std::size_t oh = 0; oh < ho; ++oh)
      for (std::size_t ow = 0; ow < wo; ++ow) {
        const long h0 = std::max(0L, static_cast<long>(oh * s) - static_cast<long>(p));
        const long h1 = std::min(static_cast<long>(h), static_cast<long>(oh * s + k) - static_cast<long>(p));
        const long w0 = std::max(0L, static_cast<long>(ow * s) - static_cast<long>(p));
        const long w1 = std::min(static_cast<long>(w), static_cast<long>(ow * s + k) - static_cast<long>(p));
        T acc(0.0);
        for (long ih = h0; ih < h1; ++ih)
          for (long iw = w0; iw < w1; ++iw) acc += src[static_cast<std::size_t>(ih) * w + static_cast<std::size_t>(iw)];
        dst[oh * wo + ow] = acc * T(1.0 / static_cast<double>((h1 - h0) * (w1 - w0)));
      }
  }
}

template <class T>
void avgpool_backward(const BasicTensor<T>& dy, std::size_t k, std::size_t s, std::size_t p, std::size_t h,
                      std::size_t w, BasicTensor<T>& dx) {
  const std::size_t nc_total = dy.dim(0) * dy.dim(1), ho = dy.dim(2), wo = dy.dim(3);
  for (std::size_t nc = 0; nc < nc_total; ++nc) {
    const T* src = dy.ptr() + nc * ho * wo;
    T* dst = dx.ptr() + nc * h * w;
    for (std::size_t oh = 0; oh < ho; ++oh)
      for (std::size_t ow = 0; ow < wo; ++ow) {
        const long h0 = std::max(0L, static_cast<long>(oh * s) - static_cast<long>(p));
        const long h1 = std::min(static_cast<long>(h), static_cast<long>(oh * s + k) - static_cast<long>(p));
        const long w0 = std::max(0L, static_cast<long>(ow * s) - static_cast<long>(p));
        const long w1 = std::min(static_cast<long>(w), static_cast<long>(ow * s + k) - static_cast<long>(p));
        const T g = src[oh * wo + ow] * T(1.0 / static_cast<double>((h1 - h0) * (w1 - w0)));
        for (long ih = h0; ih < h1; ++ih)
          for (long iw = w0; iw < w1; ++iw) dst[static_cast<std::size_t>(ih) * w + static_cast<std::size_t>(iw)] += g;
      }
  }
}

template <class T>
void gap_forward(const BasicTensor<T>& x, BasicTensor<T>& y) {
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  y = BasicTensor<T>({n, c, 1, 1});
  const T inv(1.0 / static_cast<double>(hw));
  for (std::size_t i = 0; i < n * c; ++i) {
    T acc(0.0);
    for (std::size_t p = 0; p < hw; ++p) acc += x[i * hw + p];
    y[i] = acc * inv;
  }
}

template <class T>
void gap_backward(const BasicTensor<T>& dy, std::size_t hw, BasicTensor<T>& dx) {
  const T inv(1.0 / static_cast<double>(hw));
  for (std::size_t i = 0; i < dy.size(); ++i) {
    const T g = dy[i] * inv;
    for (std::size_t p = 0; p < hw; ++p) dx[i * hw + p] += g;
  }
}

// Per-channel statistics over every axis except 1.
template <class T>
void channel_layout(const BasicTensor<T>& x, std::size_t& n, std::size_t& c, std::size_t& inner) {
  n = x.dim(0);
  c = x.dim(1);
  inner = x.size() / (n * c);
}

constexpr double kBnEps = 1e-5;

template <class T>
void batchnorm_train_forward(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                             BasicTensor<T>& y, std::vector<double>& mean_out, std::vector<double>& var_out) {
  if constexpr (std::is_same_v<T, LogMag>) {
    throw std::logic_error("batchnorm is not defined in the log-magnitude domain");
  } else {
    std::size_t n, c, inner;
    channel_layout(x, n, c, inner);
    y = BasicTensor<T>(x.shape);
    mean_out.assign(c, 0.0);
    var_out.assign(c, 0.0);
    const double m = static_cast<double>(n * inner);
    for (std::size_t ch = 0; ch < c; ++ch) {
      T mean(0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < inner; ++p) mean += x[(i * c + ch) * inner + p];
      mean = mean * T(1.0 / m);
      T var(0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < inner; ++p) {
          const T d = x[(i * c + ch) * inner + p] - mean;
          var += d * d;
        }
      var = var * T(1.0 / m);
      using std::sqrt;
      const T inv = T(1.0) / sqrt(var + T(kBnEps));
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < inner; ++p) {
          const std::size_t idx = (i * c + ch) * inner + p;
          y[idx] = gamma[ch] * ((x[idx] - mean) * inv) + beta[ch];
        }
      mean_out[ch] = value_of(mean);
      var_out[ch] = value_of(var);
    }
  }
}

template <class T>
void batchnorm_train_backward(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& dy,
                              BasicTensor<T>& dx, BasicTensor<T>& dgamma, BasicTensor<T>& dbeta) {
  if constexpr (std::is_same_v<T, LogMag>) {
    throw std::logic_error("batchnorm is not defined in the log-magnitude domain");
  } else {
    std::size_t n, c, inner;
    channel_layout(x, n, c, inner);
    const double m = static_cast<double>(n * inner);
    std::vector<T> xhat(n * inner);
    for (std::size_t ch = 0; ch < c; ++ch) {
      T mean(0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < inner; ++p) mean += x[(i * c + ch) * inner + p];
      mean = mean * T(1.0 / m);
      T var(0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < inner; ++p) {
          const T d = x[(i * c + ch) * inner + p] - mean;
          var += d * d;
        }
      var = var * T(1.0 / m);
      using std::sqrt;
      const T inv = T(1.0) / sqrt(var + T(kBnEps));
      T sum_dy(0.0), sum_dy_xhat(0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < inner; ++p) {
          const std::size_t idx = (i * c + ch) * inner + p;
          const T xh = (x[idx] - mean) * inv;
          xhat[i * inner + p] = xh;
          sum_dy += dy[idx];
          sum_dy_xhat += dy[idx] * xh;
        }
      dgamma[ch] += sum_dy_xhat;
      dbeta[ch] += sum_dy;
      const T scale = gamma[ch] * inv * T(1.0 / m);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < inner; ++p) {
          const std::size_t idx = (i * c + ch) * inner + p;
          dx[idx] += scale * (T(m) * dy[idx] - sum_dy - xhat[i * inner + p] * sum_dy_xhat);
        }
    }
  }
}

template <class T>
void batchnorm_eval_forward(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                            const std::vector<double>& rmean, const std::vector<double>& rvar,
                            BasicTensor<T>& y) {
  if constexpr (std::is_same_v<T, LogMag>) {
    throw std::logic_error("batchnorm is not defined in the log-magnitude domain");
  } else {
    std::size_t n, c, inner;
    channel_layout(x, n, c, inner);
    y = BasicTensor<T>(x.shape);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T inv(1.0 / std::sqrt(rvar[ch] + kBnEps));
      const T mean(rmean[ch]);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < inner; ++p) {
          const std::size_t idx = (i * c + ch) * inner + p;
          y[idx] = gamma[ch] * ((x[idx] - mean) * inv) + beta[ch];
        }
    }
  }
}

template <class T>
void batchnorm_eval_backward(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                             const std::vector<double>& rmean, const std::vector<double>& rvar,
                             const BasicTensor<T>& dy, BasicTensor<T>& dx, BasicTensor<T>& dgamma,
                             BasicTensor<T>& dbeta) {
  if constexpr (std::is_same_v<T, LogMag>) {
    throw std::logic_error("batchnorm is not defined in the log-magnitude domain");
  } else {
    std::size_t n, c, inner;
    channel_layout(x, n, c, inner);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T inv(1.0 / std::sqrt(rvar[ch] + kBnEps));
      const T mean(rmean[ch]);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < inner; ++p) {
          const std::size_t idx = (i * c + ch) * inner + p;
          dgamma[ch] += dy[idx] * ((x[idx] - mean) * inv);
          dbeta[ch] += dy[idx];
          dx[idx] += dy[idx] * gamma[ch] * inv;
        }
    }
  }
}

}  // namespace zc::ops
