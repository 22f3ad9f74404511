#include "zcnas/bench/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "zcnas/common/error.hpp"
#include "zcnas/common/rng.hpp"
#include "zcnas/io/files.hpp"

namespace zc {

void DatasetSpec::validate() const {
  if (resolution < 1 || channels < 1 || classes < 1) throw ConfigError("dataset dimensions must be positive");
  if (n_train < 1 || n_val < 0 || n_test < 0) throw ConfigError("dataset split sizes must be nonnegative");
  if (classes > n_train) throw ConfigError("more classes than training samples");
  if (!(sigma >= 0.0)) throw ConfigError("noise sigma must be nonnegative");
  if (smooth < 0) throw ConfigError("smoothing passes must be nonnegative");
}

namespace {

void box_blur(std::vector<double>& plane, std::size_t r) {
  std::vector<double> out(plane.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) {
      double s = 0.0;
      int n = 0;
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          const long y = static_cast<long>(i) + di, x = static_cast<long>(j) + dj;
          if (y < 0 || x < 0 || y >= static_cast<long>(r) || x >= static_cast<long>(r)) continue;
          s += plane[static_cast<std::size_t>(y) * r + static_cast<std::size_t>(x)];
          ++n;
        }
      out[i * r + j] = s / n;
    }
  plane.swap(out);
}

Split make_split(const SyntheticDataset& d, int n, std::uint64_t stream) {
  const auto& spec = d.spec;
  const std::size_t per = d.templates.size() / static_cast<std::size_t>(spec.classes);
  Rng rng(derive_seed(d.seed, stream));
  Split s;
  s.labels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) s.labels[static_cast<std::size_t>(i)] = i % spec.classes;
  std::shuffle(s.labels.begin(), s.labels.end(), rng);
  const auto r = static_cast<std::size_t>(spec.resolution);
  s.images = Tensor({static_cast<std::size_t>(n), static_cast<std::size_t>(spec.channels), r, r});
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    const double* t = d.templates.ptr() + static_cast<std::size_t>(s.labels[i]) * per;
    double* dst = s.images.ptr() + i * per;
    for (std::size_t p = 0; p < per; ++p) dst[p] = t[p] + (spec.sigma > 0.0 ? spec.sigma * normal(rng) : 0.0);
  }
  return s;
}

}  // namespace

SyntheticDataset gen_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  spec.validate();
  SyntheticDataset d;
  d.spec = spec;
  d.seed = seed;
  const auto r = static_cast<std::size_t>(spec.resolution);
  const auto c = static_cast<std::size_t>(spec.channels);
  d.templates = Tensor({static_cast<std::size_t>(spec.classes), c, r, r});
  Rng rng(derive_seed(seed, 1));
  const std::size_t per = c * r * r;
  for (int k = 0; k < spec.classes; ++k) {
    double* t = d.templates.ptr() + static_cast<std::size_t>(k) * per;
    for (std::size_t ch = 0; ch < c; ++ch) {
      std::vector<double> plane(r * r);
      for (auto& v : plane) v = normal(rng);
      for (int s = 0; s < spec.smooth; ++s) box_blur(plane, r);
      std::copy(plane.begin(), plane.end(), t + ch * r * r);
    }
    double mean = 0.0, var = 0.0;
    for (std::size_t p = 0; p < per; ++p) mean += t[p];
    mean /= static_cast<double>(per);
    for (std::size_t p = 0; p < per; ++p) var += (t[p] - mean) * (t[p] - mean);
    const double sd = std::sqrt(var / static_cast<double>(per));
    for (std::size_t p = 0; p < per; ++p) t[p] = sd > 0.0 ? (t[p] - mean) / sd : 0.0;
  }
  d.train = make_split(d, spec.n_train, 2);
  d.val = make_split(d, spec.n_val, 3);
  d.test = make_split(d, spec.n_test, 4);
  return d;
}

Split resize_split(const Split& s, int r) {
  if (r < 1) throw ConfigError("resolution must be positive");
  const std::size_t n = s.images.dim(0), c = s.images.dim(1), h = s.images.dim(2);
  const auto ro = static_cast<std::size_t>(r);
  if (ro == h) return s;
  Split out;
  out.labels = s.labels;
  out.images = Tensor({n, c, ro, ro});
  for (std::size_t nc = 0; nc < n * c; ++nc) {
    const double* src = s.images.ptr() + nc * h * h;
    double* dst = out.images.ptr() + nc * ro * ro;
    if (h % ro == 0) {
      const std::size_t f = h / ro;
      for (std::size_t i = 0; i < ro; ++i)
        for (std::size_t j = 0; j < ro; ++j) {
          double acc = 0.0;
          for (std::size_t a = 0; a < f; ++a)
            for (std::size_t b = 0; b < f; ++b) acc += src[(i * f + a) * h + j * f + b];
          dst[i * ro + j] = acc / static_cast<double>(f * f);
        }
    } else {
      for (std::size_t i = 0; i < ro; ++i)
        for (std::size_t j = 0; j < ro; ++j) dst[i * ro + j] = src[(i * h / ro) * h + j * h / ro];
    }
  }
  return out;
}

SyntheticDataset resize_dataset(const SyntheticDataset& d, int r) {
  SyntheticDataset out = d;
  out.spec.resolution = r;
  Split t;
  t.images = d.templates;
  t.labels.assign(d.templates.dim(0), 0);
  out.templates = resize_split(t, r).images;
  out.train = resize_split(d.train, r);
  out.val = resize_split(d.val, r);
  out.test = resize_split(d.test, r);
  return out;
}

std::string dataset_digest(const SyntheticDataset& d) {
  std::string bytes;
  for (const Split* s : {&d.train, &d.val, &d.test}) {
    bytes.append(reinterpret_cast<const char*>(s->images.ptr()), s->images.size() * sizeof(double));
    bytes.append(reinterpret_cast<const char*>(s->labels.data()), s->labels.size() * sizeof(int));
  }
  return sha256_hex(bytes).substr(0, 16);
}

}  // namespace zc
