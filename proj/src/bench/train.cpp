#include "zcnas/bench/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "zcnas/common/error.hpp"
#include "zcnas/common/rng.hpp"

namespace zc {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (lr < 0.0) throw ConfigError("learning rate must be nonnegative");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (crop_pad < 0) throw ConfigError("crop padding must be nonnegative");
}

void ReducedTrainConfig::validate() const {
  if (resolution < 1 || channels < 1 || epochs < 1) throw ConfigError("reduced config values must be >= 1");
}

double cosine_lr(double lr0, int epoch, int epochs) {
  return 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * epoch / epochs));
}

double evaluate_accuracy(Network& net, const Split& split, int batch_size) {
  if (split.size() == 0) return 0.0;
  const bool was_training = net.training();
  net.set_training(false);
  const std::size_t n = split.size();
  const std::size_t per = split.images.size() / n;
  const auto bs = static_cast<std::size_t>(std::max(batch_size, 1));
  std::size_t correct = 0;
  for (std::size_t start = 0; start < n; start += bs) {
    const std::size_t m = std::min(bs, n - start);
    Shape shape = split.images.shape;
    shape[0] = m;
    Tensor batch(shape, std::vector<double>(split.images.data.begin() + static_cast<long>(start * per),
                                            split.images.data.begin() + static_cast<long>((start + m) * per)));
    const Tensor out = net.forward(batch);
    const std::size_t k = out.dim(1);
    for (std::size_t i = 0; i < m; ++i) {
      const double* row = out.ptr() + i * k;
      const auto best = static_cast<std::size_t>(std::max_element(row, row + k) - row);
      if (static_cast<int>(best) == split.labels[start + i]) ++correct;
    }
  }
  net.set_training(was_training);
  return static_cast<double>(correct) / static_cast<double>(n);
}

namespace {

// Copies sample `src` of `images` into `dst` with optional flip and shifted crop.
void augment(const double* src, double* dst, std::size_t c, std::size_t r, bool flip, long dy, long dx) {
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < r; ++j) {
        const long y = static_cast<long>(i) + dy;
        long x = static_cast<long>(j) + dx;
        double v = 0.0;
        if (y >= 0 && x >= 0 && y < static_cast<long>(r) && x < static_cast<long>(r)) {
          if (flip) x = static_cast<long>(r) - 1 - x;
          v = src[(ch * r + static_cast<std::size_t>(y)) * r + static_cast<std::size_t>(x)];
        }
        dst[(ch * r + i) * r + j] = v;
      }
}

}  // namespace

TrainRecord train(Network& net, const SyntheticDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  TrainRecord rec;
  rec.seed = cfg.seed;
  const Split& tr = data.train;
  const std::size_t n = tr.size();
  const std::size_t c = tr.images.dim(1), r = tr.images.dim(2);
  const std::size_t per = c * r * r;
  Rng rng(derive_seed(cfg.seed, 0x7a11ULL));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SgdHyper hp{cfg.lr, cfg.momentum, cfg.nesterov, cfg.weight_decay};
  net.set_training(true);

  try {
    for (int e = 0; e < cfg.epochs; ++e) {
      hp.lr = cosine_lr(cfg.lr, e, cfg.epochs);
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t m = std::min(static_cast<std::size_t>(cfg.batch_size), n - start);
        if (m < 2 && n >= 2) continue;
        Tensor batch({m, c, r, r});
        std::vector<int> labels(m);
        for (std::size_t i = 0; i < m; ++i) {
          const std::size_t idx = order[start + i];
          labels[i] = tr.labels[idx];
          const bool flip = cfg.flip && uniform01(rng) < 0.5;
          long dy = 0, dx = 0;
          if (cfg.crop && cfg.crop_pad > 0) {
            const auto span = static_cast<std::size_t>(2 * cfg.crop_pad + 1);
            dy = static_cast<long>(uniform_index(rng, span)) - cfg.crop_pad;
            dx = static_cast<long>(uniform_index(rng, span)) - cfg.crop_pad;
          }
          augment(tr.images.ptr() + idx * per, batch.ptr() + i * per, c, r, flip, dy, dx);
        }
        const auto grads = net.backward(LossSpec::cross_entropy(std::move(labels)), batch);
        sgd_step(net, grads, hp);
      }
      rec.val_acc.push_back(evaluate_accuracy(net, data.val));
    }
    rec.test_acc = evaluate_accuracy(net, data.test);
  } catch (const NumericalError& err) {
    rec.failed = true;
    rec.test_acc = 0.0;
    rec.error = err.what();
  }
  net.set_training(true);
  return rec;
}

TrainRecord reduced_training_proxy(const Architecture& arch, const SpaceSpec& spec, const ScaleConfig& base,
                                   const ReducedTrainConfig& reduced, const TrainConfig& base_cfg,
                                   const SyntheticDataset& data, const InitConfig& init) {
  reduced.validate();
  if (reduced.resolution > base.resolution || reduced.channels > base.channels)
    throw ConfigError("reduced resolution/channels must not exceed the base configuration");
  ScaleConfig scale = base;
  scale.resolution = reduced.resolution;
  scale.channels = reduced.channels;
  TrainConfig cfg = base_cfg;
  cfg.epochs = reduced.epochs;
  Network net = materialize(arch, spec, scale, init);
  if (reduced.resolution == data.spec.resolution) return train(net, data, cfg);
  return train(net, resize_dataset(data, reduced.resolution), cfg);
}

}  // namespace zc
