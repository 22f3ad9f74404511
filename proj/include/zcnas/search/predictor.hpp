#pragma once

#include <cstdint>
#include <vector>

#include "zcnas/common/rng.hpp"
#include "zcnas/engine/network.hpp"
#include "zcnas/space/space.hpp"

namespace zc {

// Binary relation predictor: P(a better than b).
//
// Each cell edge is a graph vertex carrying its op one-hot; vertices are
// adjacent when one edge ends where the other starts. Features are averaged
// over neighbourhoods twice (row-normalized adjacency with self loops), a
// shared 1x1 convolution maps every vertex to `hidden` units, and a linear
// readout over both graphs' vertices yields two logits trained with
// cross-entropy on labelled pairs.
class PairPredictor {
 public:
  PairPredictor(const SpaceSpec& spec, int hidden, std::uint64_t seed);

  // Per-vertex features [ops, edges] after two averaging rounds.
  std::vector<double> features(const Architecture& a) const;

  struct Pair {
    std::uint32_t a, b;  // indices into the feature list
    bool a_wins;
  };

  // Minibatch SGD; each sampled pair is presented in a random order.
  // Throws NumericalError on divergence.
  void fit(const std::vector<std::vector<double>>& feats, const std::vector<Pair>& pairs, int steps, int batch,
           double lr, Rng& rng);

  // probs[i * n + j] = P(i beats j) for i != j.
  std::vector<double> pairwise(const std::vector<std::vector<double>>& feats);

  // Accuracy of the predicted direction on the given pairs.
  double pair_accuracy(const std::vector<std::vector<double>>& feats, const std::vector<Pair>& pairs);

 private:
  Tensor pair_batch(const std::vector<std::vector<double>>& feats,
                    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& idx) const;
  std::vector<double> predict(const std::vector<std::vector<double>>& feats,
                              const std::vector<std::pair<std::uint32_t, std::uint32_t>>& idx);

  int edges_, ops_;
  std::vector<double> norm_adj2_;  // (A_hat)^2, edges x edges
  Network net_;
};

}  // namespace zc
