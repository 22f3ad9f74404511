#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zcnas/engine/tensor.hpp"

namespace zc {

// Each class has a fixed random template (Gaussian noise box-blurred
// `smooth` times, then scaled to unit variance); a sample is its class
// template plus N(0, sigma^2) pixel noise.
struct DatasetSpec {
  int resolution = 8;
  int channels = 3;
  int classes = 4;
  int n_train = 512;
  int n_val = 256;
  int n_test = 256;
  double sigma = 2.0;
  int smooth = 1;

  void validate() const;
};

struct Split {
  Tensor images;  // [N, C, r, r]
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

struct SyntheticDataset {
  DatasetSpec spec;
  std::uint64_t seed = 0;
  Tensor templates;  // [K, C, r, r]
  Split train, val, test;
};

// Class counts within each split differ by at most one.
SyntheticDataset gen_dataset(const DatasetSpec& spec, std::uint64_t seed);

// Area-averages when r divides the current resolution, nearest neighbour otherwise.
Split resize_split(const Split& s, int r);
SyntheticDataset resize_dataset(const SyntheticDataset& d, int r);

// Digest of the generated tensors; ties proxy scores to the exact batch.
std::string dataset_digest(const SyntheticDataset& d);

}  // namespace zc
