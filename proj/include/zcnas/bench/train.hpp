#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zcnas/bench/dataset.hpp"
#include "zcnas/engine/network.hpp"
#include "zcnas/space/space.hpp"

namespace zc {

struct TrainConfig {
  double lr = 0.1;
  double momentum = 0.9;
  bool nesterov = true;
  double weight_decay = 5e-4;
  int epochs = 10;
  int batch_size = 64;
  bool flip = true;
  bool crop = true;
  int crop_pad = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainRecord {
  std::uint64_t seed = 0;
  std::vector<double> val_acc;  // one entry per completed epoch
  double test_acc = 0.0;        // 0 for failed records
  bool failed = false;
  std::string error;
};

// Learning rate used throughout epoch e (0-based) of E: 0.5 lr0 (1 + cos(pi e / E)).
double cosine_lr(double lr0, int epoch, int epochs);

// Accuracy with batchnorm in inference mode.
double evaluate_accuracy(Network& net, const Split& split, int batch_size = 256);

// SGD with cosine annealing, flip and pad-then-crop augmentation. A
// non-finite loss stops training and marks the record failed; val_acc then
// holds the epochs completed before the failure.
TrainRecord train(Network& net, const SyntheticDataset& data, const TrainConfig& cfg);

// The r_x c_y e_z triple of a reduced-training proxy.
struct ReducedTrainConfig {
  int resolution = 8;
  int channels = 4;
  int epochs = 10;

  void validate() const;
};

// Trains the rescaled model for `reduced.epochs` epochs with the schedule
// annealed over that horizon and returns its validation curve. The dataset
// is resized to the reduced resolution.
TrainRecord reduced_training_proxy(const Architecture& arch, const SpaceSpec& spec, const ScaleConfig& base,
                                   const ReducedTrainConfig& reduced, const TrainConfig& base_cfg,
                                   const SyntheticDataset& data, const InitConfig& init);

}  // namespace zc
