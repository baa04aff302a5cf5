#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "zseg/checkpoint.hpp"
#include "zseg/loss.hpp"
#include "zseg/optim.hpp"
#include "zseg/preprocess.hpp"

namespace zseg {

/// What the network is asked to delineate. WG training (pre-training) sees
/// the raw slice; CG training sees the slice masked by the WG.
enum class TargetZone { wg, cg };

struct TrainConfig {
  Architecture architecture = Architecture::unet;
  int base_width = 64;
  int levels = 4;                // segmenter or generator depth
  int discriminator_levels = 5;  // pix2pix only
  OptimizerConfig optimizer;     // segmenter or generator
  OptimizerConfig discriminator_optimizer;
  double lambda_seg = kDefaultLambdaSeg;
  PreprocConfig preproc;
  std::uint64_t seed = 1;

  /// Epoch count (optimizer.epochs).
  int epochs() const { return optimizer.epochs; }
  /// Throws ConfigError on inconsistent settings, including a pix2pix
  /// generator whose depth does not reduce the crop to 1x1.
  void validate() const;
};

/// Full-size defaults: width 64, 288 -> 256 crops, per-architecture
/// optimizer settings; pix2pix uses 8 generator and 5 discriminator levels.
TrainConfig default_train_config(Architecture arch, std::uint64_t seed);

inline constexpr int kDeskLevelReduction = 2;

/// Desk profile: width 4, 72 -> 64 crops, 5 epochs, every network two
/// levels shallower than its default (SegNet 3, U-Net 2, pix2pix 6 and 3).
TrainConfig desk_train_config(Architecture arch, std::uint64_t seed);

struct EpochStats {
  int epoch = 0;  // 0-based
  double loss = 0.0;                // mean segmenter / generator objective
  double discriminator_loss = 0.0;  // pix2pix only
  double lr = 0.0;
  std::size_t samples = 0;
};

/// Owns the networks and optimizer state of one training run.
class Trainer {
public:
  explicit Trainer(TrainConfig config);
  ~Trainer();
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  const TrainConfig& config() const { return config_; }
  /// Completed epochs.
  int epoch() const { return epoch_; }

  /// One pass over `data` (slices at target_size). Sample order comes from
  /// (seed, epoch) and each crop/flip from (seed, patient, slice, epoch), so
  /// a run is reproducible and resumable. Throws NumericError on a
  /// non-finite loss.
  EpochStats train_epoch(const std::vector<SliceSample>& data, TargetZone zone);

  /// Eval-mode logits for slices already in their evaluation view.
  std::vector<Image> predict(const std::vector<SliceSample>& views, TargetZone zone);

  Model& segmenter() { return *net_; }
  Model* discriminator() { return disc_.get(); }

  /// Weights, optimizer slots, step counters and epoch.
  Checkpoint checkpoint() const;
  /// Resumes from `checkpoint()` output. Throws CheckpointError on an
  /// architecture, width or depth mismatch, or on missing/extra tensors.
  void resume(const Checkpoint& checkpoint);
  /// Copies only the weights (fine-tuning start). Optimizer state and the
  /// epoch counter stay fresh.
  void load_weights(const Checkpoint& checkpoint);

private:
  void check_compatible(const Checkpoint& checkpoint) const;

  TrainConfig config_;
  std::unique_ptr<Model> net_;
  std::unique_ptr<Model> disc_;
  std::unique_ptr<Optimizer> opt_;
  std::unique_ptr<Optimizer> disc_opt_;
  int epoch_ = 0;
};

/// Network input for one slice: the WG-masked image for CG training, the raw
/// image for WG training.
Image network_input(const SliceSample& s, TargetZone zone);

}  // namespace zseg
