#include "zseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "zseg/errors.hpp"

namespace zseg {

namespace {

// Stream tags so shuffling and augmentation never share a seed path.
constexpr std::uint64_t kShuffleTag = 0x5348u;
constexpr std::uint64_t kAugmentTag = 0x4147u;

constexpr int kPredictBatch = 16;

bool is_power_of_two_multiple(int size, int levels) { return size == (1 << levels); }

}  // namespace

void TrainConfig::validate() const {
  if (base_width < 1) throw ConfigError("base_width must be at least 1");
  if (levels < 1) throw ConfigError("levels must be at least 1");
  optimizer.validate();
  preproc.validate();
  const MatrixSize crop = preproc.crop_size;
  if (architecture == Architecture::pix2pix) {
    discriminator_optimizer.validate();
    if (discriminator_levels < 1) throw ConfigError("discriminator_levels must be at least 1");
    if (crop.height != crop.width || !is_power_of_two_multiple(crop.height, levels)) {
      throw ConfigError("pix2pix generator with " + std::to_string(levels) +
                        " levels needs a square crop of " + std::to_string(1 << levels) + " pixels");
    }
    if (crop.height % (1 << discriminator_levels) != 0) {
      throw ConfigError("crop size is not divisible by 2^discriminator_levels");
    }
  } else if (crop.height % (1 << levels) != 0 || crop.width % (1 << levels) != 0) {
    throw ConfigError("crop size must be divisible by 2^levels (" + std::to_string(1 << levels) + ")");
  }
  if (!(lambda_seg >= 0.0)) throw ConfigError("lambda_seg must be non-negative");
}

TrainConfig default_train_config(Architecture arch, std::uint64_t seed) {
  TrainConfig c;
  c.architecture = arch;
  c.base_width = 64;
  c.seed = seed;
  c.preproc.seed = seed;
  c.optimizer = default_optimizer(arch, NetworkRole::segmenter);
  c.discriminator_optimizer = default_optimizer(arch, NetworkRole::discriminator);
  switch (arch) {
    case Architecture::segnet: c.levels = segnet_spec(64).levels; break;
    case Architecture::unet: c.levels = unet_spec(64).levels; break;
    case Architecture::pix2pix:
      c.levels = pix2pix_generator_spec(64).levels;
      c.discriminator_levels = pix2pix_discriminator_spec(64).levels;
      break;
  }
  return c;
}

TrainConfig desk_train_config(Architecture arch, std::uint64_t seed) {
  TrainConfig c = default_train_config(arch, seed);
  // Width 4 leaves SegNet (no skip connections) stuck on the uniform-output
  // plateau for whole folds within 5 epochs; width 8 trains reliably.
  c.base_width = 8;
  c.preproc = desk_preproc(seed);
  c.optimizer.epochs = 5;
  c.discriminator_optimizer.epochs = 5;
  // A 64 crop is two halvings smaller than 256, so every network drops two
  // levels and its feature maps keep the full-size resolution relative to
  // the crop (generator 64 -> 1, discriminator patch map 8x8).
  c.levels -= kDeskLevelReduction;
  if (arch == Architecture::pix2pix) c.discriminator_levels -= kDeskLevelReduction;
  return c;
}

Image network_input(const SliceSample& s, TargetZone zone) {
  return zone == TargetZone::cg ? apply_wg_mask(s.image, s.wg) : s.image;
}

Trainer::Trainer(TrainConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& c = config_;
  switch (c.architecture) {
    case Architecture::segnet: net_ = build_segnet<float>(c.base_width, c.seed, c.levels); break;
    case Architecture::unet: net_ = build_unet<float>(c.base_width, c.seed, c.levels); break;
    case Architecture::pix2pix: {
      auto pair = build_pix2pix<float>(c.base_width, c.seed, c.levels, c.discriminator_levels);
      net_ = std::move(pair.generator);
      disc_ = std::move(pair.discriminator);
      disc_opt_ = std::make_unique<Optimizer>(disc_->parameters(), c.discriminator_optimizer);
      break;
    }
  }
  opt_ = std::make_unique<Optimizer>(net_->parameters(), c.optimizer);
}

Trainer::~Trainer() = default;

EpochStats Trainer::train_epoch(const std::vector<SliceSample>& data, TargetZone zone) {
  const auto& c = config_;
  EpochStats stats;
  stats.epoch = epoch_;
  stats.lr = apply_lr_schedule(c.optimizer, epoch_);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffler(derive_seed(c.seed, {kShuffleTag, static_cast<std::uint64_t>(epoch_)}));
  shuffler.shuffle(order);

  const MatrixSize crop = c.preproc.crop_size;
  const auto batch_size = static_cast<std::size_t>(c.optimizer.batch_size);
  const std::size_t plane = static_cast<std::size_t>(crop.height) * crop.width;
  double loss_sum = 0.0;
  double disc_sum = 0.0;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, order.size() - start);
    const Shape shape{static_cast<int>(n), 1, crop.height, crop.width};
    Tensor input(shape);
    Tensor target(shape);
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t i = order[start + b];
      const SliceSample& s = data[i];
      Rng rng(derive_seed(c.seed, {kAugmentTag, i, static_cast<std::uint64_t>(s.patient_id),
                                   static_cast<std::uint64_t>(s.slice_index),
                                   static_cast<std::uint64_t>(epoch_)}));
      const SliceSample view = augment(s, c.preproc, rng);
      const Image in = network_input(view, zone);
      const Mask& goal = zone == TargetZone::cg ? view.cg : view.wg;
      std::copy(in.data().begin(), in.data().end(), input.ptr() + b * plane);
      std::transform(goal.data().begin(), goal.data().end(), target.ptr() + b * plane,
                     [](std::uint8_t v) { return v ? 1.0f : 0.0f; });
    }
    const Var x(std::move(input), false);
    double batch_loss = 0.0;
    if (disc_) {
      auto losses = pix2pix_losses(*net_, *disc_, x, target, c.lambda_seg, Mode::train);
      batch_loss = losses.generator.total.value()[0];
      const double d_loss = losses.discriminator.total.value()[0];
      if (!std::isfinite(batch_loss) || !std::isfinite(d_loss)) {
        throw NumericError("non-finite pix2pix loss at epoch " + std::to_string(epoch_));
      }
      // Generator first; its pass also reaches the discriminator weights,
      // which must not count toward the discriminator update.
      backward(losses.generator.total);
      disc_->parameters().zero_grad();
      opt_->step(epoch_);
      backward(losses.discriminator.total);
      disc_opt_->step(epoch_);
      disc_sum += d_loss * static_cast<double>(n);
    } else {
      const Var loss = dsc_loss(net_->forward(x, Mode::train), target);
      batch_loss = loss.value()[0];
      if (!std::isfinite(batch_loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch_));
      }
      backward(loss);
      opt_->step(epoch_);
    }
    loss_sum += batch_loss * static_cast<double>(n);
  }
  stats.samples = data.size();
  if (!data.empty()) {
    stats.loss = loss_sum / static_cast<double>(data.size());
    stats.discriminator_loss = disc_sum / static_cast<double>(data.size());
  }
  ++epoch_;
  return stats;
}

std::vector<Image> Trainer::predict(const std::vector<SliceSample>& views, TargetZone zone) {
  NoGradGuard no_grad;
  std::vector<Image> out;
  out.reserve(views.size());
  for (std::size_t start = 0; start < views.size(); start += kPredictBatch) {
    const std::size_t n = std::min<std::size_t>(kPredictBatch, views.size() - start);
    const int h = views[start].image.height();
    const int w = views[start].image.width();
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    Tensor input({static_cast<int>(n), 1, h, w});
    for (std::size_t b = 0; b < n; ++b) {
      const Image in = network_input(views[start + b], zone);
      require_same_shape(in, views[start].image, "predict batch");
      std::copy(in.data().begin(), in.data().end(), input.ptr() + b * plane);
    }
    const Tensor logits = net_->forward(Var(std::move(input), false), Mode::eval).value();
    if (!logits.all_finite()) throw NumericError("non-finite logits during prediction");
    for (std::size_t b = 0; b < n; ++b) {
      out.emplace_back(h, w, std::vector<float>(logits.ptr() + b * plane, logits.ptr() + (b + 1) * plane));
    }
  }
  return out;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.architecture = to_string(config_.architecture);
  ckpt.base_width = static_cast<std::uint32_t>(config_.base_width);
  ckpt.levels = static_cast<std::uint32_t>(config_.levels);
  ckpt.discriminator_levels = disc_ ? static_cast<std::uint32_t>(config_.discriminator_levels) : 0;
  ckpt.epoch = static_cast<std::uint64_t>(epoch_);
  capture(net_->parameters(), "net.", StateScope::training, ckpt);
  ckpt.set_counter("net.steps", opt_->steps());
  if (disc_) {
    capture(disc_->parameters(), "disc.", StateScope::training, ckpt);
    ckpt.set_counter("disc.steps", disc_opt_->steps());
  }
  return ckpt;
}

void Trainer::check_compatible(const Checkpoint& ckpt) const {
  const auto& c = config_;
  const std::uint32_t disc_levels = disc_ ? static_cast<std::uint32_t>(c.discriminator_levels) : 0;
  if (ckpt.architecture != to_string(c.architecture) ||
      ckpt.base_width != static_cast<std::uint32_t>(c.base_width) ||
      ckpt.levels != static_cast<std::uint32_t>(c.levels) || ckpt.discriminator_levels != disc_levels) {
    throw CheckpointError(
        CheckpointFault::architecture,
        "checkpoint holds " + ckpt.architecture + " width " + std::to_string(ckpt.base_width) +
            " levels " + std::to_string(ckpt.levels) + ", run expects " + to_string(c.architecture) +
            " width " + std::to_string(c.base_width) + " levels " + std::to_string(c.levels));
  }
}

void Trainer::resume(const Checkpoint& ckpt) {
  check_compatible(ckpt);
  const std::uint64_t net_steps = ckpt.counter("net.steps");
  const std::uint64_t disc_steps = disc_ ? ckpt.counter("disc.steps") : 0;
  restore(net_->parameters(), "net.", StateScope::training, ckpt);
  if (disc_) restore(disc_->parameters(), "disc.", StateScope::training, ckpt);
  opt_->set_steps(net_steps);
  if (disc_) disc_opt_->set_steps(disc_steps);
  epoch_ = static_cast<int>(ckpt.epoch);
}

void Trainer::load_weights(const Checkpoint& ckpt) {
  check_compatible(ckpt);
  restore(net_->parameters(), "net.", StateScope::weights, ckpt);
  if (disc_) restore(disc_->parameters(), "disc.", StateScope::weights, ckpt);
}

}  // namespace zseg
