#include "zseg/models.hpp"

#include <algorithm>
#include <vector>

#include "zseg/errors.hpp"

namespace zseg {

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::segnet: return "segnet";
    case Architecture::unet: return "unet";
    case Architecture::pix2pix: return "pix2pix";
  }
  return "unknown";
}

Architecture parse_architecture(const std::string& name) {
  if (name == "segnet") return Architecture::segnet;
  if (name == "unet") return Architecture::unet;
  if (name == "pix2pix") return Architecture::pix2pix;
  throw ConfigError("unknown architecture '" + name + "' (expected segnet, unet or pix2pix)");
}

int ModelSpec::width_at(int level) const {
  const long wide = static_cast<long>(base_width) << std::min(level, 20);
  return static_cast<int>(std::min<long>(wide, 8L * base_width));
}

ModelSpec segnet_spec(int base_width, int levels) {
  return {Architecture::segnet, NetworkRole::segmenter, base_width, levels, 1, 1};
}
ModelSpec unet_spec(int base_width, int levels) {
  return {Architecture::unet, NetworkRole::segmenter, base_width, levels, 1, 1};
}
ModelSpec pix2pix_generator_spec(int base_width, int levels) {
  return {Architecture::pix2pix, NetworkRole::segmenter, base_width, levels, 1, 1};
}
ModelSpec pix2pix_discriminator_spec(int base_width, int levels) {
  return {Architecture::pix2pix, NetworkRole::discriminator, base_width, levels, 2, 1};
}

template <class T>
void BasicModel<T>::check_input(const Shape& s) const {
  if (s.c != spec_.input_channels) {
    throw ShapeError(to_string(spec_.architecture) + ": expected " +
                     std::to_string(spec_.input_channels) + " input channels, got " + s.str());
  }
}

namespace {

void validate_spec(const ModelSpec& spec) {
  if (spec.base_width < 1) throw ConfigError("base_width must be >= 1");
  if (spec.levels < 1) throw ConfigError("scaling levels must be >= 1");
}

// ---------------------------------------------------------------------------

template <class T>
class SegNet final : public BasicModel<T> {
public:
  SegNet(const ModelSpec& spec, std::uint64_t seed) : BasicModel<T>(spec) {
    auto& p = this->params_;
    Rng rng(seed);
    const auto relu = Activation::relu();
    int c_in = spec.input_channels;
    for (int l = 0; l < spec.levels; ++l) {
      const int c = spec.width_at(l);
      const std::string name = "enc" + std::to_string(l);
      encoder_.push_back({ConvBlock<T>::make(p, rng, name + ".0", c_in, c, relu),
                          ConvBlock<T>::make(p, rng, name + ".1", c, c, relu)});
      c_in = c;
    }
    for (int l = spec.levels - 1; l >= 0; --l) {
      const int c = spec.width_at(l);
      const int c_next = spec.width_at(std::max(l - 1, 0));
      const std::string name = "dec" + std::to_string(l);
      decoder_.push_back({ConvBlock<T>::make(p, rng, name + ".0", c, c, relu),
                          ConvBlock<T>::make(p, rng, name + ".1", c, c_next, relu)});
    }
    head_ = Conv2dLayer<T>::make(p, rng, "head", spec.width_at(0), spec.output_channels, 3, 1, 1,
                                 true);
  }

  BasicVar<T> forward(const BasicVar<T>& batch, Mode mode) override {
    this->check_input(batch.shape());
    std::vector<std::shared_ptr<const PoolIndices>> indices;
    BasicVar<T> x = batch;
    for (const auto& [a, b] : encoder_) {
      x = b(a(x, mode), mode);
      auto pooled = max_pool_2x2(x);
      x = pooled.output;
      indices.push_back(pooled.indices);
    }
    for (const auto& [a, b] : decoder_) {
      x = max_unpool_2x2(x, indices.back());
      indices.pop_back();
      x = b(a(x, mode), mode);
    }
    return head_(x);
  }

private:
  std::vector<std::pair<ConvBlock<T>, ConvBlock<T>>> encoder_;
  std::vector<std::pair<ConvBlock<T>, ConvBlock<T>>> decoder_;
  Conv2dLayer<T> head_;
};

// ---------------------------------------------------------------------------

template <class T>
class UNet final : public BasicModel<T> {
public:
  UNet(const ModelSpec& spec, std::uint64_t seed) : BasicModel<T>(spec) {
    auto& p = this->params_;
    Rng rng(seed);
    const auto relu = Activation::relu();
    int c_in = spec.input_channels;
    for (int l = 0; l < spec.levels; ++l) {
      const int c = spec.width_at(l);
      const std::string name = "enc" + std::to_string(l);
      encoder_.push_back({ConvBlock<T>::make(p, rng, name + ".0", c_in, c, relu),
                          ConvBlock<T>::make(p, rng, name + ".1", c, c, relu)});
      c_in = c;
    }
    const int c_bottom = spec.width_at(spec.levels);
    bottleneck_ = {ConvBlock<T>::make(p, rng, "bottleneck.0", c_in, c_bottom, relu),
                   ConvBlock<T>::make(p, rng, "bottleneck.1", c_bottom, c_bottom, relu)};
    for (int l = spec.levels - 1; l >= 0; --l) {
      const int c = spec.width_at(l);
      const std::string name = "dec" + std::to_string(l);
      Level level;
      level.up = ConvTranspose2dLayer<T>::make(p, rng, name + ".up", spec.width_at(l + 1), c, 2, 2,
                                               0, true);
      level.first = ConvBlock<T>::make(p, rng, name + ".0", 2 * c, c, relu);
      level.second = ConvBlock<T>::make(p, rng, name + ".1", c, c, relu);
      decoder_.push_back(level);
    }
    head_ = Conv2dLayer<T>::make(p, rng, "head", spec.width_at(0), spec.output_channels, 3, 1, 1,
                                 true);
  }

  BasicVar<T> forward(const BasicVar<T>& batch, Mode mode) override {
    this->check_input(batch.shape());
    std::vector<BasicVar<T>> skips;
    BasicVar<T> x = batch;
    for (const auto& [a, b] : encoder_) {
      x = b(a(x, mode), mode);
      skips.push_back(x);
      x = max_pool_2x2(x).output;
    }
    x = bottleneck_.second(bottleneck_.first(x, mode), mode);
    for (const auto& level : decoder_) {
      x = concat_channels(skips.back(), level.up(x));
      skips.pop_back();
      x = level.second(level.first(x, mode), mode);
    }
    return head_(x);
  }

private:
  struct Level {
    ConvTranspose2dLayer<T> up;
    ConvBlock<T> first;
    ConvBlock<T> second;
  };
  std::vector<std::pair<ConvBlock<T>, ConvBlock<T>>> encoder_;
  std::pair<ConvBlock<T>, ConvBlock<T>> bottleneck_;
  std::vector<Level> decoder_;
  Conv2dLayer<T> head_;
};

// ---------------------------------------------------------------------------

template <class T>
class Pix2PixGenerator final : public BasicModel<T> {
public:
  Pix2PixGenerator(const ModelSpec& spec, std::uint64_t seed) : BasicModel<T>(spec) {
    auto& p = this->params_;
    Rng rng(seed);
    const int depth = spec.levels;
    int c_in = spec.input_channels;
    for (int l = 0; l < depth; ++l) {
      const int c = spec.width_at(l);
      const std::string name = "enc" + std::to_string(l);
      // No normalization on the outermost layer or on the 1x1 innermost one.
      const bool normed = l > 0 && l < depth - 1;
      Down down;
      down.conv = Conv2dLayer<T>::make(p, rng, name + ".conv", c_in, c, 4, 2, 1, !normed);
      if (normed) down.norm = BatchNormLayer<T>::make(p, name + ".bn", c);
      encoder_.push_back(down);
      c_in = c;
    }
    for (int l = depth - 1; l >= 0; --l) {
      const std::string name = "dec" + std::to_string(l);
      // Levels below the innermost receive skip-concatenated input.
      const int up_in = l == depth - 1 ? spec.width_at(l) : 2 * spec.width_at(l);
      const bool last = l == 0;
      const int up_out = last ? spec.output_channels : spec.width_at(l - 1);
      Up up;
      up.conv = ConvTranspose2dLayer<T>::make(p, rng, name + ".conv", up_in, up_out, 4, 2, 1, last);
      if (!last) up.norm = BatchNormLayer<T>::make(p, name + ".bn", up_out);
      decoder_.push_back(up);
    }
  }

  BasicVar<T> forward(const BasicVar<T>& batch, Mode mode) override {
    this->check_input(batch.shape());
    const int side = 1 << this->spec_.levels;
    if (batch.shape().h != side || batch.shape().w != side) {
      throw ShapeError("pix2pix generator with " + std::to_string(this->spec_.levels) +
                       " scaling levels requires " + std::to_string(side) + "x" +
                       std::to_string(side) + " input, got " + batch.shape().str());
    }
    const auto leaky = Activation::leaky_relu(0.2f);
    const auto relu = Activation::relu();
    std::vector<BasicVar<T>> features;
    BasicVar<T> x = batch;
    for (std::size_t l = 0; l < encoder_.size(); ++l) {
      if (l > 0) x = activation(x, leaky);
      x = encoder_[l].conv(x);
      if (encoder_[l].norm.gamma) x = encoder_[l].norm(x, mode);
      features.push_back(x);
    }
    features.pop_back();  // the innermost code feeds the decoder directly
    for (const auto& up : decoder_) {
      x = up.conv(activation(x, relu));
      if (up.norm.gamma) {
        x = up.norm(x, mode);
        x = concat_channels(features.back(), x);
        features.pop_back();
      }
    }
    return x;
  }

private:
  struct Down {
    Conv2dLayer<T> conv;
    BatchNormLayer<T> norm;
  };
  struct Up {
    ConvTranspose2dLayer<T> conv;
    BatchNormLayer<T> norm;
  };
  std::vector<Down> encoder_;
  std::vector<Up> decoder_;
};

// ---------------------------------------------------------------------------

template <class T>
class PatchDiscriminator final : public BasicModel<T> {
public:
  PatchDiscriminator(const ModelSpec& spec, std::uint64_t seed) : BasicModel<T>(spec) {
    auto& p = this->params_;
    Rng rng(seed);
    int c_in = spec.input_channels;
    for (int l = 0; l < spec.levels; ++l) {
      const int c = spec.width_at(l);
      const std::string name = "block" + std::to_string(l);
      Block block;
      block.conv = Conv2dLayer<T>::make(p, rng, name + ".conv", c_in, c, 4, 2, 1, l == 0);
      if (l > 0) block.norm = BatchNormLayer<T>::make(p, name + ".bn", c);
      blocks_.push_back(block);
      c_in = c;
    }
    head_ = Conv2dLayer<T>::make(p, rng, "head", c_in, spec.output_channels, 3, 1, 1, true);
  }

  BasicVar<T> forward(const BasicVar<T>& batch, Mode mode) override {
    this->check_input(batch.shape());
    const auto leaky = Activation::leaky_relu(0.2f);
    BasicVar<T> x = batch;
    for (const auto& block : blocks_) {
      x = block.conv(x);
      if (block.norm.gamma) x = block.norm(x, mode);
      x = activation(x, leaky);
    }
    return head_(x);
  }

private:
  struct Block {
    Conv2dLayer<T> conv;
    BatchNormLayer<T> norm;
  };
  std::vector<Block> blocks_;
  Conv2dLayer<T> head_;
};

}  // namespace

template <class T>
std::unique_ptr<BasicModel<T>> build_segnet(int base_width, std::uint64_t seed, int levels) {
  const ModelSpec spec = segnet_spec(base_width, levels);
  validate_spec(spec);
  return std::make_unique<SegNet<T>>(spec, seed);
}

template <class T>
std::unique_ptr<BasicModel<T>> build_unet(int base_width, std::uint64_t seed, int levels) {
  const ModelSpec spec = unet_spec(base_width, levels);
  validate_spec(spec);
  return std::make_unique<UNet<T>>(spec, seed);
}

template <class T>
BasicPix2Pix<T> build_pix2pix(int base_width, std::uint64_t seed, int generator_levels,
                              int discriminator_levels) {
  const ModelSpec gen = pix2pix_generator_spec(base_width, generator_levels);
  const ModelSpec disc = pix2pix_discriminator_spec(base_width, discriminator_levels);
  validate_spec(gen);
  validate_spec(disc);
  if (generator_levels < 2) throw ConfigError("pix2pix generator needs at least 2 levels");
  BasicPix2Pix<T> out;
  out.generator = std::make_unique<Pix2PixGenerator<T>>(gen, seed);
  out.discriminator = std::make_unique<PatchDiscriminator<T>>(disc, derive_seed(seed, {1}));
  return out;
}

template <class T>
std::unique_ptr<BasicModel<T>> build_model(const ModelSpec& spec, std::uint64_t seed) {
  validate_spec(spec);
  if (spec.role != NetworkRole::segmenter) {
    throw ConfigError("build_model builds segmentation networks only");
  }
  switch (spec.architecture) {
    case Architecture::segnet: return std::make_unique<SegNet<T>>(spec, seed);
    case Architecture::unet: return std::make_unique<UNet<T>>(spec, seed);
    case Architecture::pix2pix:
      if (spec.levels < 2) throw ConfigError("pix2pix generator needs at least 2 levels");
      return std::make_unique<Pix2PixGenerator<T>>(spec, seed);
  }
  throw ConfigError("unknown architecture");
}

#define ZSEG_INSTANTIATE_MODELS(T)                                                          \
  template class BasicModel<T>;                                                             \
  template std::unique_ptr<BasicModel<T>> build_segnet<T>(int, std::uint64_t, int);         \
  template std::unique_ptr<BasicModel<T>> build_unet<T>(int, std::uint64_t, int);           \
  template BasicPix2Pix<T> build_pix2pix<T>(int, std::uint64_t, int, int);                  \
  template std::unique_ptr<BasicModel<T>> build_model<T>(const ModelSpec&, std::uint64_t);

ZSEG_INSTANTIATE_MODELS(float)
ZSEG_INSTANTIATE_MODELS(double)

#undef ZSEG_INSTANTIATE_MODELS

}  // namespace zseg
