#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "zseg/layers.hpp"

namespace zseg {

enum class Architecture { segnet, unet, pix2pix };
enum class NetworkRole { segmenter, discriminator };

std::string to_string(Architecture arch);
/// Throws ConfigError on an unknown name.
Architecture parse_architecture(const std::string& name);

/// Architecture description. Default scaling levels: SegNet 5, U-Net 4,
/// pix2pix generator 8 and discriminator 5.
struct ModelSpec {
  Architecture architecture = Architecture::unet;
  NetworkRole role = NetworkRole::segmenter;
  int base_width = 64;
  int levels = 4;
  int input_channels = 1;
  int output_channels = 1;

  /// Feature channels at encoder level l: base_width * 2^l capped at 8 * base_width.
  int width_at(int level) const;
};

ModelSpec segnet_spec(int base_width, int levels = 5);
ModelSpec unet_spec(int base_width, int levels = 4);
ModelSpec pix2pix_generator_spec(int base_width, int levels = 8);
ModelSpec pix2pix_discriminator_spec(int base_width, int levels = 5);

/// A network with its own parameters. `forward` emits raw logits.
template <class T>
class BasicModel {
public:
  explicit BasicModel(ModelSpec spec) : spec_(spec) {}
  virtual ~BasicModel() = default;
  BasicModel(const BasicModel&) = delete;
  BasicModel& operator=(const BasicModel&) = delete;

  const ModelSpec& spec() const { return spec_; }
  BasicParameterSet<T>& parameters() { return params_; }
  const BasicParameterSet<T>& parameters() const { return params_; }

  /// Train mode uses batch statistics and records the graph when gradient
  /// recording is enabled.
  virtual BasicVar<T> forward(const BasicVar<T>& batch, Mode mode) = 0;

protected:
  void check_input(const Shape& s) const;

  ModelSpec spec_;
  BasicParameterSet<T> params_;
};

using Model = BasicModel<float>;
using Model64 = BasicModel<double>;

/// Conv-pair encoder with index-recording max pooling, mirrored decoder that
/// unpools with those indices, final 3x3 conv with no activation.
template <class T>
std::unique_ptr<BasicModel<T>> build_segnet(int base_width, std::uint64_t seed, int levels = 5);

/// Double-conv encoder/decoder with max pooling, 2x2 stride-2 transposed-conv
/// upsampling and channel concatenation of mirrored encoder features.
template <class T>
std::unique_ptr<BasicModel<T>> build_unet(int base_width, std::uint64_t seed, int levels = 4);

template <class T>
struct BasicPix2Pix {
  std::unique_ptr<BasicModel<T>> generator;
  std::unique_ptr<BasicModel<T>> discriminator;
};
using Pix2Pix = BasicPix2Pix<float>;

/// Generator: U-Net with 4x4 stride-2 convs reaching 1x1 after `generator_levels`
/// halvings, so inputs must be 2^levels square. Discriminator: stride-2 4x4
/// conv blocks with leaky ReLU(0.2) over (image, mask) pairs, ending in a
/// 3x3 conv producing a patch logit map.
template <class T>
BasicPix2Pix<T> build_pix2pix(int base_width, std::uint64_t seed, int generator_levels = 8,
                              int discriminator_levels = 5);

/// Segmentation network for a spec (segmenter role only).
template <class T>
std::unique_ptr<BasicModel<T>> build_model(const ModelSpec& spec, std::uint64_t seed);

}  // namespace zseg
