#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lulcseg/nn/ops.hpp"
#include "lulcseg/nn/tensor.hpp"

namespace lulcseg {

enum class DecoderVariant { modified_unet, plain_unet };

std::string decoder_name(DecoderVariant v);
DecoderVariant decoder_from_name(const std::string& name);

struct ModelConfig {
  int num_classes = 17;
  int input_channels = 3;
  // Scaled-down defaults keep desk runs fast; paper_scale() restores the
  // VGG widths.
  std::vector<int> encoder_widths = {16, 32, 64, 128, 256};
  int convs_per_stage = 2;
  DecoderVariant decoder_variant = DecoderVariant::modified_unet;
  int output_stride = 4;
  int tile_size = 224;

  void validate() const;
  int stages() const { return static_cast<int>(encoder_widths.size()); }
  int downsample_stages() const;  // log2(output_stride)

  static std::vector<int> paper_scale_widths() {
    return {64, 128, 256, 512, 512};
  }

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  bool operator==(const ModelConfig&) const = default;
};

enum class LayerOp { pool, conv, relu, tconv, concat, record_skip };

struct LayerDef {
  LayerOp op = LayerOp::conv;
  nn::ConvSpec conv;   // conv / tconv layers
  nn::PoolSpec pool;   // pool layers
  int weight_id = -1;  // index into Model::params
  int bias_id = -1;
  int skip_slot = -1;  // concat reads it, record_skip writes it
};

struct StageMeta {
  int stage = 0;          // 1-based encoder stage
  int pool_stride = 0;    // 2 while downsampling, 1 once converted
  int pool_dilation = 1;  // window dilation of a converted pool
  int conv_dilation = 1;
  int out_channels = 0;
  int out_size = 0;  // spatial dims at config.tile_size
  bool skip_source = false;
};

struct Model {
  ModelConfig config;
  std::vector<std::string> param_names;
  std::vector<nn::Tensor4f> params;
  std::vector<LayerDef> layers;
  std::vector<StageMeta> stage_metadata;
  int skip_slots = 0;

  int bottleneck_size() const {
    return config.tile_size / config.output_stride;
  }
};

// Assembles the encoder (per-stage downsample + convs, with atrous
// conversion past the output-stride budget), the chosen decoder, and the
// 1x1 classification head. He-initialized from the seed.
Model build_model(const ModelConfig& config, uint64_t seed);

// Saved activations of one forward pass, consumed by backward().
struct ForwardTrace {
  std::vector<nn::Tensor4f> layer_inputs;          // conv/relu/tconv only
  std::vector<std::vector<int64_t>> pool_argmax;   // pool layers only
  std::vector<std::array<int, 4>> pool_in_dims;
};

// trace=nullptr runs inference-only and keeps no intermediates.
nn::Tensor4f forward(const Model& model, const nn::Tensor4f& batch,
                     ForwardTrace* trace);

// Parameter gradients aligned with model.params.
std::vector<nn::Tensor4f> backward(const Model& model,
                                   const ForwardTrace& trace,
                                   const nn::Tensor4f& grad_logits);

struct ParamCounts {
  uint64_t encoder = 0;
  uint64_t decoder = 0;
  uint64_t head = 0;
  uint64_t total() const { return encoder + decoder + head; }
};

ParamCounts param_count(const Model& model);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);
// Rejects a checkpoint whose embedded config differs from `expected`.
Model load_checkpoint(const std::filesystem::path& path,
                      const ModelConfig& expected);

}  // namespace lulcseg
