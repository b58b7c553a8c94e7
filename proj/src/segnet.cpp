#include "lulcseg/segnet.hpp"

#include <cstring>
#include <fstream>
#include <random>

#include <json.hpp>

namespace lulcseg {

using nn::ConvSpec;
using nn::PoolSpec;
using nn::Tensor4f;
using json = nlohmann::ordered_json;

std::string decoder_name(DecoderVariant v) {
  return v == DecoderVariant::modified_unet ? "modified_unet" : "plain_unet";
}

DecoderVariant decoder_from_name(const std::string& name) {
  if (name == "modified_unet") return DecoderVariant::modified_unet;
  if (name == "plain_unet") return DecoderVariant::plain_unet;
  fail(Errc::ConfigParse, "unknown decoder variant '" + name + "'");
}

int ModelConfig::downsample_stages() const {
  int os = output_stride;
  int m = 0;
  while (os > 1) {
    os /= 2;
    ++m;
  }
  return m;
}

void ModelConfig::validate() const {
  require(num_classes >= 2, Errc::InvalidArgument, "need >= 2 classes");
  require(input_channels >= 1, Errc::InvalidArgument, "need >= 1 band");
  require(!encoder_widths.empty(), Errc::WidthMismatch,
          "encoder widths must be non-empty");
  for (int w : encoder_widths)
    require(w >= 1, Errc::WidthMismatch, "encoder widths must be >= 1");
  require(convs_per_stage >= 1, Errc::InvalidArgument,
          "convs per stage must be >= 1");
  const bool pow2 = output_stride >= 2 && output_stride <= 32 &&
                    (output_stride & (output_stride - 1)) == 0;
  require(pow2, Errc::InvalidOutputStride,
          "output stride must be one of {2, 4, 8, 16, 32}");
  require(tile_size >= 1 && tile_size % output_stride == 0,
          Errc::InvalidOutputStride,
          "output stride must divide the tile size");
  require(downsample_stages() <= stages(), Errc::InvalidOutputStride,
          "output stride needs more downsampling stages than the encoder has");
}

std::string ModelConfig::to_json() const {
  json j;
  j["num_classes"] = num_classes;
  j["input_channels"] = input_channels;
  j["encoder_widths"] = encoder_widths;
  j["convs_per_stage"] = convs_per_stage;
  j["decoder_variant"] = decoder_name(decoder_variant);
  j["output_stride"] = output_stride;
  j["tile_size"] = tile_size;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  ModelConfig cfg;
  try {
    const json j = json::parse(text);
    cfg.num_classes = j.at("num_classes").get<int>();
    cfg.input_channels = j.at("input_channels").get<int>();
    cfg.encoder_widths = j.at("encoder_widths").get<std::vector<int>>();
    cfg.convs_per_stage = j.at("convs_per_stage").get<int>();
    cfg.decoder_variant =
        decoder_from_name(j.at("decoder_variant").get<std::string>());
    cfg.output_stride = j.at("output_stride").get<int>();
    cfg.tile_size = j.at("tile_size").get<int>();
  } catch (const json::exception& e) {
    fail(Errc::ConfigParse, std::string("model config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

namespace {

class Builder {
 public:
  Builder(Model& model, uint64_t seed) : model_(model), rng_(seed) {}

  int add_param(const std::string& name, int n, int c, int h, int w,
                bool he_init) {
    Tensor4f t(n, c, h, w);
    if (he_init) {
      const double fan_in = static_cast<double>(c) * h * w;
      const double stddev = std::sqrt(2.0 / fan_in);
      std::normal_distribution<double> dist(0.0, stddev);
      for (auto& x : t.v) x = static_cast<float>(dist(rng_));
    }
    model_.param_names.push_back(name);
    model_.params.push_back(std::move(t));
    return static_cast<int>(model_.params.size()) - 1;
  }

  void conv(const std::string& name, int in_ch, int out_ch, int k, int pad,
            int dilation, bool relu) {
    LayerDef def;
    def.op = LayerOp::conv;
    def.conv.in_channels = in_ch;
    def.conv.out_channels = out_ch;
    def.conv.kh = def.conv.kw = k;
    def.conv.ph = def.conv.pw = pad;
    def.conv.dh = def.conv.dw = dilation;
    def.weight_id = add_param(name + ".weight", out_ch, in_ch, k, k, true);
    def.bias_id = add_param(name + ".bias", out_ch, 1, 1, 1, false);
    model_.layers.push_back(def);
    if (relu) model_.layers.push_back({.op = LayerOp::relu});
  }

  void tconv(const std::string& name, int in_ch, int out_ch) {
    LayerDef def;
    def.op = LayerOp::tconv;
    def.conv.in_channels = in_ch;
    def.conv.out_channels = out_ch;
    def.conv.kh = def.conv.kw = 2;
    def.conv.sh = def.conv.sw = 2;
    def.weight_id = add_param(name + ".weight", in_ch, out_ch, 2, 2, true);
    def.bias_id = add_param(name + ".bias", out_ch, 1, 1, 1, false);
    model_.layers.push_back(def);
  }

  void pool(int stride, int dilation) {
    LayerDef def;
    def.op = LayerOp::pool;
    def.pool = PoolSpec{2, stride, dilation, stride == 1};
    model_.layers.push_back(def);
  }

  void record_skip(int slot) {
    model_.layers.push_back(
        {.op = LayerOp::record_skip, .skip_slot = slot});
  }

  void concat(int slot) {
    model_.layers.push_back({.op = LayerOp::concat, .skip_slot = slot});
  }

 private:
  Model& model_;
  std::mt19937_64 rng_;
};

}  // namespace

Model build_model(const ModelConfig& config, uint64_t seed) {
  config.validate();

  Model model;
  model.config = config;
  Builder b(model, seed);

  const int S = config.stages();
  const int m = config.downsample_stages();

  // Encoder: each stage opens with a 2x2 pool and runs convs_per_stage
  // dilated 3x3 convs. Stages past the output-stride budget pool at stride 1
  // (window dilated to keep the original footprint) and double the conv
  // dilation, so the receptive field matches the fully-strided stack.
  int ch = config.input_channels;
  int size = config.tile_size;
  int dil = 1;
  for (int s = 1; s <= S; ++s) {
    StageMeta meta;
    meta.stage = s;
    const bool converted = s > m;
    if (!converted) {
      b.pool(2, 1);
      meta.pool_stride = 2;
      meta.pool_dilation = 1;
      size /= 2;
    } else {
      b.pool(1, dil);
      meta.pool_stride = 1;
      meta.pool_dilation = dil;
      dil *= 2;
    }
    const int conv_dil = converted ? dil : 1;
    const int width = config.encoder_widths[s - 1];
    for (int i = 1; i <= config.convs_per_stage; ++i) {
      b.conv("encoder.s" + std::to_string(s) + ".conv" + std::to_string(i),
             ch, width, 3, conv_dil, conv_dil, true);
      ch = width;
    }
    meta.conv_dilation = conv_dil;
    meta.out_channels = width;
    meta.out_size = size;
    meta.skip_source = s < m;
    model.stage_metadata.push_back(meta);
    if (meta.skip_source) {
      b.record_skip(s - 1);  // slot index = stage - 1
      model.skip_slots = std::max(model.skip_slots, s);
    }
  }

  // Decoder: one 2x2 transposed conv per upsampling stage, concatenating the
  // equal-resolution encoder output where one exists. The modified variant
  // runs a single 3x3 conv per stage, the plain variant two.
  for (int i = 1; i <= m; ++i) {
    const int skip_stage = m - i;  // 0 = no skip partner
    const int width =
        skip_stage >= 1 ? config.encoder_widths[skip_stage - 1]
                        : config.encoder_widths[0];
    const std::string base = "decoder.u" + std::to_string(i);
    b.tconv(base + ".up", ch, width);
    int cat_ch = width;
    if (skip_stage >= 1) {
      b.concat(skip_stage - 1);
      cat_ch += config.encoder_widths[skip_stage - 1];
    }
    if (config.decoder_variant == DecoderVariant::plain_unet) {
      b.conv(base + ".conv1", cat_ch, cat_ch, 3, 1, 1, true);
      b.conv(base + ".conv2", cat_ch, width, 3, 1, 1, true);
    } else {
      b.conv(base + ".conv1", cat_ch, width, 3, 1, 1, true);
    }
    ch = width;
  }

  b.conv("head", ch, config.num_classes, 1, 0, 1, false);
  return model;
}

nn::Tensor4f forward(const Model& model, const nn::Tensor4f& batch,
                     ForwardTrace* trace) {
  require(batch.c == model.config.input_channels, Errc::ShapeMismatch,
          "batch channels != model input channels");
  require(batch.h == model.config.tile_size &&
              batch.w == model.config.tile_size,
          Errc::ShapeMismatch, "batch spatial dims != model tile size");

  if (trace) {
    trace->layer_inputs.assign(model.layers.size(), Tensor4f{});
    trace->pool_argmax.assign(model.layers.size(), {});
    trace->pool_in_dims.assign(model.layers.size(), {0, 0, 0, 0});
  }

  std::vector<Tensor4f> slots(model.skip_slots);
  Tensor4f cur = batch;
  for (size_t li = 0; li < model.layers.size(); ++li) {
    const LayerDef& layer = model.layers[li];
    switch (layer.op) {
      case LayerOp::pool: {
        if (trace)
          trace->pool_in_dims[li] = {cur.n, cur.c, cur.h, cur.w};
        auto result = nn::maxpool_forward(cur, layer.pool);
        if (trace) trace->pool_argmax[li] = std::move(result.argmax);
        cur = std::move(result.output);
        break;
      }
      case LayerOp::conv: {
        if (trace) trace->layer_inputs[li] = cur;
        cur = nn::conv2d_forward(cur, model.params[layer.weight_id],
                                 model.params[layer.bias_id].v, layer.conv);
        break;
      }
      case LayerOp::tconv: {
        if (trace) trace->layer_inputs[li] = cur;
        cur = nn::tconv2d_forward(cur, model.params[layer.weight_id],
                                  model.params[layer.bias_id].v, layer.conv);
        break;
      }
      case LayerOp::relu: {
        if (trace) trace->layer_inputs[li] = cur;
        cur = nn::relu_forward(cur);
        break;
      }
      case LayerOp::record_skip: {
        slots[layer.skip_slot] = cur;
        break;
      }
      case LayerOp::concat: {
        const Tensor4f& skip = slots[layer.skip_slot];
        require(skip.h == cur.h && skip.w == cur.w, Errc::ShapeMismatch,
                "skip connection resolution mismatch");
        cur = nn::concat_channels(cur, skip);
        break;
      }
    }
  }
  require(cur.all_finite(), Errc::NumericFailure,
          "non-finite activation in forward pass");
  return cur;
}

std::vector<nn::Tensor4f> backward(const Model& model,
                                   const ForwardTrace& trace,
                                   const nn::Tensor4f& grad_logits) {
  std::vector<Tensor4f> grads(model.params.size());
  for (size_t i = 0; i < model.params.size(); ++i) {
    const auto& p = model.params[i];
    grads[i] = Tensor4f(p.n, p.c, p.h, p.w);
  }

  std::vector<Tensor4f> slot_grads(model.skip_slots);
  Tensor4f cur = grad_logits;
  for (size_t idx = model.layers.size(); idx-- > 0;) {
    const LayerDef& layer = model.layers[idx];
    switch (layer.op) {
      case LayerOp::pool: {
        const auto& dims = trace.pool_in_dims[idx];
        cur = nn::maxpool_backward(cur, trace.pool_argmax[idx], dims[0],
                                   dims[1], dims[2], dims[3]);
        break;
      }
      case LayerOp::conv: {
        auto g = nn::conv2d_backward(cur, trace.layer_inputs[idx],
                                     model.params[layer.weight_id],
                                     layer.conv);
        grads[layer.weight_id].v = std::move(g.weights.v);
        std::copy(g.bias.begin(), g.bias.end(),
                  grads[layer.bias_id].v.begin());
        cur = std::move(g.input);
        break;
      }
      case LayerOp::tconv: {
        auto g = nn::tconv2d_backward(cur, trace.layer_inputs[idx],
                                      model.params[layer.weight_id],
                                      layer.conv);
        grads[layer.weight_id].v = std::move(g.weights.v);
        std::copy(g.bias.begin(), g.bias.end(),
                  grads[layer.bias_id].v.begin());
        cur = std::move(g.input);
        break;
      }
      case LayerOp::relu: {
        cur = nn::relu_backward(cur, trace.layer_inputs[idx]);
        break;
      }
      case LayerOp::record_skip: {
        Tensor4f& pending = slot_grads[layer.skip_slot];
        if (pending.size() == cur.size() && pending.size() > 0) {
          for (size_t k = 0; k < cur.v.size(); ++k)
            cur.v[k] += pending.v[k];
        }
        break;
      }
      case LayerOp::concat: {
        // Forward concatenated (decoder, skip); the second half is the
        // recorded encoder stage, whose width the config knows.
        const int skip_width =
            model.config.encoder_widths[layer.skip_slot];
        auto [dec_grad, skip_grad] =
            nn::split_channels(cur, cur.c - skip_width);
        slot_grads[layer.skip_slot] = std::move(skip_grad);
        cur = std::move(dec_grad);
        break;
      }
    }
  }
  return grads;
}

ParamCounts param_count(const Model& model) {
  ParamCounts counts;
  for (size_t i = 0; i < model.params.size(); ++i) {
    const uint64_t n = model.params[i].size();
    const std::string& name = model.param_names[i];
    if (name.rfind("encoder.", 0) == 0) {
      counts.encoder += n;
    } else if (name.rfind("decoder.", 0) == 0) {
      counts.decoder += n;
    } else {
      counts.head += n;
    }
  }
  return counts;
}

namespace {

constexpr char kMagic[8] = {'L', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), Errc::IoFailure, "cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  const std::string cfg = model.config.to_json();
  write_pod(out, static_cast<uint32_t>(cfg.size()));
  out.write(cfg.data(), cfg.size());
  write_pod(out, static_cast<uint32_t>(model.params.size()));
  for (size_t i = 0; i < model.params.size(); ++i) {
    const std::string& name = model.param_names[i];
    write_pod(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), name.size());
    const auto& t = model.params[i];
    write_pod(out, static_cast<uint32_t>(t.n));
    write_pod(out, static_cast<uint32_t>(t.c));
    write_pod(out, static_cast<uint32_t>(t.h));
    write_pod(out, static_cast<uint32_t>(t.w));
    out.write(reinterpret_cast<const char*>(t.v.data()),
              t.v.size() * sizeof(float));
  }
  require(out.good(), Errc::IoFailure, "failed writing " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Errc::IoFailure, "cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  require(in.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
          Errc::ConfigMismatch, "not a checkpoint file: " + path.string());
  const auto version = read_pod<uint32_t>(in);
  require(version == kVersion, Errc::ConfigMismatch,
          "unsupported checkpoint version " + std::to_string(version));
  const auto cfg_len = read_pod<uint32_t>(in);
  std::string cfg_text(cfg_len, '\0');
  in.read(cfg_text.data(), cfg_len);
  const ModelConfig config = ModelConfig::from_json(cfg_text);

  Model model = build_model(config, 0);
  const auto count = read_pod<uint32_t>(in);
  require(count == model.params.size(), Errc::ConfigMismatch,
          "checkpoint tensor count disagrees with config");
  for (uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    require(name == model.param_names[i], Errc::ConfigMismatch,
            "checkpoint tensor '" + name + "' does not match '" +
                model.param_names[i] + "'");
    const int n = static_cast<int>(read_pod<uint32_t>(in));
    const int c = static_cast<int>(read_pod<uint32_t>(in));
    const int h = static_cast<int>(read_pod<uint32_t>(in));
    const int w = static_cast<int>(read_pod<uint32_t>(in));
    auto& t = model.params[i];
    require(n == t.n && c == t.c && h == t.h && w == t.w,
            Errc::ConfigMismatch, "checkpoint tensor dims mismatch: " + name);
    in.read(reinterpret_cast<char*>(t.v.data()), t.v.size() * sizeof(float));
  }
  require(in.good(), Errc::IoFailure, "truncated checkpoint " + path.string());
  return model;
}

Model load_checkpoint(const std::filesystem::path& path,
                      const ModelConfig& expected) {
  Model model = load_checkpoint(path);
  require(model.config == expected, Errc::ConfigMismatch,
          "checkpoint config does not match the requested config");
  return model;
}

}  // namespace lulcseg
