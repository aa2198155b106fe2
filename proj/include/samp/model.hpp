#ifndef SAMP_MODEL_HPP
#define SAMP_MODEL_HPP

#include "samp/common.hpp"
#include "samp/image.hpp"
#include "samp/io.hpp"
#include "samp/patterns.hpp"
#include "samp/types.hpp"

#include <array>
#include <string>
#include <vector>

namespace samp {

// Linear layer, weights stored input-major: w[i * out + j].
template <typename T>
struct LinearParam {
    int in = 0;
    int out = 0;
    std::vector<T> w;
    std::vector<T> b;

    void resize(int in_dim, int out_dim) {
        in = in_dim;
        out = out_dim;
        w.assign(static_cast<std::size_t>(in_dim) * out_dim, T(0));
        b.assign(static_cast<std::size_t>(out_dim), T(0));
    }
};

// 3x3 convolution, stride 2, zero padding 1. Weights out_c x in_c x 3 x 3.
template <typename T>
struct ConvParam {
    int in_c = 0;
    int out_c = 0;
    std::vector<T> w;
    std::vector<T> b;

    void resize(int in_channels, int out_channels) {
        in_c = in_channels;
        out_c = out_channels;
        w.assign(static_cast<std::size_t>(out_channels) * in_channels * 9, T(0));
        b.assign(static_cast<std::size_t>(out_channels), T(0));
    }
};

// Every learnable tensor of SAMP + AAFF + heads (+ optional toy stem).
// Tensors behind a disabled toggle are absent (zero-sized), which is what the
// ablation parameter-count checks rely on.
template <typename T>
struct ParamSetT {
    std::vector<LinearParam<T>> proj; // one per pattern
    LinearParam<T> gate;
    LinearParam<T> comp;
    LinearParam<T> atts;
    LinearParam<T> attn;
    LinearParam<T> dist;
    LinearParam<T> attr;
    std::vector<ConvParam<T>> stem;
};

using ModelParams = ParamSetT<float>;
using GradSet = ParamSetT<double>;

// Stem widths after each of the five stride-2 convolutions; the final width
// is the configured channel count.
inline constexpr std::array<int, 4> kStemWidths = {8, 16, 16, 16};
inline constexpr int kStemDownscale = 32; // 2^5

struct TensorSpec {
    std::string name;
    std::vector<int> shape;
};

// Canonical tensor inventory for a config; single source of truth for
// initialization, checkpoints, Adam state, and parameter counting.
std::vector<TensorSpec> tensor_specs(const ModelConfig& cfg);
std::size_t param_count(const ModelConfig& cfg);

// Applies f(name, vector<T>&) over the live tensors in tensor_specs order.
template <typename T, typename F>
void for_each_tensor(ParamSetT<T>& params, F&& f) {
    for (std::size_t p = 0; p < params.proj.size(); ++p) {
        f("samp.proj." + std::to_string(p + 1) + ".w", params.proj[p].w);
        f("samp.proj." + std::to_string(p + 1) + ".b", params.proj[p].b);
    }
    if (!params.gate.w.empty()) {
        f("samp.gate.w", params.gate.w);
        f("samp.gate.b", params.gate.b);
    }
    f("aaff.comp.w", params.comp.w);
    f("aaff.comp.b", params.comp.b);
    f("aaff.atts.w", params.atts.w);
    f("aaff.atts.b", params.atts.b);
    if (!params.attn.w.empty()) {
        f("aaff.attn.w", params.attn.w);
        f("aaff.attn.b", params.attn.b);
    }
    f("head.dist.w", params.dist.w);
    f("head.dist.b", params.dist.b);
    if (!params.attr.w.empty()) {
        f("head.attr.w", params.attr.w);
        f("head.attr.b", params.attr.b);
    }
    for (std::size_t l = 0; l < params.stem.size(); ++l) {
        f("stem." + std::to_string(l + 1) + ".w", params.stem[l].w);
        f("stem." + std::to_string(l + 1) + ".b", params.stem[l].b);
    }
}

// Double-precision activation tensor, channel-major.
struct Volume {
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<double> v;

    void resize(int c_, int h_, int w_) {
        c = c_;
        h = h_;
        w = w_;
        v.assign(static_cast<std::size_t>(c_) * h_ * w_, 0.0);
    }
    double& at(int ci, int y, int x) { return v[(static_cast<std::size_t>(ci) * h + y) * w + x]; }
    double at(int ci, int y, int x) const { return v[(static_cast<std::size_t>(ci) * h + y) * w + x]; }
};

// Partition maps at both resolutions plus derived projection input widths.
struct ModelGeometry {
    PatternSet feat_patterns;
    PatternSet sal_patterns;
    std::array<int, kPatternCount> proj_in{};
};

ModelGeometry make_geometry(const ModelConfig& cfg);

struct DropoutMasks {
    bool active = false;
    // multiplier vectors: entries are 0 or 1/keep_prob
    std::array<std::vector<double>, kPatternCount> proj_in;
    std::vector<double> gap, f_samp, attn_in, fused, attr_in;
};

struct ForwardCache {
    // inputs as seen by the graph
    Volume feat;                       // C x H x W feature grid (stem output or promoted input)
    std::vector<double> sal;           // row-major saliency grid; empty when saliency disabled
    std::vector<Volume> stem_acts;     // stem_acts[0] = image, then post-ReLU activations

    std::array<std::vector<double>, kPatternCount> ftilde_dropped; // proj inputs
    std::array<std::vector<double>, kPatternCount> pattern_feat;   // f^p, post-ReLU
    std::vector<double> gap, gap_dropped;
    std::array<double, kPatternCount> gate_logits{};
    std::array<double, kPatternCount> pattern_w{};
    std::vector<double> f_samp, f_samp_dropped;
    std::vector<double> f_comp, f_atts;
    std::vector<double> attn_in_dropped;
    double e1 = 1.0, e2 = 1.0;
    std::vector<double> fused, fused_dropped;
    std::array<double, kScoreBins> dist_logits{};
    std::array<double, kScoreBins> yhat{};
    std::vector<double> attr_in_dropped;
    std::array<double, kAttributeCount> attrs{};

    DropoutMasks masks;
};

struct ModelInput {
    const FeatureMap* features = nullptr; // FeatureSource::kPrecomputed
    const ImageU8* image = nullptr;       // FeatureSource::kToyStem
    const SaliencyGrid* saliency = nullptr;
};

struct ForwardOptions {
    bool training = false;
    double dropout_rate = 0.0;
    Rng* rng = nullptr;                   // draws masks when training
    const DropoutMasks* reuse_masks = nullptr; // replay a cached mask set
};

struct ModelOutput {
    ScoreDistribution dist;
    double mean = 0.0;
    std::array<double, kAttributeCount> attrs{};
};

ModelOutput model_forward(const ModelParams& params, const ModelConfig& cfg, const ModelGeometry& geom,
                          const ModelInput& input, const ForwardOptions& opt, ForwardCache& cache);

// Upstream gradients, already scaled by any loss weights / batch factors.
struct BackwardSignal {
    std::array<double, kScoreBins> d_yhat{};
    std::array<double, kAttributeCount> d_attrs{};
};

struct InputGrads {
    Volume d_feat;
    std::vector<double> d_sal;
    Volume d_image;
};

// Reverse pass over a cache produced by model_forward. Gradients are
// accumulated (+=) into `grads`, which must match the live tensor layout.
void model_backward(const ModelParams& params, const ModelConfig& cfg, const ModelGeometry& geom,
                    const ForwardCache& cache, const BackwardSignal& signal, GradSet& grads,
                    InputGrads* input_grads = nullptr);

GradSet make_grad_set(const ModelConfig& cfg);
void zero_grads(GradSet& grads);

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

Checkpoint to_checkpoint(const ModelParams& params, const ModelConfig& cfg);
ModelParams params_from_checkpoint(const Checkpoint& ckpt, ModelConfig& cfg_out);

// --- spec-level operations, eval mode (no dropout) ---

std::vector<double> partition_avg_pool(const FeatureMap& f, const std::vector<int>& cells);
std::vector<double> partition_saliency_vector(const SaliencyGrid& grid, const std::vector<int>& cells);
std::vector<double> pattern_feature(const FeatureMap& f, const SaliencyGrid* grid, int pattern_id,
                                    const ModelParams& params, const ModelConfig& cfg,
                                    const ModelGeometry& geom);
std::array<double, kPatternCount> pattern_weights(const FeatureMap& f, const ModelParams& params,
                                                  const ModelConfig& cfg);

struct AaffOutput {
    std::vector<double> fused;
    std::vector<double> f_comp;
    std::vector<double> f_atts;
    double e1 = 1.0, e2 = 1.0;
};
AaffOutput aaff_forward(const std::vector<double>& f_samp, const ModelParams& params, const ModelConfig& cfg);

ScoreDistribution predict_distribution(const std::vector<double>& fused, const ModelParams& params);
std::array<double, kAttributeCount> predict_attributes(const std::vector<double>& f_atts,
                                                       const ModelParams& params, const ModelConfig& cfg);

// Runs the five stride-2 convolutions; input must be 32H x 32W pixels.
FeatureMap toy_stem_forward(const ModelParams& params, const ModelConfig& cfg, const ImageU8& image);

// Building blocks, exposed for the stem gradient tests.
Volume conv3x3s2_forward(const ConvParam<float>& p, const Volume& in);
void conv3x3s2_backward(const ConvParam<float>& p, const Volume& in, const Volume& d_out,
                        ConvParam<double>& d_p, Volume* d_in);
Volume image_to_volume(const ImageU8& img);

} // namespace samp

#endif
