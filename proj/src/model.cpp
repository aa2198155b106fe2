#include "samp/model.hpp"

#include <algorithm>
#include <cmath>

namespace samp {

namespace {

int half_dim(const ModelConfig& cfg) { return cfg.pattern_dim / 2; }

int proj_input_len(const ModelConfig& cfg, int pattern_id) {
    int k = kPartitionCounts[pattern_id - 1];
    int len = k * cfg.channels;
    if (cfg.use_saliency) len += cfg.saliency_height() * cfg.saliency_width();
    return len;
}

// y = W^T x + b, accumulated in double
void linear_forward(const LinearParam<float>& p, const std::vector<double>& x, double* y) {
    for (int j = 0; j < p.out; ++j) y[j] = p.b[j];
    for (int i = 0; i < p.in; ++i) {
        const double xi = x[i];
        const float* wrow = p.w.data() + static_cast<std::size_t>(i) * p.out;
        for (int j = 0; j < p.out; ++j) y[j] += xi * wrow[j];
    }
}

// dx = W dy; dW += x dy^T; db += dy
void linear_backward(const LinearParam<float>& p, const std::vector<double>& x, const double* dy,
                     LinearParam<double>& dp, std::vector<double>* dx) {
    if (dx) {
        dx->assign(static_cast<std::size_t>(p.in), 0.0);
        for (int i = 0; i < p.in; ++i) {
            const float* wrow = p.w.data() + static_cast<std::size_t>(i) * p.out;
            double acc = 0.0;
            for (int j = 0; j < p.out; ++j) acc += wrow[j] * dy[j];
            (*dx)[i] = acc;
        }
    }
    for (int i = 0; i < p.in; ++i) {
        const double xi = x[i];
        double* dwrow = dp.w.data() + static_cast<std::size_t>(i) * p.out;
        for (int j = 0; j < p.out; ++j) dwrow[j] += xi * dy[j];
    }
    for (int j = 0; j < p.out; ++j) dp.b[j] += dy[j];
}

void softmax(const double* z, double* y, int n) {
    double mx = z[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, z[i]);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        y[i] = std::exp(z[i] - mx);
        sum += y[i];
    }
    for (int i = 0; i < n; ++i) y[i] /= sum;
}

// dz_j = y_j (dy_j - sum_i dy_i y_i)
void softmax_backward(const double* y, const double* dy, double* dz, int n) {
    double dot = 0.0;
    for (int i = 0; i < n; ++i) dot += dy[i] * y[i];
    for (int j = 0; j < n; ++j) dz[j] = y[j] * (dy[j] - dot);
}

std::vector<double> apply_mask(const std::vector<double>& x, const std::vector<double>& mask) {
    if (mask.empty()) return x;
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * mask[i];
    return out;
}

std::vector<double> draw_mask(Rng& rng, std::size_t n, double rate) {
    std::vector<double> mask(n);
    const double keep = 1.0 - rate;
    const double scale = 1.0 / keep;
    for (std::size_t i = 0; i < n; ++i) mask[i] = rng.uniform01() < keep ? scale : 0.0;
    return mask;
}

int stem_out_size(int in) { return (in - 1) / 2 + 1; } // 3x3, stride 2, pad 1

} // namespace

std::vector<TensorSpec> tensor_specs(const ModelConfig& cfg) {
    cfg.validate();
    std::vector<TensorSpec> specs;
    const int cp = cfg.pattern_dim;
    for (int p = 1; p <= kPatternCount; ++p) {
        int in = proj_input_len(cfg, p);
        specs.push_back({"samp.proj." + std::to_string(p) + ".w", {in, cp}});
        specs.push_back({"samp.proj." + std::to_string(p) + ".b", {cp}});
    }
    if (cfg.use_pattern_weights) {
        specs.push_back({"samp.gate.w", {cfg.channels, kPatternCount}});
        specs.push_back({"samp.gate.b", {kPatternCount}});
    }
    specs.push_back({"aaff.comp.w", {cp, cp / 2}});
    specs.push_back({"aaff.comp.b", {cp / 2}});
    specs.push_back({"aaff.atts.w", {cp, cp / 2}});
    specs.push_back({"aaff.atts.b", {cp / 2}});
    if (cfg.use_attention_fusion) {
        specs.push_back({"aaff.attn.w", {cp, 2}});
        specs.push_back({"aaff.attn.b", {2}});
    }
    specs.push_back({"head.dist.w", {cp, kScoreBins}});
    specs.push_back({"head.dist.b", {kScoreBins}});
    if (cfg.use_attribute_branch) {
        specs.push_back({"head.attr.w", {cp / 2, kAttributeCount}});
        specs.push_back({"head.attr.b", {kAttributeCount}});
    }
    if (cfg.feature_source == FeatureSource::kToyStem) {
        int in_c = 3;
        for (int l = 1; l <= 5; ++l) {
            int out_c = l == 5 ? cfg.channels : kStemWidths[l - 1];
            specs.push_back({"stem." + std::to_string(l) + ".w", {out_c, in_c, 3, 3}});
            specs.push_back({"stem." + std::to_string(l) + ".b", {out_c}});
            in_c = out_c;
        }
    }
    return specs;
}

std::size_t param_count(const ModelConfig& cfg) {
    std::size_t n = 0;
    for (const auto& spec : tensor_specs(cfg)) {
        std::size_t t = 1;
        for (int d : spec.shape) t *= static_cast<std::size_t>(d);
        n += t;
    }
    return n;
}

ModelGeometry make_geometry(const ModelConfig& cfg) {
    cfg.validate();
    ModelGeometry geom;
    geom.feat_patterns = make_pattern_set(cfg.height, cfg.width);
    geom.sal_patterns = make_pattern_set(cfg.saliency_height(), cfg.saliency_width());
    for (int p = 1; p <= kPatternCount; ++p) geom.proj_in[p - 1] = proj_input_len(cfg, p);
    return geom;
}

namespace {

template <typename T>
ParamSetT<T> make_param_set(const ModelConfig& cfg) {
    ParamSetT<T> ps;
    ps.proj.resize(kPatternCount);
    for (int p = 1; p <= kPatternCount; ++p)
        ps.proj[p - 1].resize(proj_input_len(cfg, p), cfg.pattern_dim);
    if (cfg.use_pattern_weights) ps.gate.resize(cfg.channels, kPatternCount);
    ps.comp.resize(cfg.pattern_dim, cfg.pattern_dim / 2);
    ps.atts.resize(cfg.pattern_dim, cfg.pattern_dim / 2);
    if (cfg.use_attention_fusion) ps.attn.resize(cfg.pattern_dim, 2);
    ps.dist.resize(cfg.pattern_dim, kScoreBins);
    if (cfg.use_attribute_branch) ps.attr.resize(cfg.pattern_dim / 2, kAttributeCount);
    if (cfg.feature_source == FeatureSource::kToyStem) {
        ps.stem.resize(5);
        int in_c = 3;
        for (int l = 0; l < 5; ++l) {
            int out_c = l == 4 ? cfg.channels : kStemWidths[l];
            ps.stem[l].resize(in_c, out_c);
            in_c = out_c;
        }
    }
    return ps;
}

} // namespace

GradSet make_grad_set(const ModelConfig& cfg) { return make_param_set<double>(cfg); }

void zero_grads(GradSet& grads) {
    for_each_tensor(grads, [](const std::string&, std::vector<double>& v) {
        std::fill(v.begin(), v.end(), 0.0);
    });
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    ModelParams ps = make_param_set<float>(cfg);
    // Per-tensor sub-seeds keep shared tensors identical across ablation
    // toggles, which the trainer equivalence tests rely on.
    auto fill_uniform = [&](const std::string& name, std::vector<float>& v, double bound) {
        Rng rng(mix_seed(seed, hash_str(name)));
        for (float& x : v) x = static_cast<float>(rng.uniform(-bound, bound));
    };
    for (std::size_t p = 0; p < ps.proj.size(); ++p) {
        auto& lin = ps.proj[p];
        fill_uniform("samp.proj." + std::to_string(p + 1) + ".w", lin.w,
                     std::sqrt(6.0 / (lin.in + lin.out)));
    }
    if (!ps.gate.w.empty())
        fill_uniform("samp.gate.w", ps.gate.w, std::sqrt(6.0 / (ps.gate.in + ps.gate.out)));
    fill_uniform("aaff.comp.w", ps.comp.w, std::sqrt(6.0 / (ps.comp.in + ps.comp.out)));
    fill_uniform("aaff.atts.w", ps.atts.w, std::sqrt(6.0 / (ps.atts.in + ps.atts.out)));
    if (!ps.attn.w.empty())
        fill_uniform("aaff.attn.w", ps.attn.w, std::sqrt(6.0 / (ps.attn.in + ps.attn.out)));
    fill_uniform("head.dist.w", ps.dist.w, std::sqrt(6.0 / (ps.dist.in + ps.dist.out)));
    if (!ps.attr.w.empty())
        fill_uniform("head.attr.w", ps.attr.w, std::sqrt(6.0 / (ps.attr.in + ps.attr.out)));
    for (std::size_t l = 0; l < ps.stem.size(); ++l) {
        auto& conv = ps.stem[l];
        // He-style bound for the ReLU convolutions
        fill_uniform("stem." + std::to_string(l + 1) + ".w", conv.w, std::sqrt(6.0 / (conv.in_c * 9)));
    }
    return ps;
}

Volume conv3x3s2_forward(const ConvParam<float>& p, const Volume& in) {
    if (in.c != p.in_c) throw ValidationError("conv: input channel mismatch");
    Volume out;
    out.resize(p.out_c, stem_out_size(in.h), stem_out_size(in.w));
    for (int oc = 0; oc < p.out_c; ++oc) {
        double* oplane = out.v.data() + static_cast<std::size_t>(oc) * out.h * out.w;
        for (std::size_t i = 0; i < static_cast<std::size_t>(out.h) * out.w; ++i) oplane[i] = p.b[oc];
        for (int ic = 0; ic < p.in_c; ++ic) {
            const double* iplane = in.v.data() + static_cast<std::size_t>(ic) * in.h * in.w;
            const float* k = p.w.data() + (static_cast<std::size_t>(oc) * p.in_c + ic) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const double kv = k[ky * 3 + kx];
                    if (kv == 0.0) continue;
                    for (int oy = 0; oy < out.h; ++oy) {
                        int iy = 2 * oy + ky - 1;
                        if (iy < 0 || iy >= in.h) continue;
                        const double* irow = iplane + static_cast<std::size_t>(iy) * in.w;
                        double* orow = oplane + static_cast<std::size_t>(oy) * out.w;
                        for (int ox = 0; ox < out.w; ++ox) {
                            int ix = 2 * ox + kx - 1;
                            if (ix < 0 || ix >= in.w) continue;
                            orow[ox] += kv * irow[ix];
                        }
                    }
                }
            }
        }
    }
    return out;
}

void conv3x3s2_backward(const ConvParam<float>& p, const Volume& in, const Volume& d_out,
                        ConvParam<double>& d_p, Volume* d_in) {
    if (d_in) d_in->resize(in.c, in.h, in.w);
    const int oh = d_out.h, ow = d_out.w;
    for (int oc = 0; oc < p.out_c; ++oc) {
        const double* dplane = d_out.v.data() + static_cast<std::size_t>(oc) * oh * ow;
        double db = 0.0;
        for (std::size_t i = 0; i < static_cast<std::size_t>(oh) * ow; ++i) db += dplane[i];
        d_p.b[oc] += db;
        for (int ic = 0; ic < p.in_c; ++ic) {
            const double* iplane = in.v.data() + static_cast<std::size_t>(ic) * in.h * in.w;
            const float* k = p.w.data() + (static_cast<std::size_t>(oc) * p.in_c + ic) * 9;
            double* dk = d_p.w.data() + (static_cast<std::size_t>(oc) * p.in_c + ic) * 9;
            double* diplane = d_in ? d_in->v.data() + static_cast<std::size_t>(ic) * in.h * in.w : nullptr;
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const double kv = k[ky * 3 + kx];
                    double dw = 0.0;
                    for (int oy = 0; oy < oh; ++oy) {
                        int iy = 2 * oy + ky - 1;
                        if (iy < 0 || iy >= in.h) continue;
                        const double* irow = iplane + static_cast<std::size_t>(iy) * in.w;
                        const double* drow = dplane + static_cast<std::size_t>(oy) * ow;
                        double* dirow = diplane ? diplane + static_cast<std::size_t>(iy) * in.w : nullptr;
                        for (int ox = 0; ox < ow; ++ox) {
                            int ix = 2 * ox + kx - 1;
                            if (ix < 0 || ix >= in.w) continue;
                            dw += irow[ix] * drow[ox];
                            if (dirow) dirow[ix] += kv * drow[ox];
                        }
                    }
                    dk[ky * 3 + kx] += dw;
                }
            }
        }
    }
}

Volume image_to_volume(const ImageU8& img) {
    Volume vol;
    vol.resize(img.channels == 1 ? 3 : 3, img.height, img.width);
    // grayscale is replicated across the three stem input channels
    for (int c = 0; c < 3; ++c) {
        int sc = img.channels == 1 ? 0 : c;
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) vol.at(c, y, x) = img.at(y, x, sc) / 255.0;
    }
    return vol;
}

namespace {

void run_stem(const ModelParams& params, const ModelConfig& cfg, const ImageU8& image, ForwardCache& cache) {
    if (image.width != kStemDownscale * cfg.width || image.height != kStemDownscale * cfg.height)
        throw ValidationError("toy stem: expected " + std::to_string(kStemDownscale * cfg.width) + "x" +
                              std::to_string(kStemDownscale * cfg.height) + " input, got " +
                              std::to_string(image.width) + "x" + std::to_string(image.height));
    cache.stem_acts.clear();
    cache.stem_acts.push_back(image_to_volume(image));
    for (int l = 0; l < 5; ++l) {
        Volume pre = conv3x3s2_forward(params.stem[l], cache.stem_acts.back());
        for (double& x : pre.v) x = std::max(0.0, x);
        cache.stem_acts.push_back(std::move(pre));
    }
    cache.feat = cache.stem_acts.back();
}

} // namespace

ModelOutput model_forward(const ModelParams& params, const ModelConfig& cfg, const ModelGeometry& geom,
                          const ModelInput& input, const ForwardOptions& opt, ForwardCache& cache) {
    const int C = cfg.channels;
    const int HW = cfg.height * cfg.width;
    const int cp = cfg.pattern_dim;
    const int half = half_dim(cfg);

    // resolve the feature grid
    if (cfg.feature_source == FeatureSource::kToyStem) {
        if (!input.image) throw ValidationError("model_forward: toy stem requires an image input");
        run_stem(params, cfg, *input.image, cache);
    } else {
        if (!input.features) throw ValidationError("model_forward: precomputed source requires features");
        const FeatureMap& f = *input.features;
        if (f.channels != C || f.height != cfg.height || f.width != cfg.width)
            throw ValidationError("model_forward: feature map shape does not match config");
        cache.stem_acts.clear();
        cache.feat.resize(C, cfg.height, cfg.width);
        for (std::size_t i = 0; i < f.data.size(); ++i) cache.feat.v[i] = f.data[i];
    }

    if (cfg.use_saliency) {
        if (!input.saliency) throw ValidationError("model_forward: saliency enabled but no grid supplied");
        validate_saliency_grid(*input.saliency, cfg.height, cfg.width);
        cache.sal.assign(input.saliency->v.begin(), input.saliency->v.end());
    } else {
        cache.sal.clear();
    }

    // dropout masks
    cache.masks = DropoutMasks{};
    const bool want_dropout = opt.training && opt.dropout_rate > 0.0;
    if (opt.reuse_masks) {
        cache.masks = *opt.reuse_masks;
    } else if (want_dropout) {
        if (!opt.rng) throw ValidationError("model_forward: training with dropout requires an RNG");
        cache.masks.active = true;
        for (int p = 0; p < kPatternCount; ++p)
            cache.masks.proj_in[p] = draw_mask(*opt.rng, geom.proj_in[p], opt.dropout_rate);
        if (cfg.use_pattern_weights) cache.masks.gap = draw_mask(*opt.rng, C, opt.dropout_rate);
        cache.masks.f_samp = draw_mask(*opt.rng, cp, opt.dropout_rate);
        if (cfg.use_attention_fusion) cache.masks.attn_in = draw_mask(*opt.rng, cp, opt.dropout_rate);
        cache.masks.fused = draw_mask(*opt.rng, cp, opt.dropout_rate);
        if (cfg.use_attribute_branch) cache.masks.attr_in = draw_mask(*opt.rng, half, opt.dropout_rate);
    }

    // SAMP: per-pattern pooled features and saliency vectors
    for (int p = 0; p < kPatternCount; ++p) {
        const PartitionMap& fmap = geom.feat_patterns.maps[p];
        const PartitionMap& smap = geom.sal_patterns.maps[p];
        std::vector<double> ftilde;
        ftilde.reserve(geom.proj_in[p]);
        for (int k = 0; k < fmap.partition_count; ++k) {
            if (cfg.use_saliency) {
                for (int cell : smap.cells[k]) ftilde.push_back(cache.sal[cell]);
            }
            const auto& cells = fmap.cells[k];
            const double inv = 1.0 / static_cast<double>(cells.size());
            for (int c = 0; c < C; ++c) {
                const double* plane = cache.feat.v.data() + static_cast<std::size_t>(c) * HW;
                double acc = 0.0;
                for (int cell : cells) acc += plane[cell];
                ftilde.push_back(acc * inv);
            }
        }
        cache.ftilde_dropped[p] = apply_mask(ftilde, cache.masks.proj_in[p]);
        std::vector<double> pre(cp);
        linear_forward(params.proj[p], cache.ftilde_dropped[p], pre.data());
        for (double& x : pre) x = std::max(0.0, x);
        cache.pattern_feat[p] = std::move(pre);
    }

    // pattern weights
    if (cfg.use_pattern_weights) {
        cache.gap.assign(C, 0.0);
        const double inv = 1.0 / HW;
        for (int c = 0; c < C; ++c) {
            const double* plane = cache.feat.v.data() + static_cast<std::size_t>(c) * HW;
            double acc = 0.0;
            for (int i = 0; i < HW; ++i) acc += plane[i];
            cache.gap[c] = acc * inv;
        }
        cache.gap_dropped = apply_mask(cache.gap, cache.masks.gap);
        linear_forward(params.gate, cache.gap_dropped, cache.gate_logits.data());
        softmax(cache.gate_logits.data(), cache.pattern_w.data(), kPatternCount);
    } else {
        cache.gap.clear();
        cache.gap_dropped.clear();
        cache.pattern_w.fill(1.0 / kPatternCount);
    }

    // weighted aggregation
    cache.f_samp.assign(cp, 0.0);
    for (int p = 0; p < kPatternCount; ++p) {
        const double wp = cache.pattern_w[p];
        const auto& fp = cache.pattern_feat[p];
        for (int j = 0; j < cp; ++j) cache.f_samp[j] += wp * fp[j];
    }

    // AAFF: decomposition, attention, fusion
    cache.f_samp_dropped = apply_mask(cache.f_samp, cache.masks.f_samp);
    cache.f_comp.assign(half, 0.0);
    cache.f_atts.assign(half, 0.0);
    linear_forward(params.comp, cache.f_samp_dropped, cache.f_comp.data());
    linear_forward(params.atts, cache.f_samp_dropped, cache.f_atts.data());

    if (cfg.use_attention_fusion) {
        std::vector<double> u(cp);
        std::copy(cache.f_comp.begin(), cache.f_comp.end(), u.begin());
        std::copy(cache.f_atts.begin(), cache.f_atts.end(), u.begin() + half);
        cache.attn_in_dropped = apply_mask(u, cache.masks.attn_in);
        double logits[2];
        linear_forward(params.attn, cache.attn_in_dropped, logits);
        cache.e1 = 1.0 / (1.0 + std::exp(-logits[0]));
        cache.e2 = 1.0 / (1.0 + std::exp(-logits[1]));
    } else {
        cache.attn_in_dropped.clear();
        cache.e1 = 1.0;
        cache.e2 = 1.0;
    }

    cache.fused.resize(cp);
    for (int j = 0; j < half; ++j) {
        cache.fused[j] = cache.e1 * cache.f_comp[j];
        cache.fused[half + j] = cache.e2 * cache.f_atts[j];
    }

    // heads
    cache.fused_dropped = apply_mask(cache.fused, cache.masks.fused);
    linear_forward(params.dist, cache.fused_dropped, cache.dist_logits.data());
    softmax(cache.dist_logits.data(), cache.yhat.data(), kScoreBins);

    ModelOutput out;
    for (int i = 0; i < kScoreBins; ++i) out.dist.probs[i] = cache.yhat[i];
    out.mean = 0.0;
    for (int i = 0; i < kScoreBins; ++i) out.mean += (i + 1) * cache.yhat[i];

    if (cfg.use_attribute_branch) {
        cache.attr_in_dropped = apply_mask(cache.f_atts, cache.masks.attr_in);
        linear_forward(params.attr, cache.attr_in_dropped, cache.attrs.data());
        out.attrs = cache.attrs;
    } else {
        cache.attr_in_dropped.clear();
        cache.attrs.fill(0.0);
    }
    return out;
}

void model_backward(const ModelParams& params, const ModelConfig& cfg, const ModelGeometry& geom,
                    const ForwardCache& cache, const BackwardSignal& signal, GradSet& grads,
                    InputGrads* input_grads) {
    const int C = cfg.channels;
    const int HW = cfg.height * cfg.width;
    const int cp = cfg.pattern_dim;
    const int half = half_dim(cfg);

    Volume d_feat;
    d_feat.resize(C, cfg.height, cfg.width);
    std::vector<double> d_sal(cache.sal.size(), 0.0);

    std::vector<double> d_f_comp(half, 0.0), d_f_atts(half, 0.0);

    // attribute head
    if (cfg.use_attribute_branch) {
        std::vector<double> d_attr_in;
        linear_backward(params.attr, cache.attr_in_dropped, signal.d_attrs.data(), grads.attr, &d_attr_in);
        if (!cache.masks.attr_in.empty())
            for (int j = 0; j < half; ++j) d_attr_in[j] *= cache.masks.attr_in[j];
        for (int j = 0; j < half; ++j) d_f_atts[j] += d_attr_in[j];
    }

    // distribution head through its softmax
    double d_logits[kScoreBins];
    softmax_backward(cache.yhat.data(), signal.d_yhat.data(), d_logits, kScoreBins);
    std::vector<double> d_fused_dropped;
    linear_backward(params.dist, cache.fused_dropped, d_logits, grads.dist, &d_fused_dropped);
    if (!cache.masks.fused.empty())
        for (int j = 0; j < cp; ++j) d_fused_dropped[j] *= cache.masks.fused[j];

    // fusion: fused = [e1 f_comp, e2 f_atts]
    double d_e1 = 0.0, d_e2 = 0.0;
    for (int j = 0; j < half; ++j) {
        d_f_comp[j] += cache.e1 * d_fused_dropped[j];
        d_e1 += cache.f_comp[j] * d_fused_dropped[j];
        d_f_atts[j] += cache.e2 * d_fused_dropped[half + j];
        d_e2 += cache.f_atts[j] * d_fused_dropped[half + j];
    }

    if (cfg.use_attention_fusion) {
        double d_attn_logits[2] = {cache.e1 * (1.0 - cache.e1) * d_e1, cache.e2 * (1.0 - cache.e2) * d_e2};
        std::vector<double> d_u;
        linear_backward(params.attn, cache.attn_in_dropped, d_attn_logits, grads.attn, &d_u);
        if (!cache.masks.attn_in.empty())
            for (int j = 0; j < cp; ++j) d_u[j] *= cache.masks.attn_in[j];
        for (int j = 0; j < half; ++j) {
            d_f_comp[j] += d_u[j];
            d_f_atts[j] += d_u[half + j];
        }
    }

    // decomposition heads share the dropped f_samp input
    std::vector<double> d_in_comp, d_in_atts;
    linear_backward(params.comp, cache.f_samp_dropped, d_f_comp.data(), grads.comp, &d_in_comp);
    linear_backward(params.atts, cache.f_samp_dropped, d_f_atts.data(), grads.atts, &d_in_atts);
    std::vector<double> d_f_samp(cp);
    for (int j = 0; j < cp; ++j) {
        double g = d_in_comp[j] + d_in_atts[j];
        if (!cache.masks.f_samp.empty()) g *= cache.masks.f_samp[j];
        d_f_samp[j] = g;
    }

    // weighted aggregation
    std::array<double, kPatternCount> d_w{};
    for (int p = 0; p < kPatternCount; ++p) {
        double acc = 0.0;
        const auto& fp = cache.pattern_feat[p];
        for (int j = 0; j < cp; ++j) acc += fp[j] * d_f_samp[j];
        d_w[p] = acc;
    }

    if (cfg.use_pattern_weights) {
        double d_gate_logits[kPatternCount];
        softmax_backward(cache.pattern_w.data(), d_w.data(), d_gate_logits, kPatternCount);
        std::vector<double> d_gap;
        linear_backward(params.gate, cache.gap_dropped, d_gate_logits, grads.gate, &d_gap);
        if (!cache.masks.gap.empty())
            for (int c = 0; c < C; ++c) d_gap[c] *= cache.masks.gap[c];
        const double inv = 1.0 / HW;
        for (int c = 0; c < C; ++c) {
            double g = d_gap[c] * inv;
            double* plane = d_feat.v.data() + static_cast<std::size_t>(c) * HW;
            for (int i = 0; i < HW; ++i) plane[i] += g;
        }
    }

    // per-pattern projection and pooling
    for (int p = 0; p < kPatternCount; ++p) {
        const auto& fp = cache.pattern_feat[p];
        std::vector<double> d_pre(cp);
        for (int j = 0; j < cp; ++j) d_pre[j] = fp[j] > 0.0 ? cache.pattern_w[p] * d_f_samp[j] : 0.0;
        std::vector<double> d_ftilde;
        linear_backward(params.proj[p], cache.ftilde_dropped[p], d_pre.data(), grads.proj[p], &d_ftilde);
        if (!cache.masks.proj_in[p].empty())
            for (std::size_t i = 0; i < d_ftilde.size(); ++i) d_ftilde[i] *= cache.masks.proj_in[p][i];

        const PartitionMap& fmap = geom.feat_patterns.maps[p];
        const PartitionMap& smap = geom.sal_patterns.maps[p];
        std::size_t off = 0;
        for (int k = 0; k < fmap.partition_count; ++k) {
            if (cfg.use_saliency) {
                for (int cell : smap.cells[k]) d_sal[cell] += d_ftilde[off++];
            }
            const auto& cells = fmap.cells[k];
            const double inv = 1.0 / static_cast<double>(cells.size());
            for (int c = 0; c < C; ++c) {
                const double g = d_ftilde[off++] * inv;
                double* plane = d_feat.v.data() + static_cast<std::size_t>(c) * HW;
                for (int cell : cells) plane[cell] += g;
            }
        }
    }

    // stem
    Volume d_image;
    if (cfg.feature_source == FeatureSource::kToyStem) {
        Volume d_act = d_feat;
        for (int l = 4; l >= 0; --l) {
            const Volume& act = cache.stem_acts[l + 1];
            for (std::size_t i = 0; i < d_act.v.size(); ++i)
                if (act.v[i] <= 0.0) d_act.v[i] = 0.0;
            Volume d_prev;
            const bool need_input_grad = l > 0 || input_grads != nullptr;
            conv3x3s2_backward(params.stem[l], cache.stem_acts[l], d_act, grads.stem[l],
                               need_input_grad ? &d_prev : nullptr);
            d_act = std::move(d_prev);
        }
        d_image = std::move(d_act);
    }

    if (input_grads) {
        input_grads->d_feat = std::move(d_feat);
        input_grads->d_sal = std::move(d_sal);
        input_grads->d_image = std::move(d_image);
    }
}

Checkpoint to_checkpoint(const ModelParams& params, const ModelConfig& cfg) {
    Checkpoint ckpt;
    ckpt.config = cfg.canonical_string();
    auto specs = tensor_specs(cfg);
    std::size_t idx = 0;
    // for_each_tensor iterates in tensor_specs order
    for_each_tensor(const_cast<ModelParams&>(params), [&](const std::string& name, std::vector<float>& v) {
        if (idx >= specs.size() || specs[idx].name != name)
            throw ValidationError("to_checkpoint: tensor order mismatch at " + name);
        ckpt.tensors.push_back({name, specs[idx].shape, v});
        ++idx;
    });
    return ckpt;
}

ModelParams params_from_checkpoint(const Checkpoint& ckpt, ModelConfig& cfg_out) {
    cfg_out = ModelConfig::from_canonical_string(ckpt.config);
    ModelParams params = make_param_set<float>(cfg_out);
    auto specs = tensor_specs(cfg_out);
    std::size_t idx = 0;
    for_each_tensor(params, [&](const std::string& name, std::vector<float>& v) {
        const CheckpointTensor* t = ckpt.find(name);
        if (!t) throw ValidationError("checkpoint: missing tensor '" + name + "'");
        if (t->shape != specs[idx].shape)
            throw ValidationError("checkpoint: tensor '" + name + "' has unexpected shape");
        v = t->values;
        ++idx;
    });
    return params;
}

std::vector<double> partition_avg_pool(const FeatureMap& f, const std::vector<int>& cells) {
    if (cells.empty()) throw ValidationError("partition_avg_pool: empty cell list");
    const int plane = f.height * f.width;
    std::vector<double> out(f.channels, 0.0);
    for (int cell : cells) {
        if (cell < 0 || cell >= plane) throw ValidationError("partition_avg_pool: cell outside grid");
    }
    const double inv = 1.0 / static_cast<double>(cells.size());
    for (int c = 0; c < f.channels; ++c) {
        const float* p = f.data.data() + static_cast<std::size_t>(c) * plane;
        double acc = 0.0;
        for (int cell : cells) acc += p[cell];
        out[c] = acc * inv;
    }
    return out;
}

std::vector<double> partition_saliency_vector(const SaliencyGrid& grid, const std::vector<int>& cells) {
    const int plane = grid.height * grid.width;
    std::vector<double> out;
    out.reserve(cells.size());
    for (int cell : cells) {
        if (cell < 0 || cell >= plane) throw ValidationError("partition_saliency_vector: cell outside grid");
        out.push_back(grid.v[cell]);
    }
    return out;
}

std::vector<double> pattern_feature(const FeatureMap& f, const SaliencyGrid* grid, int pattern_id,
                                    const ModelParams& params, const ModelConfig& cfg,
                                    const ModelGeometry& geom) {
    if (pattern_id < 1 || pattern_id > kPatternCount)
        throw ValidationError("pattern_feature: pattern id outside 1..8");
    if (cfg.use_saliency && !grid) throw ValidationError("pattern_feature: saliency enabled but missing grid");

    const PartitionMap& fmap = geom.feat_patterns.maps[pattern_id - 1];
    const PartitionMap& smap = geom.sal_patterns.maps[pattern_id - 1];
    std::vector<double> ftilde;
    ftilde.reserve(geom.proj_in[pattern_id - 1]);
    for (int k = 0; k < fmap.partition_count; ++k) {
        if (cfg.use_saliency) {
            auto psi = partition_saliency_vector(*grid, smap.cells[k]);
            ftilde.insert(ftilde.end(), psi.begin(), psi.end());
        }
        auto theta = partition_avg_pool(f, fmap.cells[k]);
        ftilde.insert(ftilde.end(), theta.begin(), theta.end());
    }
    const auto& lin = params.proj[pattern_id - 1];
    if (static_cast<int>(ftilde.size()) != lin.in)
        throw ValidationError("pattern_feature: projection input length mismatch");
    std::vector<double> out(cfg.pattern_dim);
    linear_forward(lin, ftilde, out.data());
    for (double& x : out) x = std::max(0.0, x);
    return out;
}

std::array<double, kPatternCount> pattern_weights(const FeatureMap& f, const ModelParams& params,
                                                  const ModelConfig& cfg) {
    std::array<double, kPatternCount> w{};
    if (!cfg.use_pattern_weights) {
        w.fill(1.0 / kPatternCount);
        return w;
    }
    std::vector<double> gap(cfg.channels, 0.0);
    const int plane = f.height * f.width;
    for (int c = 0; c < cfg.channels; ++c) {
        const float* p = f.data.data() + static_cast<std::size_t>(c) * plane;
        double acc = 0.0;
        for (int i = 0; i < plane; ++i) acc += p[i];
        gap[c] = acc / plane;
    }
    std::array<double, kPatternCount> logits{};
    linear_forward(params.gate, gap, logits.data());
    softmax(logits.data(), w.data(), kPatternCount);
    return w;
}

AaffOutput aaff_forward(const std::vector<double>& f_samp, const ModelParams& params, const ModelConfig& cfg) {
    const int cp = cfg.pattern_dim;
    const int half = half_dim(cfg);
    if (static_cast<int>(f_samp.size()) != cp)
        throw ValidationError("aaff_forward: f_samp length mismatch");
    AaffOutput out;
    out.f_comp.assign(half, 0.0);
    out.f_atts.assign(half, 0.0);
    linear_forward(params.comp, f_samp, out.f_comp.data());
    linear_forward(params.atts, f_samp, out.f_atts.data());
    if (cfg.use_attention_fusion) {
        std::vector<double> u(cp);
        std::copy(out.f_comp.begin(), out.f_comp.end(), u.begin());
        std::copy(out.f_atts.begin(), out.f_atts.end(), u.begin() + half);
        double logits[2];
        linear_forward(params.attn, u, logits);
        out.e1 = 1.0 / (1.0 + std::exp(-logits[0]));
        out.e2 = 1.0 / (1.0 + std::exp(-logits[1]));
    }
    out.fused.resize(cp);
    for (int j = 0; j < half; ++j) {
        out.fused[j] = out.e1 * out.f_comp[j];
        out.fused[half + j] = out.e2 * out.f_atts[j];
    }
    return out;
}

ScoreDistribution predict_distribution(const std::vector<double>& fused, const ModelParams& params) {
    if (static_cast<int>(fused.size()) != params.dist.in)
        throw ValidationError("predict_distribution: fused length mismatch");
    double logits[kScoreBins];
    linear_forward(params.dist, fused, logits);
    ScoreDistribution d;
    softmax(logits, d.probs.data(), kScoreBins);
    return d;
}

std::array<double, kAttributeCount> predict_attributes(const std::vector<double>& f_atts,
                                                       const ModelParams& params, const ModelConfig& cfg) {
    if (!cfg.use_attribute_branch)
        throw ValidationError("predict_attributes: attribute branch disabled");
    if (static_cast<int>(f_atts.size()) != params.attr.in)
        throw ValidationError("predict_attributes: f_atts length mismatch");
    std::array<double, kAttributeCount> out{};
    linear_forward(params.attr, f_atts, out.data());
    return out;
}

FeatureMap toy_stem_forward(const ModelParams& params, const ModelConfig& cfg, const ImageU8& image) {
    if (cfg.feature_source != FeatureSource::kToyStem)
        throw ValidationError("toy_stem_forward: config does not use the toy stem");
    ForwardCache cache;
    run_stem(params, cfg, image, cache);
    FeatureMap f;
    f.channels = cache.feat.c;
    f.height = cache.feat.h;
    f.width = cache.feat.w;
    f.data.resize(cache.feat.v.size());
    for (std::size_t i = 0; i < f.data.size(); ++i) f.data[i] = static_cast<float>(cache.feat.v[i]);
    return f;
}

} // namespace samp
