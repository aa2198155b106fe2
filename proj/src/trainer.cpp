#include "samp/trainer.hpp"
#include "samp/annotations.hpp"
#include "samp/common.hpp"
#include "samp/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace samp {

void TrainConfig::validate() const {
    if (batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
    if (!(lr_backbone > 0.0) || !(lr_head > 0.0)) throw ValidationError("train config: learning rates must be positive");
    if (weight_decay < 0.0) throw ValidationError("train config: weight_decay must be >= 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("train config: dropout must be in [0,1)");
    if (max_epochs < 1) throw ValidationError("train config: max_epochs must be >= 1");
    if (plateau_patience < 1) throw ValidationError("train config: plateau_patience must be >= 1");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ValidationError("train config: lr_decay must be in (0,1]");
    loss.validate();
    model.validate();
}

TrainConfig TrainConfig::from_key_value_file(const std::string& path,
                                             std::map<std::string, std::string>* extra) {
    std::ifstream f(path);
    if (!f) throw ValidationError("train config: cannot open " + path);
    TrainConfig tc;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError(path + ":" + std::to_string(line_no) + ": expected key=value");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        try {
            if (key == "batch_size") tc.batch_size = std::stoi(val);
            else if (key == "lr_backbone") tc.lr_backbone = std::stod(val);
            else if (key == "lr_head") tc.lr_head = std::stod(val);
            else if (key == "weight_decay") tc.weight_decay = std::stod(val);
            else if (key == "dropout") tc.dropout = std::stod(val);
            else if (key == "adam_beta1") tc.adam_beta1 = std::stod(val);
            else if (key == "adam_beta2") tc.adam_beta2 = std::stod(val);
            else if (key == "adam_eps") tc.adam_eps = std::stod(val);
            else if (key == "plateau_patience") tc.plateau_patience = std::stoi(val);
            else if (key == "plateau_tolerance") tc.plateau_tolerance = std::stod(val);
            else if (key == "lr_decay") tc.lr_decay = std::stod(val);
            else if (key == "max_epochs") tc.max_epochs = std::stoi(val);
            else if (key == "seed") tc.seed = std::stoull(val);
            else if (key == "emd_r") tc.loss.emd_r = std::stod(val);
            else if (key == "lambda") tc.loss.lambda = std::stod(val);
            else if (key == "use_weighted_emd") tc.loss.use_weighted_emd = val == "1" || val == "true";
            else if (key == "channels") tc.model.channels = std::stoi(val);
            else if (key == "height") tc.model.height = std::stoi(val);
            else if (key == "width") tc.model.width = std::stoi(val);
            else if (key == "pattern_dim") tc.model.pattern_dim = std::stoi(val);
            else if (key == "use_saliency") tc.model.use_saliency = val == "1" || val == "true";
            else if (key == "use_pattern_weights") tc.model.use_pattern_weights = val == "1" || val == "true";
            else if (key == "use_attribute_branch") tc.model.use_attribute_branch = val == "1" || val == "true";
            else if (key == "use_attention_fusion") tc.model.use_attention_fusion = val == "1" || val == "true";
            else if (key == "feature_source") {
                if (val == "toy_stem") tc.model.feature_source = FeatureSource::kToyStem;
                else if (val == "precomputed") tc.model.feature_source = FeatureSource::kPrecomputed;
                else throw ValidationError(path + ":" + std::to_string(line_no) + ": unknown feature_source");
            } else if (extra) {
                (*extra)[key] = val;
            } else {
                throw ValidationError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": bad value for '" + key + "'");
        }
    }
    tc.validate();
    return tc;
}

std::string TrainConfig::to_key_value_text() const {
    std::ostringstream os;
    os << "batch_size=" << batch_size << "\n";
    os << "lr_backbone=" << format_double(lr_backbone) << "\n";
    os << "lr_head=" << format_double(lr_head) << "\n";
    os << "weight_decay=" << format_double(weight_decay) << "\n";
    os << "dropout=" << format_double(dropout) << "\n";
    os << "adam_beta1=" << format_double(adam_beta1) << "\n";
    os << "adam_beta2=" << format_double(adam_beta2) << "\n";
    os << "adam_eps=" << format_double(adam_eps) << "\n";
    os << "plateau_patience=" << plateau_patience << "\n";
    os << "plateau_tolerance=" << format_double(plateau_tolerance) << "\n";
    os << "lr_decay=" << format_double(lr_decay) << "\n";
    os << "max_epochs=" << max_epochs << "\n";
    os << "seed=" << seed << "\n";
    os << "emd_r=" << format_double(loss.emd_r) << "\n";
    os << "lambda=" << format_double(loss.lambda) << "\n";
    os << "use_weighted_emd=" << (loss.use_weighted_emd ? 1 : 0) << "\n";
    os << "channels=" << model.channels << "\n";
    os << "height=" << model.height << "\n";
    os << "width=" << model.width << "\n";
    os << "pattern_dim=" << model.pattern_dim << "\n";
    os << "use_saliency=" << (model.use_saliency ? 1 : 0) << "\n";
    os << "use_pattern_weights=" << (model.use_pattern_weights ? 1 : 0) << "\n";
    os << "use_attribute_branch=" << (model.use_attribute_branch ? 1 : 0) << "\n";
    os << "use_attention_fusion=" << (model.use_attention_fusion ? 1 : 0) << "\n";
    os << "feature_source=" << (model.feature_source == FeatureSource::kToyStem ? "toy_stem" : "precomputed")
       << "\n";
    return os.str();
}

std::vector<Sample> prepare_samples(const std::vector<AnnotatedImage>& records, const std::string& base_dir,
                                    const ModelConfig& cfg,
                                    const std::map<std::string, double>* beta_by_id) {
    namespace fs = std::filesystem;
    cfg.validate();
    std::vector<Sample> samples;
    samples.reserve(records.size());
    for (const auto& rec : records) {
        validate_annotation(rec);
        Sample s;
        s.id = rec.image_id;
        s.y = score_histogram(rec.scores);
        s.y_mean = mean_score(rec.scores);
        s.gt_attrs = rec.attributes;
        if (beta_by_id) {
            auto it = beta_by_id->find(rec.image_id);
            if (it == beta_by_id->end())
                throw ValidationError("prepare_samples: no beta weight for image '" + rec.image_id + "'");
            s.beta = it->second;
        }

        auto resolve = [&](const std::string& rel) {
            fs::path p(rel);
            return p.is_absolute() ? p.string() : (fs::path(base_dir) / p).string();
        };

        const bool need_image = cfg.feature_source == FeatureSource::kToyStem || cfg.use_saliency;
        if (need_image && rec.image_path.empty()) {
            // saliency may instead come from a precomputed grid file
            if (cfg.feature_source == FeatureSource::kToyStem)
                throw ValidationError("prepare_samples: image '" + rec.image_id + "' has no image path");
        }
        if (!rec.image_path.empty() && need_image) s.image = read_png(resolve(rec.image_path));

        if (cfg.feature_source == FeatureSource::kPrecomputed) {
            std::string feat_path = resolve("features/" + rec.image_id + ".feat");
            s.features = read_feature_file(feat_path);
            if (s.features.channels != cfg.channels || s.features.height != cfg.height ||
                s.features.width != cfg.width)
                throw ValidationError("prepare_samples: feature shape mismatch for '" + rec.image_id + "'");
        }

        if (cfg.use_saliency) {
            std::string sal_path = resolve("saliency/" + rec.image_id + ".feat");
            if (fs::exists(sal_path)) {
                FeatureMap sal = read_feature_file(sal_path);
                if (sal.channels != 1)
                    throw ValidationError("prepare_samples: saliency file must have C=1 for '" + rec.image_id + "'");
                s.saliency.height = sal.height;
                s.saliency.width = sal.width;
                s.saliency.v = std::move(sal.data);
            } else {
                if (s.image.width == 0)
                    throw ValidationError("prepare_samples: no image or saliency grid for '" + rec.image_id + "'");
                SaliencyMap map = spectral_residual(s.image);
                s.saliency = downsample_max(map, cfg.saliency_height(), cfg.saliency_width());
            }
            validate_saliency_grid(s.saliency, cfg.height, cfg.width);
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

AdamState make_adam_state(const ModelConfig& cfg, const TrainConfig& tc) {
    AdamState st;
    st.m = make_grad_set(cfg);
    st.v = make_grad_set(cfg);
    st.lr_head = tc.lr_head;
    st.lr_backbone = tc.lr_backbone;
    return st;
}

void adam_step(ModelParams& params, const GradSet& grads, AdamState& state, const TrainConfig& tc) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(tc.adam_beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(tc.adam_beta2, static_cast<double>(state.step));

    // walk the three sets in lockstep; tensor_specs order on all of them
    std::vector<std::pair<std::string, std::vector<float>*>> p_list;
    std::vector<const std::vector<double>*> g_list;
    std::vector<std::vector<double>*> m_list, v_list;
    for_each_tensor(params, [&](const std::string& name, std::vector<float>& v) { p_list.emplace_back(name, &v); });
    for_each_tensor(const_cast<GradSet&>(grads), [&](const std::string&, std::vector<double>& v) { g_list.push_back(&v); });
    for_each_tensor(state.m, [&](const std::string&, std::vector<double>& v) { m_list.push_back(&v); });
    for_each_tensor(state.v, [&](const std::string&, std::vector<double>& v) { v_list.push_back(&v); });
    if (p_list.size() != g_list.size() || p_list.size() != m_list.size())
        throw ValidationError("adam_step: parameter/gradient layout mismatch");

    for (std::size_t t = 0; t < p_list.size(); ++t) {
        const std::string& name = p_list[t].first;
        auto& p = *p_list[t].second;
        const auto& g = *g_list[t];
        auto& m = *m_list[t];
        auto& v = *v_list[t];
        if (p.size() != g.size())
            throw ValidationError("adam_step: size mismatch for tensor " + name);
        const double lr = name.rfind("stem.", 0) == 0 ? state.lr_backbone : state.lr_head;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (std::isnan(g[i]))
                throw NumericError("adam_step: NaN gradient in tensor " + name);
            double grad = g[i] + tc.weight_decay * static_cast<double>(p[i]);
            m[i] = tc.adam_beta1 * m[i] + (1.0 - tc.adam_beta1) * grad;
            v[i] = tc.adam_beta2 * v[i] + (1.0 - tc.adam_beta2) * grad * grad;
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            p[i] = static_cast<float>(p[i] - lr * mhat / (std::sqrt(vhat) + tc.adam_eps));
        }
    }
}

namespace {

ModelInput sample_input(const Sample& s, const ModelConfig& cfg) {
    ModelInput in;
    if (cfg.feature_source == FeatureSource::kToyStem) in.image = &s.image;
    else in.features = &s.features;
    if (cfg.use_saliency) in.saliency = &s.saliency;
    return in;
}

} // namespace

TrainResult train(const std::vector<Sample>& dataset, const TrainConfig& tc, EpochCallback callback,
                  void* callback_arg) {
    tc.validate();
    if (dataset.empty()) throw ValidationError("train: empty dataset");
    if (tc.loss.use_weighted_emd) {
        for (const auto& s : dataset) {
            if (!(s.beta > 0.0))
                throw ValidationError("train: weighted EMD requires positive beta for '" + s.id + "'");
        }
    }

    const ModelConfig& cfg = tc.model;
    ModelGeometry geom = make_geometry(cfg);
    ModelParams params = init_params(cfg, tc.seed);
    AdamState adam = make_adam_state(cfg, tc);
    GradSet grads = make_grad_set(cfg);

    TrainResult result;
    result.best_loss = std::numeric_limits<double>::infinity();

    Rng shuffle_rng(mix_seed(tc.seed, hash_str("epoch_shuffle")));
    double plateau_best = std::numeric_limits<double>::infinity();
    int plateau_streak = 0;

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    ForwardCache cache;
    std::uint64_t sample_ordinal = 0;

    for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);

        double epoch_wemd = 0.0, epoch_atts = 0.0, epoch_total = 0.0;
        std::size_t pos = 0;
        while (pos < order.size()) {
            const std::size_t batch = std::min<std::size_t>(tc.batch_size, order.size() - pos);
            zero_grads(grads);
            for (std::size_t b = 0; b < batch; ++b, ++sample_ordinal) {
                const Sample& s = dataset[order[pos + b]];
                Rng mask_rng(mix_seed(tc.seed, 0xd509u + sample_ordinal));
                ForwardOptions opt;
                opt.training = true;
                opt.dropout_rate = tc.dropout;
                opt.rng = &mask_rng;
                ModelOutput out = model_forward(params, cfg, geom, sample_input(s, cfg), opt, cache);

                const double beta = tc.loss.use_weighted_emd ? s.beta : 1.0;
                double l_emd = emd_loss(s.y, out.dist, tc.loss.emd_r);
                double l_atts = 0.0;

                BackwardSignal sig;
                auto demd = emd_grad(s.y, out.dist);
                const double scale = 1.0 / static_cast<double>(batch);
                for (int i = 0; i < kScoreBins; ++i) sig.d_yhat[i] = beta * scale * demd[i];
                if (cfg.use_attribute_branch) {
                    l_atts = attribute_loss(out.attrs, s.gt_attrs);
                    auto datts = attribute_loss_grad(out.attrs, s.gt_attrs);
                    for (int i = 0; i < kAttributeCount; ++i)
                        sig.d_attrs[i] = tc.loss.lambda * scale * datts[i];
                }
                model_backward(params, cfg, geom, cache, sig, grads);

                epoch_wemd += beta * l_emd;
                epoch_atts += l_atts;
                epoch_total += beta * l_emd + tc.loss.lambda * l_atts;
            }
            adam_step(params, grads, adam, tc);
            pos += batch;
        }

        const double n = static_cast<double>(dataset.size());
        EpochLog log;
        log.epoch = epoch;
        log.wemd = epoch_wemd / n;
        log.atts = epoch_atts / n;
        log.total = epoch_total / n;
        log.lr_head = adam.lr_head;
        log.lr_backbone = adam.lr_backbone;
        result.log.push_back(log);
        if (callback) callback(log, callback_arg);

        if (log.total < result.best_loss) {
            result.best_loss = log.total;
            result.best_epoch = epoch;
            result.best_params = params;
        }

        // plateau-triggered decay of both parameter groups
        if (plateau_best - log.total > tc.plateau_tolerance) {
            plateau_best = log.total;
            plateau_streak = 0;
        } else {
            ++plateau_streak;
            if (plateau_streak >= tc.plateau_patience) {
                adam.lr_head *= tc.lr_decay;
                adam.lr_backbone *= tc.lr_decay;
                plateau_streak = 0;
            }
        }
    }

    result.final_params = std::move(params);
    if (result.best_params.proj.empty()) result.best_params = result.final_params;
    return result;
}

std::string TrainResult::log_text() const {
    std::ostringstream os;
    os << "epoch\twemd\tatts\ttotal\tlr_head\tlr_backbone\n";
    for (const auto& e : log) {
        os << e.epoch << '\t' << format_double(e.wemd) << '\t' << format_double(e.atts) << '\t'
           << format_double(e.total) << '\t' << format_double(e.lr_head) << '\t'
           << format_double(e.lr_backbone) << '\n';
    }
    return os.str();
}

MetricsReport evaluate(const ModelParams& params, const ModelConfig& cfg, const LossConfig& loss,
                       const std::vector<Sample>& dataset) {
    cfg.validate();
    if (dataset.empty()) throw ValidationError("evaluate: empty dataset");
    ModelGeometry geom = make_geometry(cfg);
    ForwardCache cache;
    ForwardOptions opt; // eval mode, dropout off

    std::vector<double> pred_means, gt_means;
    double emd_sum = 0.0;
    for (const auto& s : dataset) {
        ModelOutput out = model_forward(params, cfg, geom, sample_input(s, cfg), opt, cache);
        pred_means.push_back(out.mean);
        gt_means.push_back(s.y_mean);
        emd_sum += emd_loss(s.y, out.dist, loss.emd_r);
    }

    MetricsReport report;
    report.mse = mse(pred_means, gt_means);
    report.emd = emd_sum / static_cast<double>(dataset.size());
    report.emd_r = loss.emd_r;
    report.srcc = srcc(pred_means, gt_means);
    report.lcc = lcc(pred_means, gt_means);
    report.sample_count = dataset.size();
    report.config_digest = cfg.digest();
    return report;
}

} // namespace samp
