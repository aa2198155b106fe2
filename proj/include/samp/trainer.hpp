#ifndef SAMP_TRAINER_HPP
#define SAMP_TRAINER_HPP

#include "samp/losses.hpp"
#include "samp/model.hpp"
#include "samp/stats.hpp"
#include "samp/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace samp {

struct TrainConfig {
    int batch_size = 16;
    double lr_backbone = 1e-6; // toy stem group
    double lr_head = 1e-4;     // everything else
    double weight_decay = 5e-5;
    double dropout = 0.5;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int plateau_patience = 5;
    double plateau_tolerance = 1e-4;
    double lr_decay = 0.1;
    int max_epochs = 100;
    std::uint64_t seed = 0;
    LossConfig loss;
    ModelConfig model;

    void validate() const;
    static TrainConfig from_key_value_file(const std::string& path, std::map<std::string, std::string>* extra = nullptr);
    std::string to_key_value_text() const;
};

// One trainer-ready sample. Depending on the feature source either `features`
// or `image` is populated; the saliency grid is present iff the model uses it.
struct Sample {
    std::string id;
    ScoreDistribution y;
    double y_mean = 0.0;
    std::array<double, kAttributeCount> gt_attrs{};
    double beta = 1.0;
    FeatureMap features;
    ImageU8 image;
    SaliencyGrid saliency;
};

// Builds samples from annotation records: loads/derives images, features and
// saliency grids, and attaches beta weights (id -> beta) when provided.
std::vector<Sample> prepare_samples(const std::vector<AnnotatedImage>& records, const std::string& base_dir,
                                    const ModelConfig& cfg,
                                    const std::map<std::string, double>* beta_by_id);

// Adam with per-tensor first/second moments and coupled L2 weight decay.
struct AdamState {
    GradSet m;
    GradSet v;
    std::int64_t step = 0;
    double lr_head = 0.0;
    double lr_backbone = 0.0;
};

AdamState make_adam_state(const ModelConfig& cfg, const TrainConfig& tc);

// One bias-corrected update over all live tensors; gradients must already be
// batch-averaged. Throws NumericError naming the tensor on NaN gradients.
void adam_step(ModelParams& params, const GradSet& grads, AdamState& state, const TrainConfig& tc);

struct EpochLog {
    int epoch = 0;
    double wemd = 0.0;
    double atts = 0.0;
    double total = 0.0;
    double lr_head = 0.0;
    double lr_backbone = 0.0;
};

struct TrainResult {
    ModelParams final_params;
    ModelParams best_params;
    double best_loss = 0.0;
    int best_epoch = 0;
    std::vector<EpochLog> log;

    std::string log_text() const; // machine-readable TSV
};

using EpochCallback = void (*)(const EpochLog&, void*);

TrainResult train(const std::vector<Sample>& dataset, const TrainConfig& tc,
                  EpochCallback callback = nullptr, void* callback_arg = nullptr);

MetricsReport evaluate(const ModelParams& params, const ModelConfig& cfg, const LossConfig& loss,
                       const std::vector<Sample>& dataset);

} // namespace samp

#endif
