#include "samp/losses.hpp"
#include "samp/common.hpp"

#include <cmath>

namespace samp {

void LossConfig::validate() const {
    if (emd_r < 1.0) throw ValidationError("loss config: emd_r must be >= 1");
    if (lambda < 0.0) throw ValidationError("loss config: lambda must be >= 0");
}

namespace {

std::array<double, kScoreBins> cdf_gaps(const ScoreDistribution& y, const ScoreDistribution& yhat) {
    std::array<double, kScoreBins> d{};
    double cy = 0.0, ch = 0.0;
    for (int s = 0; s < kScoreBins; ++s) {
        cy += y.probs[s];
        ch += yhat.probs[s];
        d[s] = cy - ch;
    }
    return d;
}

} // namespace

double emd_loss(const ScoreDistribution& y, const ScoreDistribution& yhat, double r) {
    if (r < 1.0) throw ValidationError("emd_loss: r must be >= 1");
    validate_distribution(y);
    validate_distribution(yhat);
    auto d = cdf_gaps(y, yhat);
    double acc = 0.0;
    for (double gap : d) acc += std::pow(std::fabs(gap), r);
    return std::pow(acc / kScoreBins, 1.0 / r);
}

std::array<double, kScoreBins> emd_grad(const ScoreDistribution& y, const ScoreDistribution& yhat) {
    validate_distribution(y);
    validate_distribution(yhat);
    auto d = cdf_gaps(y, yhat);
    double acc = 0.0;
    for (double gap : d) acc += gap * gap;
    double loss = std::sqrt(acc / kScoreBins);

    std::array<double, kScoreBins> g{};
    if (loss <= 0.0) return g; // subgradient at the minimum
    // dL/dyhat_i = -(1/(S*L)) * sum_{s>=i} d_s
    double suffix = 0.0;
    for (int i = kScoreBins - 1; i >= 0; --i) {
        suffix += d[i];
        g[i] = -suffix / (kScoreBins * loss);
    }
    return g;
}

double weighted_emd_loss(const ScoreDistribution& y, const ScoreDistribution& yhat, double beta, double r) {
    if (!(beta > 0.0)) throw ValidationError("weighted_emd_loss: beta must be positive");
    return beta * emd_loss(y, yhat, r);
}

double attribute_loss(const std::array<double, kAttributeCount>& pred,
                      const std::array<double, kAttributeCount>& gt) {
    double acc = 0.0;
    for (int i = 0; i < kAttributeCount; ++i) {
        if (!std::isfinite(pred[i]) || !std::isfinite(gt[i]))
            throw ValidationError("attribute_loss: non-finite input");
        double d = pred[i] - gt[i];
        acc += d * d;
    }
    return acc / kAttributeCount;
}

std::array<double, kAttributeCount> attribute_loss_grad(const std::array<double, kAttributeCount>& pred,
                                                        const std::array<double, kAttributeCount>& gt) {
    std::array<double, kAttributeCount> g{};
    for (int i = 0; i < kAttributeCount; ++i) g[i] = 2.0 * (pred[i] - gt[i]) / kAttributeCount;
    return g;
}

TotalLoss total_loss(const ScoreDistribution& y, const ScoreDistribution& yhat, double beta,
                     const std::array<double, kAttributeCount>* pred_attrs,
                     const std::array<double, kAttributeCount>* gt_attrs, const LossConfig& cfg) {
    cfg.validate();
    TotalLoss out;
    double b = cfg.use_weighted_emd ? beta : 1.0;
    out.weighted_emd = weighted_emd_loss(y, yhat, b, cfg.emd_r);
    if (pred_attrs && gt_attrs) {
        out.attribute_mse = attribute_loss(*pred_attrs, *gt_attrs);
    } else if (pred_attrs != nullptr || gt_attrs != nullptr) {
        throw ValidationError("total_loss: attribute prediction and target must come together");
    }
    out.total = out.weighted_emd + cfg.lambda * out.attribute_mse;
    return out;
}

} // namespace samp
