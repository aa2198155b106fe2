#ifndef SAMP_LOSSES_HPP
#define SAMP_LOSSES_HPP

#include "samp/types.hpp"

#include <array>

namespace samp {

struct LossConfig {
    double emd_r = 2.0;        // EMD exponent
    double lambda = 0.1;       // attribute trade-off
    bool use_weighted_emd = true;

    void validate() const;
};

// Normalized EMD between the cumulative distributions:
//   ((1/S) * sum_s |CDF_y(s) - CDF_yhat(s)|^r)^(1/r)
double emd_loss(const ScoreDistribution& y, const ScoreDistribution& yhat, double r = 2.0);

// Analytic gradient w.r.t. yhat for r=2; the zero vector at the (non-smooth)
// minimum L=0.
std::array<double, kScoreBins> emd_grad(const ScoreDistribution& y, const ScoreDistribution& yhat);

double weighted_emd_loss(const ScoreDistribution& y, const ScoreDistribution& yhat, double beta,
                         double r = 2.0);

double attribute_loss(const std::array<double, kAttributeCount>& pred,
                      const std::array<double, kAttributeCount>& gt);
std::array<double, kAttributeCount> attribute_loss_grad(const std::array<double, kAttributeCount>& pred,
                                                        const std::array<double, kAttributeCount>& gt);

struct TotalLoss {
    double weighted_emd = 0.0;
    double attribute_mse = 0.0; // 0 when the attribute branch is disabled
    double total = 0.0;
};

TotalLoss total_loss(const ScoreDistribution& y, const ScoreDistribution& yhat, double beta,
                     const std::array<double, kAttributeCount>* pred_attrs,
                     const std::array<double, kAttributeCount>* gt_attrs, const LossConfig& cfg);

} // namespace samp

#endif
