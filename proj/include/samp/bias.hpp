#ifndef SAMP_BIAS_HPP
#define SAMP_BIAS_HPP

#include "samp/types.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace samp {

inline constexpr int kBinCount = 4; // score bins [1,2) [2,3) [3,4) [4,5]
inline constexpr double kEntropyRemovalThreshold = 0.1;
inline constexpr double kBiasRatioThreshold = 1.5;

// Bin index for a mean score; the closed top bin maps 5.0 to 3.
int bin_index(double mean_score);

// Per-category occurrence counts T[m][c], categories in first-seen order.
struct BinTable {
    std::vector<std::string> categories;
    std::vector<std::array<std::int64_t, kBinCount>> counts; // per category
    std::map<std::string, std::size_t> index;

    const std::array<std::int64_t, kBinCount>& column(const std::string& category) const;
};

BinTable build_bin_table(const std::vector<AnnotatedImage>& dataset);

// Natural-log entropy of the normalized column (0 ln 0 := 0).
double category_entropy(const std::array<std::int64_t, kBinCount>& column);

// max / min-nonzero occurrence ratio r_c.
double category_ratio(const std::array<std::int64_t, kBinCount>& column);

// alpha_{m,c} = (sum_m T_{m,c}) / (M * T_{m,c}); empty bins are clamped to a
// count of 1 before dividing.
std::array<double, kBinCount> alpha_weights(const std::array<std::int64_t, kBinCount>& column);

struct CategoryBias {
    std::string name;
    double entropy = 0.0;       // on the input dataset (pre-removal)
    double ratio = 0.0;         // on the post-removal dataset; NaN if absent there
    bool highly_biased = false; // entropy < 0.1 -> images removed
    bool biased = false;        // ratio > 1.5
    std::array<double, kBinCount> alpha{}; // from the post-removal table
};

struct BiasReport {
    std::vector<CategoryBias> categories;
    std::vector<std::string> image_ids;   // post-removal images, dataset order
    std::vector<double> beta;             // per image
    std::vector<bool> unbiased;           // per image
};

// beta = min over the image's categories of alpha_{bin(image), c}; images
// without categories get beta = 1.
double sample_beta(const AnnotatedImage& img, const BinTable& table,
                   const std::vector<std::array<double, kBinCount>>& alpha);

struct SplitResult {
    std::vector<AnnotatedImage> train;
    std::vector<AnnotatedImage> test;
    std::vector<AnnotatedImage> removed;
    BiasReport report;
};

// Content-bias pipeline: entropy filter on the input table, rebuild the table
// on the survivors, flag biased categories by r_c, draw the seeded test set
// from the unbiased images, keep everything else for training.
SplitResult filter_and_split(const std::vector<AnnotatedImage>& dataset, std::uint64_t seed,
                             double test_fraction = 0.1);

std::string bias_report_text(const BiasReport& report);
std::string bias_report_table(const BiasReport& report); // TSV

} // namespace samp

#endif
