#ifndef SAMP_STATS_HPP
#define SAMP_STATS_HPP

#include "samp/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace samp {

// m raters x n items, integer scores in [1,5].
struct RatingTable {
    int raters = 0;
    int items = 0;
    std::vector<int> scores; // row-major, raters x items

    int at(int rater, int item) const { return scores[static_cast<std::size_t>(rater) * items + item]; }
    void validate() const;
};

RatingTable parse_rating_table(const std::string& text, const std::string& origin);
RatingTable load_rating_table(const std::string& path);

struct MetricsReport {
    double mse = 0.0;
    double emd = 0.0;
    double emd_r = 2.0;
    double srcc = 0.0;
    double lcc = 0.0;
    std::size_t sample_count = 0;
    std::string config_digest;

    std::string machine_lines() const;
    std::string human_text() const;
};

double expected_score(const ScoreDistribution& yhat);

// Average ranks (ties share the mean of their positions), 1-based.
std::vector<double> average_ranks(const std::vector<double>& values);

double srcc(const std::vector<double>& a, const std::vector<double>& b);
double lcc(const std::vector<double>& a, const std::vector<double>& b);
double mse(const std::vector<double>& a, const std::vector<double>& b);

// Tie-corrected Kendall's W:
//   W = (12 sum_i R_i^2 - 3 m^2 n (n+1)^2) / (m^2 n (n^2-1) - m sum_j T_j)
// with item rank sums R_i over per-rater average ranks and tie terms
// T_j = sum over rater j's tie groups of (t^3 - t).
double kendalls_w(const RatingTable& table);

// Each permutation shuffles every rater's row independently;
// p = (1 + #{W_perm >= W_obs}) / (n_perm + 1). Optionally returns the
// sampled null W values.
double permutation_test_w(const RatingTable& table, int n_perm, std::uint64_t seed,
                          std::vector<double>* null_samples = nullptr);

struct PairwiseSpearman {
    double mean_rho = 0.0;
    double mean_p = 0.0;
    std::vector<double> rhos;
    std::vector<double> p_values;
};

// Spearman rho per rater pair with a one-sided permutation p-value
// (999 draws, seeded); the batch p is the average over pairs.
PairwiseSpearman pairwise_spearman_p(const RatingTable& table, std::uint64_t seed, int n_perm = 999);

// Step-up BH at FDR level Q; flags returned in the input order.
std::vector<bool> benjamini_hochberg(const std::vector<double>& p_values, double q);

struct BatchConsistency {
    std::size_t batches = 0;
    std::size_t significant = 0;
    double fraction = 0.0;
    std::vector<double> batch_w;
    std::vector<double> batch_p;
};

// Seeded random batching of the items; per-batch Kendall-W permutation
// p-values, BH at level Q.
BatchConsistency batch_consistency(const RatingTable& table, int batch_size, double q, std::uint64_t seed,
                                   int n_perm = 999);

} // namespace samp

#endif
