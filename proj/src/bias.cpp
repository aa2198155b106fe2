#include "samp/bias.hpp"
#include "samp/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace samp {

int bin_index(double score) {
    if (!(score >= 1.0 && score <= 5.0))
        throw ValidationError("bin_index: mean score " + format_double(score) + " outside [1,5]");
    int m = static_cast<int>(std::floor(score)) - 1;
    return std::min(m, kBinCount - 1); // 5.0 falls in the closed top bin
}

const std::array<std::int64_t, kBinCount>& BinTable::column(const std::string& category) const {
    auto it = index.find(category);
    if (it == index.end()) throw ValidationError("bin table: unknown category '" + category + "'");
    return counts[it->second];
}

BinTable build_bin_table(const std::vector<AnnotatedImage>& dataset) {
    BinTable table;
    for (const auto& img : dataset) {
        int m = bin_index(mean_score(img.scores));
        for (const auto& cat : img.categories) {
            auto [it, inserted] = table.index.try_emplace(cat, table.categories.size());
            if (inserted) {
                table.categories.push_back(cat);
                table.counts.push_back({});
            }
            table.counts[it->second][m] += 1;
        }
    }
    return table;
}

double category_entropy(const std::array<std::int64_t, kBinCount>& column) {
    std::int64_t total = 0;
    for (auto c : column) total += c;
    if (total <= 0) throw ValidationError("category_entropy: empty category");
    double h = 0.0;
    for (auto c : column) {
        if (c == 0) continue;
        double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log(p);
    }
    return h;
}

double category_ratio(const std::array<std::int64_t, kBinCount>& column) {
    std::int64_t mx = 0;
    std::int64_t mn = std::numeric_limits<std::int64_t>::max();
    for (auto c : column) {
        mx = std::max(mx, c);
        if (c > 0) mn = std::min(mn, c);
    }
    if (mx == 0) throw ValidationError("category_ratio: all-zero column");
    return static_cast<double>(mx) / static_cast<double>(mn);
}

std::array<double, kBinCount> alpha_weights(const std::array<std::int64_t, kBinCount>& column) {
    std::int64_t total = 0;
    for (auto c : column) total += c;
    if (total <= 0) throw ValidationError("alpha_weights: empty category");
    std::array<double, kBinCount> alpha{};
    for (int m = 0; m < kBinCount; ++m) {
        std::int64_t t = std::max<std::int64_t>(column[m], 1);
        alpha[m] = static_cast<double>(total) / (kBinCount * static_cast<double>(t));
    }
    return alpha;
}

double sample_beta(const AnnotatedImage& img, const BinTable& table,
                   const std::vector<std::array<double, kBinCount>>& alpha) {
    if (img.categories.empty()) return 1.0;
    int m = bin_index(mean_score(img.scores));
    double beta = std::numeric_limits<double>::infinity();
    for (const auto& cat : img.categories) {
        auto it = table.index.find(cat);
        if (it == table.index.end()) throw ValidationError("sample_beta: unknown category '" + cat + "'");
        beta = std::min(beta, alpha[it->second][m]);
    }
    return beta;
}

SplitResult filter_and_split(const std::vector<AnnotatedImage>& dataset, std::uint64_t seed,
                             double test_fraction) {
    if (!(test_fraction >= 0.0 && test_fraction < 1.0))
        throw ValidationError("filter_and_split: test fraction must be in [0,1)");

    SplitResult result;

    // stage 1: entropy on the full table decides removals
    BinTable full = build_bin_table(dataset);
    std::vector<double> full_entropy(full.categories.size());
    std::vector<bool> remove_cat(full.categories.size(), false);
    for (std::size_t c = 0; c < full.categories.size(); ++c) {
        full_entropy[c] = category_entropy(full.counts[c]);
        remove_cat[c] = full_entropy[c] < kEntropyRemovalThreshold;
    }

    std::vector<AnnotatedImage> kept;
    for (const auto& img : dataset) {
        bool removed = false;
        for (const auto& cat : img.categories) {
            if (remove_cat[full.index.at(cat)]) {
                removed = true;
                break;
            }
        }
        (removed ? result.removed : kept).push_back(img);
    }

    // stage 2: ratios, alpha and beta on the surviving images
    BinTable table = build_bin_table(kept);
    std::vector<std::array<double, kBinCount>> alpha(table.categories.size());
    std::vector<bool> biased(table.categories.size(), false);
    for (std::size_t c = 0; c < table.categories.size(); ++c) {
        alpha[c] = alpha_weights(table.counts[c]);
        biased[c] = category_ratio(table.counts[c]) > kBiasRatioThreshold;
    }

    result.report.image_ids.reserve(kept.size());
    result.report.beta.reserve(kept.size());
    result.report.unbiased.reserve(kept.size());
    std::vector<std::size_t> unbiased_pool;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const auto& img = kept[i];
        bool ok = true;
        for (const auto& cat : img.categories) ok = ok && !biased[table.index.at(cat)];
        result.report.image_ids.push_back(img.image_id);
        result.report.beta.push_back(sample_beta(img, table, alpha));
        result.report.unbiased.push_back(ok);
        if (ok) unbiased_pool.push_back(i);
    }

    // report rows: every category seen in the input, entropy from the full
    // table, ratio/alpha from the post-removal table where it survives
    for (std::size_t c = 0; c < full.categories.size(); ++c) {
        CategoryBias row;
        row.name = full.categories[c];
        row.entropy = full_entropy[c];
        row.highly_biased = remove_cat[c];
        auto it = table.index.find(row.name);
        if (it != table.index.end()) {
            row.ratio = category_ratio(table.counts[it->second]);
            row.biased = biased[it->second];
            row.alpha = alpha[it->second];
        } else {
            row.ratio = std::numeric_limits<double>::quiet_NaN();
            row.alpha.fill(std::numeric_limits<double>::quiet_NaN());
        }
        result.report.categories.push_back(std::move(row));
    }

    // seeded uniform draw of the test set from the unbiased pool
    std::size_t test_size = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(kept.size())));
    if (test_size > unbiased_pool.size())
        throw ValidationError("filter_and_split: unbiased pool (" + std::to_string(unbiased_pool.size()) +
                              ") smaller than requested test size (" + std::to_string(test_size) + ")");
    Rng rng(mix_seed(seed, hash_str("filter_and_split")));
    std::vector<std::size_t> pool = unbiased_pool;
    rng.shuffle(pool);
    pool.resize(test_size);
    std::vector<bool> in_test(kept.size(), false);
    for (std::size_t i : pool) in_test[i] = true;

    for (std::size_t i = 0; i < kept.size(); ++i) {
        (in_test[i] ? result.test : result.train).push_back(kept[i]);
    }
    return result;
}

std::string bias_report_text(const BiasReport& report) {
    std::ostringstream os;
    std::size_t n_biased = 0, n_removed = 0;
    for (const auto& c : report.categories) {
        if (c.highly_biased) ++n_removed;
        else if (c.biased) ++n_biased;
    }
    os << "content bias report\n";
    os << "  categories: " << report.categories.size() << " (" << n_removed << " highly biased, removed; "
       << n_biased << " biased)\n";
    os << "  images after removal: " << report.image_ids.size() << "\n";
    for (const auto& c : report.categories) {
        os << "  - " << c.name << ": entropy=" << format_double(c.entropy);
        if (c.highly_biased) {
            os << " [removed]";
        } else {
            os << " r_c=" << format_double(c.ratio) << (c.biased ? " [biased]" : " [unbiased]");
        }
        os << "\n";
    }
    return os.str();
}

std::string bias_report_table(const BiasReport& report) {
    std::ostringstream os;
    os << "category\tentropy\tratio\thighly_biased\tbiased\talpha0\talpha1\talpha2\talpha3\n";
    for (const auto& c : report.categories) {
        os << c.name << '\t' << format_double(c.entropy) << '\t' << format_double(c.ratio) << '\t'
           << (c.highly_biased ? 1 : 0) << '\t' << (c.biased ? 1 : 0);
        for (int m = 0; m < kBinCount; ++m) os << '\t' << format_double(c.alpha[m]);
        os << '\n';
    }
    return os.str();
}

} // namespace samp
