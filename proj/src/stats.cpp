#include "samp/stats.hpp"
#include "samp/common.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace samp {

void RatingTable::validate() const {
    if (raters < 2 || items < 2)
        throw ValidationError("rating table: need at least 2 raters and 2 items");
    if (scores.size() != static_cast<std::size_t>(raters) * items)
        throw ValidationError("rating table: size mismatch");
    for (int s : scores) {
        if (s < 1 || s > 5) throw ValidationError("rating table: score outside [1,5]");
    }
}

RatingTable parse_rating_table(const std::string& text, const std::string& origin) {
    RatingTable table;
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::vector<int> row;
        int v;
        while (ls >> v) row.push_back(v);
        if (!ls.eof())
            throw ValidationError(origin + ":" + std::to_string(line_no) + ": non-integer entry");
        if (table.items == 0) {
            table.items = static_cast<int>(row.size());
        } else if (static_cast<int>(row.size()) != table.items) {
            throw ValidationError(origin + ":" + std::to_string(line_no) + ": ragged row (" +
                                  std::to_string(row.size()) + " vs " + std::to_string(table.items) + ")");
        }
        table.scores.insert(table.scores.end(), row.begin(), row.end());
        ++table.raters;
    }
    table.validate();
    return table;
}

RatingTable load_rating_table(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("load_rating_table: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_rating_table(ss.str(), path);
}

double expected_score(const ScoreDistribution& yhat) {
    validate_distribution(yhat);
    double e = 0.0;
    for (int i = 0; i < kScoreBins; ++i) e += (i + 1) * yhat.probs[i];
    return e;
}

std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

namespace {

double pearson(const std::vector<double>& a, const std::vector<double>& b, const char* what) {
    if (a.size() != b.size() || a.size() < 2)
        throw ValidationError(std::string(what) + ": need equal lengths >= 2");
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double da = a[i] - ma, db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa <= 0.0 || sbb <= 0.0)
        throw NumericError(std::string(what) + ": undefined correlation (zero variance input)");
    return sab / std::sqrt(saa * sbb);
}

// Rank sums and tie terms for the tie-corrected W.
double kendalls_w_impl(const std::vector<std::vector<double>>& rows, int raters, int items) {
    std::vector<double> rank_sum(items, 0.0);
    double tie_sum = 0.0;
    for (int r = 0; r < raters; ++r) {
        std::vector<double> ranks = average_ranks(rows[r]);
        for (int i = 0; i < items; ++i) rank_sum[i] += ranks[i];
        std::vector<double> sorted = rows[r];
        std::sort(sorted.begin(), sorted.end());
        std::size_t i = 0;
        while (i < sorted.size()) {
            std::size_t j = i;
            while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
            double t = static_cast<double>(j - i + 1);
            tie_sum += t * t * t - t;
            i = j + 1;
        }
    }
    const double m = raters, n = items;
    double sum_r2 = 0.0;
    for (double r : rank_sum) sum_r2 += r * r;
    double numerator = 12.0 * sum_r2 - 3.0 * m * m * n * (n + 1.0) * (n + 1.0);
    double denominator = m * m * n * (n * n - 1.0) - m * tie_sum;
    if (denominator <= 0.0)
        throw NumericError("kendalls_w: degenerate table (every rater constant)");
    double w = numerator / denominator;
    if (w < 0.0 && w > -1e-12) w = 0.0;
    return w;
}

std::vector<std::vector<double>> table_rows(const RatingTable& table) {
    std::vector<std::vector<double>> rows(table.raters, std::vector<double>(table.items));
    for (int r = 0; r < table.raters; ++r)
        for (int i = 0; i < table.items; ++i) rows[r][i] = table.at(r, i);
    return rows;
}

} // namespace

double srcc(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) throw ValidationError("srcc: need equal lengths >= 2");
    return pearson(average_ranks(a), average_ranks(b), "srcc");
}

double lcc(const std::vector<double>& a, const std::vector<double>& b) { return pearson(a, b, "lcc"); }

double mse(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty()) throw ValidationError("mse: need equal non-empty lengths");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

double kendalls_w(const RatingTable& table) {
    table.validate();
    return kendalls_w_impl(table_rows(table), table.raters, table.items);
}

double permutation_test_w(const RatingTable& table, int n_perm, std::uint64_t seed,
                          std::vector<double>* null_samples) {
    if (n_perm < 99) throw ValidationError("permutation_test_w: need at least 99 permutations");
    table.validate();
    auto rows = table_rows(table);
    const double w_obs = kendalls_w_impl(rows, table.raters, table.items);

    if (null_samples) null_samples->clear();
    int exceed = 0;
    for (int k = 0; k < n_perm; ++k) {
        // counter-based sub-seed per permutation
        Rng rng(mix_seed(seed, 0x70657200u + static_cast<std::uint64_t>(k)));
        auto shuffled = rows;
        for (auto& row : shuffled) rng.shuffle(row);
        double w = kendalls_w_impl(shuffled, table.raters, table.items);
        if (null_samples) null_samples->push_back(w);
        if (w >= w_obs) ++exceed;
    }
    return static_cast<double>(1 + exceed) / static_cast<double>(n_perm + 1);
}

PairwiseSpearman pairwise_spearman_p(const RatingTable& table, std::uint64_t seed, int n_perm) {
    table.validate();
    if (n_perm < 99) throw ValidationError("pairwise_spearman_p: need at least 99 permutations");
    auto rows = table_rows(table);
    PairwiseSpearman out;
    std::uint64_t pair_idx = 0;
    for (int a = 0; a < table.raters; ++a) {
        for (int b = a + 1; b < table.raters; ++b, ++pair_idx) {
            double rho_obs = srcc(rows[a], rows[b]);
            int exceed = 0;
            for (int k = 0; k < n_perm; ++k) {
                Rng rng(mix_seed(seed, (pair_idx << 20) + static_cast<std::uint64_t>(k)));
                std::vector<double> perm = rows[b];
                rng.shuffle(perm);
                if (srcc(rows[a], perm) >= rho_obs) ++exceed;
            }
            double p = static_cast<double>(1 + exceed) / static_cast<double>(n_perm + 1);
            out.rhos.push_back(rho_obs);
            out.p_values.push_back(p);
        }
    }
    for (double r : out.rhos) out.mean_rho += r;
    for (double p : out.p_values) out.mean_p += p;
    out.mean_rho /= static_cast<double>(out.rhos.size());
    out.mean_p /= static_cast<double>(out.p_values.size());
    return out;
}

std::vector<bool> benjamini_hochberg(const std::vector<double>& p_values, double q) {
    if (!(q > 0.0 && q < 1.0)) throw ValidationError("benjamini_hochberg: Q must be in (0,1)");
    for (double p : p_values) {
        if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("benjamini_hochberg: p-value outside [0,1]");
    }
    const std::size_t n = p_values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
    std::size_t cutoff = 0; // number of rejected hypotheses
    for (std::size_t k = n; k >= 1; --k) {
        if (p_values[order[k - 1]] <= static_cast<double>(k) * q / static_cast<double>(n)) {
            cutoff = k;
            break;
        }
    }
    std::vector<bool> reject(n, false);
    for (std::size_t k = 0; k < cutoff; ++k) reject[order[k]] = true;
    return reject;
}

BatchConsistency batch_consistency(const RatingTable& table, int batch_size, double q, std::uint64_t seed,
                                   int n_perm) {
    table.validate();
    if (batch_size < 2) throw ValidationError("batch_consistency: batch size must be >= 2");
    if (table.items < batch_size)
        throw ValidationError("batch_consistency: table has fewer items than one batch");

    std::vector<int> order(table.items);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(seed, hash_str("batch_split")));
    rng.shuffle(order);

    BatchConsistency out;
    const std::size_t n_batches = static_cast<std::size_t>(table.items / batch_size);
    for (std::size_t b = 0; b < n_batches; ++b) {
        RatingTable batch;
        batch.raters = table.raters;
        batch.items = batch_size;
        batch.scores.resize(static_cast<std::size_t>(batch.raters) * batch_size);
        for (int r = 0; r < table.raters; ++r) {
            for (int i = 0; i < batch_size; ++i) {
                batch.scores[static_cast<std::size_t>(r) * batch_size + i] =
                    table.at(r, order[b * batch_size + i]);
            }
        }
        out.batch_w.push_back(kendalls_w(batch));
        out.batch_p.push_back(permutation_test_w(batch, n_perm, mix_seed(seed, 0xba7c4000u + b)));
    }
    auto reject = benjamini_hochberg(out.batch_p, q);
    out.batches = n_batches;
    for (bool r : reject) {
        if (r) ++out.significant;
    }
    out.fraction = n_batches == 0 ? 0.0 : static_cast<double>(out.significant) / static_cast<double>(n_batches);
    return out;
}

std::string MetricsReport::machine_lines() const {
    std::ostringstream os;
    os << "mse=" << format_double(mse) << "\n";
    os << "emd=" << format_double(emd) << "\n";
    os << "emd_r=" << format_double(emd_r) << "\n";
    os << "srcc=" << format_double(srcc) << "\n";
    os << "lcc=" << format_double(lcc) << "\n";
    os << "n=" << sample_count << "\n";
    os << "config_digest=" << config_digest << "\n";
    return os.str();
}

std::string MetricsReport::human_text() const {
    std::ostringstream os;
    os << "evaluation over " << sample_count << " images (config " << config_digest << ")\n";
    os << "  MSE  " << format_double(mse) << "\n";
    os << "  EMD  " << format_double(emd) << " (r=" << format_double(emd_r) << ")\n";
    os << "  SRCC " << format_double(srcc) << "\n";
    os << "  LCC  " << format_double(lcc) << "\n";
    return os.str();
}

} // namespace samp
