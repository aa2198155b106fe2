// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Criterion numbers may be given
// as arguments to run a subset.

#include "samp/annotations.hpp"
#include "samp/bias.hpp"
#include "samp/common.hpp"
#include "samp/io.hpp"
#include "samp/losses.hpp"
#include "samp/model.hpp"
#include "samp/patterns.hpp"
#include "samp/saliency.hpp"
#include "samp/stats.hpp"
#include "samp/synth.hpp"
#include "samp/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace samp;
namespace fs = std::filesystem;

namespace {

struct CriterionResult {
    bool pass = false;
    std::string detail;
};

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

double rel_err(double a, double b) {
    if (std::fabs(a) + std::fabs(b) < 2e-7) return 0.0; // below central-difference resolution
    return std::fabs(a - b) / std::max(std::fabs(a), std::fabs(b));
}

// ---------------------------------------------------------------- criterion 1
CriterionResult criterion_gradients() {
    const double t0 = now_seconds();

    // emd_loss gradient vs finite differences on raw vectors
    double worst_emd = 0.0;
    {
        Rng rng(101);
        auto raw_emd = [](const std::array<double, 5>& y, const std::array<double, 5>& yh) {
            double acc = 0, cy = 0, ch = 0;
            for (int s = 0; s < 5; ++s) {
                cy += y[s];
                ch += yh[s];
                acc += (cy - ch) * (cy - ch);
            }
            return std::sqrt(acc / 5.0);
        };
        for (int t = 0; t < 30; ++t) {
            ScoreDistribution y, yh;
            double sy = 0, sh = 0;
            for (int i = 0; i < 5; ++i) {
                y.probs[i] = rng.uniform(0.05, 1.0);
                yh.probs[i] = rng.uniform(0.05, 1.0);
                sy += y.probs[i];
                sh += yh.probs[i];
            }
            for (int i = 0; i < 5; ++i) {
                y.probs[i] /= sy;
                yh.probs[i] /= sh;
            }
            double fix = 1.0 - (y.probs[0] + y.probs[1] + y.probs[2] + y.probs[3]);
            y.probs[4] = fix;
            fix = 1.0 - (yh.probs[0] + yh.probs[1] + yh.probs[2] + yh.probs[3]);
            yh.probs[4] = fix;
            auto g = emd_grad(y, yh);
            const double eps = 1e-4;
            for (int i = 0; i < 5; ++i) {
                auto up = yh.probs, dn = yh.probs;
                up[i] += eps;
                dn[i] -= eps;
                double fd = (raw_emd(y.probs, up) - raw_emd(y.probs, dn)) / (2 * eps);
                worst_emd = std::max(worst_emd, rel_err(fd, g[i]));
            }
        }
    }

    // full model: toy stem + SAMP + AAFF + heads on C=8, H=W=7, C'=16
    ModelConfig cfg;
    cfg.channels = 8;
    cfg.height = 7;
    cfg.width = 7;
    cfg.pattern_dim = 16;
    cfg.feature_source = FeatureSource::kToyStem;
    ModelGeometry geom = make_geometry(cfg);
    ModelParams params = init_params(cfg, 2024);

    // Central differences at eps=1e-4 across a ReLU fan-out of ~1e5 stem units
    // otherwise measure kink-crossing secant artifacts instead of the
    // gradient. The check point therefore keeps every ReLU strictly active
    // and stable under all perturbations: non-negative stem weights over
    // non-negative pixels with a positive bias bound every stem
    // pre-activation below by b - eps, and lifted projection biases keep the
    // pattern units on. The inactive-ReLU code paths are covered by the unit
    // gradient tests, where the fan-out is small enough for clean differences.
    Rng rng(2025);
    for (auto& conv : params.stem) {
        const double hi = 2.0 / (conv.in_c * 9);
        for (auto& w : conv.w) w = static_cast<float>(rng.uniform(0.0, hi));
        for (auto& b : conv.b) b = 0.05f;
    }
    for (auto& proj : params.proj) {
        for (auto& w : proj.w) w *= 0.2f;
        for (auto& b : proj.b) b = 2.0f;
    }

    ImageU8 img = make_image(224, 224, 3);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_index(256));
    SaliencyGrid sal;
    sal.height = 56;
    sal.width = 56;
    sal.v.resize(56 * 56);
    for (auto& v : sal.v) v = static_cast<float>(rng.uniform(0.2, 0.8));

    ScoreDistribution y = score_histogram({2, 3, 3, 4, 5});
    std::array<double, kAttributeCount> gt_attrs = {0.3, -0.5, 0.1, 0.7, -0.2};
    const double beta = 1.25;
    const double lambda = 0.1;

    ModelInput input;
    input.image = &img;
    input.saliency = &sal;

    // total_loss through the whole graph
    auto eval = [&]() {
        ForwardCache cache;
        ModelOutput out = model_forward(params, cfg, geom, input, {}, cache);
        return beta * emd_loss(y, out.dist) + lambda * attribute_loss(out.attrs, gt_attrs);
    };

    ForwardCache cache;
    ModelOutput out = model_forward(params, cfg, geom, input, {}, cache);

    // verify the kink-free margins the construction promises
    double min_stem = 1e9, min_proj = 1e9;
    for (std::size_t l = 1; l < cache.stem_acts.size(); ++l)
        for (double v : cache.stem_acts[l].v) min_stem = std::min(min_stem, v);
    for (const auto& fp : cache.pattern_feat)
        for (double v : fp) min_proj = std::min(min_proj, v);
    if (min_stem < 0.04 || min_proj < 0.05) {
        CriterionResult bad;
        bad.pass = false;
        bad.detail = "check point construction failed: stem margin " + format_double(min_stem) +
                     ", proj margin " + format_double(min_proj);
        return bad;
    }

    BackwardSignal sig;
    auto demd = emd_grad(y, out.dist);
    for (int i = 0; i < kScoreBins; ++i) sig.d_yhat[i] = beta * demd[i];
    auto datts = attribute_loss_grad(out.attrs, gt_attrs);
    for (int i = 0; i < kAttributeCount; ++i) sig.d_attrs[i] = lambda * datts[i];
    GradSet grads = make_grad_set(cfg);
    model_backward(params, cfg, geom, cache, sig, grads);

    std::vector<std::pair<std::string, std::vector<float>*>> tensors;
    for_each_tensor(params, [&](const std::string& name, std::vector<float>& v) {
        tensors.emplace_back(name, &v);
    });
    std::vector<const std::vector<double>*> gtensors;
    for_each_tensor(grads, [&](const std::string&, std::vector<double>& v) { gtensors.push_back(&v); });

    Rng pick(77);
    const double eps = 1e-4;
    double worst_model = 0.0;
    std::string worst_name;
    int checked = 0;
    for (std::size_t t = 0; t < tensors.size(); ++t) {
        auto& vec = *tensors[t].second;
        std::set<std::size_t> coords;
        int want = 6;
        while (static_cast<int>(coords.size()) < want && coords.size() < vec.size())
            coords.insert(static_cast<std::size_t>(pick.uniform_index(vec.size())));
        for (std::size_t idx : coords) {
            float orig = vec[idx];
            vec[idx] = static_cast<float>(orig + eps);
            double up = eval();
            float hi = vec[idx];
            vec[idx] = static_cast<float>(orig - eps);
            double dn = eval();
            float lo = vec[idx];
            vec[idx] = orig;
            double fd = (up - dn) / (static_cast<double>(hi) - static_cast<double>(lo));
            double e = rel_err(fd, (*gtensors[t])[idx]);
            if (e > worst_model) {
                worst_model = e;
                worst_name = tensors[t].first;
            }
            ++checked;
        }
    }

    const double elapsed = now_seconds() - t0;
    CriterionResult r;
    r.pass = worst_emd < 1e-4 && worst_model < 1e-4 && elapsed < 60.0;
    std::ostringstream os;
    os << "emd-grad worst rel err " << worst_emd << "; model worst rel err " << worst_model << " ("
       << checked << " coords, worst at " << worst_name << "); " << elapsed << " s";
    r.detail = os.str();
    return r;
}

// ---------------------------------------------------------------- criterion 2
CriterionResult criterion_patterns() {
    CriterionResult r;
    r.pass = true;
    std::ostringstream os;
    const std::array<int, 8> expect_k = {2, 2, 2, 2, 2, 4, 4, 9};
    for (int size : {7, 56}) {
        for (int p = 1; p <= 8; ++p) {
            auto map = pattern_mask(p, size, size);
            if (map.partition_count != expect_k[p - 1]) r.pass = false;
            std::vector<int> seen(static_cast<std::size_t>(size) * size, 0);
            for (int k = 0; k < map.partition_count; ++k)
                for (int cell : partition_cells(map, k)) seen[cell] += 1;
            for (int c : seen)
                if (c != 1) r.pass = false;
        }
    }
    auto thirds = pattern_mask(8, 7, 7);
    std::array<int, 3> bands{};
    for (int i = 0; i < 7; ++i) bands[thirds.cell_partition(i, 0) / 3] += 1;
    bool bands_ok = bands == std::array<int, 3>{2, 3, 2};
    auto halves = pattern_mask(1, 56, 56);
    bool halves_ok = partition_cells(halves, 0).size() == 1568 && partition_cells(halves, 1).size() == 1568;
    auto diag = pattern_mask(3, 56, 56);
    bool diag_ok = partition_cells(diag, 0).size() == 1540 && partition_cells(diag, 1).size() == 1596;
    r.pass = r.pass && bands_ok && halves_ok && diag_ok;
    os << "disjoint+cover on 7x7/56x56; K=(2,2,2,2,2,4,4,9); bands (" << bands[0] << "," << bands[1] << ","
       << bands[2] << "); p1 " << partition_cells(halves, 0).size() << "/" << partition_cells(halves, 1).size()
       << "; p3 " << partition_cells(diag, 0).size() << "/" << partition_cells(diag, 1).size();
    r.detail = os.str();
    return r;
}

// ---------------------------------------------------------------- criterion 3
CriterionResult criterion_emd_values() {
    auto one_hot = [](int bin) {
        ScoreDistribution d;
        d.probs[bin - 1] = 1.0;
        return d;
    };
    Rng rng(301);
    double worst_same = 0.0;
    for (int t = 0; t < 20; ++t) {
        ScoreDistribution d;
        double sum = 0;
        for (auto& p : d.probs) {
            p = rng.uniform(0.01, 1.0);
            sum += p;
        }
        for (auto& p : d.probs) p /= sum;
        d.probs[4] = 1.0 - (d.probs[0] + d.probs[1] + d.probs[2] + d.probs[3]);
        worst_same = std::max(worst_same, emd_loss(d, d, 2.0));
    }
    double far = emd_loss(one_hot(1), one_hot(5), 2.0);
    double near = emd_loss(one_hot(1), one_hot(2), 2.0);
    CriterionResult r;
    r.pass = worst_same <= 1e-12 && std::fabs(far - 0.894427) <= 1e-6 && std::fabs(near - 0.447214) <= 1e-6;
    std::ostringstream os;
    os << "identical " << worst_same << "; onehot(1,5) " << far << "; onehot(1,2) " << near;
    r.detail = os.str();
    return r;
}

// ---------------------------------------------------------------- criterion 4
CriterionResult criterion_bias_oracle() {
    auto alpha = alpha_weights({5, 10, 15, 20});
    const std::array<double, 4> expect = {2.5, 1.25, 50.0 / 60.0, 0.625};
    bool alpha_ok = true;
    for (int m = 0; m < 4; ++m) alpha_ok = alpha_ok && std::fabs(alpha[m] - expect[m]) <= 1e-9;
    // the spec prints the third weight rounded to 0.83333
    alpha_ok = alpha_ok && std::fabs(alpha[2] - 0.8333333333333334) <= 1e-9;

    Rng rng(401);
    const std::vector<std::string> pool = {"a", "b", "c", "d", "e", "f", "g", "h"};
    std::vector<AnnotatedImage> data;
    for (int i = 0; i < 1000; ++i) {
        AnnotatedImage img;
        img.image_id = "img" + std::to_string(i);
        std::set<std::size_t> chosen;
        int n = 1 + static_cast<int>(rng.uniform_index(3));
        while (static_cast<int>(chosen.size()) < n) chosen.insert(rng.uniform_index(pool.size()));
        for (auto c : chosen) img.categories.push_back(pool[c]);
        for (auto& s : img.scores) s = 1 + static_cast<int>(rng.uniform_index(5));
        data.push_back(std::move(img));
    }
    auto table = build_bin_table(data);
    std::vector<std::array<double, 4>> alphas;
    for (const auto& cat : table.categories) alphas.push_back(alpha_weights(table.column(cat)));

    double worst = 0.0;
    for (const auto& img : data) {
        double beta = sample_beta(img, table, alphas);
        int m = std::min(static_cast<int>(std::floor(mean_score(img.scores))) - 1, 3);
        double expect_beta = 0.0;
        bool first = true;
        for (const auto& cat : img.categories) {
            std::int64_t total = 0;
            for (auto v : table.column(cat)) total += v;
            std::int64_t cnt = std::max<std::int64_t>(table.column(cat)[m], 1);
            double a = static_cast<double>(total) / (4.0 * static_cast<double>(cnt));
            expect_beta = first ? a : std::min(expect_beta, a);
            first = false;
        }
        worst = std::max(worst, std::fabs(beta - expect_beta));
    }
    CriterionResult r;
    r.pass = alpha_ok && worst <= 1e-12;
    std::ostringstream os;
    os << "alpha (" << alpha[0] << "," << alpha[1] << "," << alpha[2] << "," << alpha[3]
       << "); beta brute-force max |diff| " << worst << " over 1000 images";
    r.detail = os.str();
    return r;
}

// ---------------------------------------------------------------- criterion 5
CriterionResult criterion_stats_oracle() {
    // exact-rational oracle over every 3x4 table with scores in {1,2,3}
    auto oracle = [](const std::vector<std::vector<int>>& rows, std::int64_t& num, std::int64_t& den) {
        const int m = 3, n = 4;
        std::vector<std::int64_t> doubled(n, 0);
        std::int64_t ties = 0;
        for (const auto& row : rows) {
            for (int i = 0; i < n; ++i) {
                std::int64_t less = 0, equal = 0;
                for (int j = 0; j < n; ++j) {
                    if (row[j] < row[i]) ++less;
                    else if (row[j] == row[i] && j != i) ++equal;
                }
                doubled[i] += 2 * (1 + less) + equal;
            }
            for (int v = 1; v <= 3; ++v) {
                std::int64_t t = std::count(row.begin(), row.end(), v);
                ties += t * t * t - t;
            }
        }
        std::int64_t s4 = 0;
        for (auto d : doubled) s4 += d * d;
        num = 3 * s4 - 3LL * m * m * n * (n + 1) * (n + 1);
        den = static_cast<std::int64_t>(m) * m * n * (n * n - 1) - m * ties;
    };

    double worst_w = 0.0;
    std::int64_t degenerate = 0;
    std::vector<std::vector<int>> rows(3, std::vector<int>(4));
    for (std::uint32_t code = 0; code < 531441; ++code) {
        std::uint32_t c = code;
        for (int r = 0; r < 3; ++r)
            for (int i = 0; i < 4; ++i) {
                rows[r][i] = 1 + static_cast<int>(c % 3);
                c /= 3;
            }
        std::int64_t num, den;
        oracle(rows, num, den);
        RatingTable t;
        t.raters = 3;
        t.items = 4;
        for (const auto& row : rows) t.scores.insert(t.scores.end(), row.begin(), row.end());
        if (den == 0) {
            ++degenerate;
            bool threw = false;
            try {
                kendalls_w(t);
            } catch (const NumericError&) {
                threw = true;
            }
            if (!threw) worst_w = 1.0;
            continue;
        }
        double w = kendalls_w(t);
        worst_w = std::max(worst_w, std::fabs(w - static_cast<double>(num) / static_cast<double>(den)));
    }

    auto bh = benjamini_hochberg({0.01, 0.02, 0.03, 0.2}, 0.05);
    bool bh_ok = bh == std::vector<bool>{true, true, true, false};

    RatingTable conc;
    conc.raters = 5;
    conc.items = 100;
    conc.scores.resize(500);
    for (int r = 0; r < 5; ++r)
        for (int i = 0; i < 100; ++i) conc.scores[r * 100 + i] = 1 + (i % 5);
    double p = permutation_test_w(conc, 999, 20240501);

    CriterionResult r;
    r.pass = worst_w <= 1e-12 && bh_ok && p == 0.001;
    std::ostringstream os;
    os << "kendalls_w exhaustive max |diff| " << worst_w << " (" << degenerate
       << " degenerate tables raise); BH flags " << (bh_ok ? "match" : "MISMATCH")
       << "; concordant 5x100 p = " << p;
    r.detail = os.str();
    return r;
}

// ---------------------------------------------------------------- criterion 6
CriterionResult criterion_overfit() {
    const double t0 = now_seconds();
    SynthSpec spec;
    spec.image_size = 224;
    spec.counts = {8, 8, 8, 8};
    auto synth = synth_generate(spec, 606);

    ModelConfig cfg;
    cfg.channels = 8;
    cfg.height = 7;
    cfg.width = 7;
    cfg.pattern_dim = 16;
    cfg.feature_source = FeatureSource::kToyStem;

    std::vector<Sample> data;
    for (const auto& s : synth) {
        Sample smp;
        smp.id = s.annotation.image_id;
        smp.y = score_histogram(s.annotation.scores);
        smp.y_mean = mean_score(s.annotation.scores);
        smp.gt_attrs = s.annotation.attributes;
        smp.image = s.image;
        SaliencyMap map = spectral_residual(s.image);
        smp.saliency = downsample_max(map, cfg.saliency_height(), cfg.saliency_width());
        data.push_back(std::move(smp));
    }

    TrainConfig tc;
    tc.model = cfg;
    tc.batch_size = 16;
    tc.max_epochs = 300;
    tc.seed = 61;
    tc.lr_head = 2e-3;
    tc.lr_backbone = 1e-4;
    tc.dropout = 0.0; // overfit experiment
    tc.loss.lambda = 0.1;
    tc.loss.use_weighted_emd = false;

    auto result = train(data, tc);
    auto report = evaluate(result.final_params, cfg, tc.loss, data);
    const double elapsed = now_seconds() - t0;

    CriterionResult r;
    r.pass = result.log.back().total < 0.02 && report.srcc >= 0.95 && elapsed < 600.0;
    std::ostringstream os;
    os << "final train total " << result.log.back().total << " (< 0.02); train SRCC " << report.srcc
       << " (>= 0.95); " << elapsed << " s";
    r.detail = os.str();
    return r;
}

// ---------------------------------------------------------------- criterion 7
CriterionResult criterion_learning() {
    const double t0 = now_seconds();
    SynthSpec train_spec;
    train_spec.image_size = 224;
    train_spec.counts = {125, 125, 125, 125};
    SynthSpec test_spec;
    test_spec.image_size = 224;
    test_spec.counts = {25, 25, 25, 25};
    auto train_synth = synth_generate(train_spec, 701);
    auto test_synth = synth_generate(test_spec, 702);

    // featurize once through a fixed random stem; the trained model consumes
    // the precomputed maps
    ModelConfig stem_cfg;
    stem_cfg.channels = 8;
    stem_cfg.height = 7;
    stem_cfg.width = 7;
    stem_cfg.pattern_dim = 16;
    stem_cfg.feature_source = FeatureSource::kToyStem;
    ModelParams stem = init_params(stem_cfg, 7070);

    ModelConfig cfg;
    cfg.channels = 8;
    cfg.height = 7;
    cfg.width = 7;
    cfg.pattern_dim = 32;
    cfg.feature_source = FeatureSource::kPrecomputed;

    auto featurize = [&](const std::vector<SynthSample>& synth) {
        std::vector<Sample> out;
        for (const auto& s : synth) {
            Sample smp;
            smp.id = s.annotation.image_id;
            smp.y = score_histogram(s.annotation.scores);
            smp.y_mean = mean_score(s.annotation.scores);
            smp.gt_attrs = s.annotation.attributes;
            smp.features = toy_stem_forward(stem, stem_cfg, s.image);
            SaliencyMap map = spectral_residual(s.image);
            smp.saliency = downsample_max(map, cfg.saliency_height(), cfg.saliency_width());
            out.push_back(std::move(smp));
        }
        return out;
    };
    auto train_data = featurize(train_synth);
    auto test_data = featurize(test_synth);

    TrainConfig tc;
    tc.model = cfg;
    tc.batch_size = 16;
    tc.max_epochs = 60;
    tc.seed = 0; // the default seed
    tc.lr_head = 1e-3;
    tc.dropout = 0.5;
    tc.loss.lambda = 0.1;
    tc.loss.use_weighted_emd = false;

    auto result = train(train_data, tc);
    auto report = evaluate(result.best_params, cfg, tc.loss, test_data);
    const double elapsed = now_seconds() - t0;

    CriterionResult r;
    r.pass = report.srcc >= 0.6 && elapsed < 1800.0;
    std::ostringstream os;
    os << "test SRCC " << report.srcc << " (>= 0.6), MSE " << report.mse << ", EMD " << report.emd << "; "
       << elapsed << " s";
    r.detail = os.str();
    return r;
}

// ---------------------------------------------------------------- criterion 8
struct BiasFixture {
    std::vector<AnnotatedImage> train_ann;
    std::vector<Sample> train;
    std::vector<Sample> test; // neon images only, latent uniform
};

BiasFixture make_bias_fixture(const ModelConfig& cfg, std::uint64_t seed) {
    const std::vector<std::string> cats = {"apple", "brick", "cloud", "neon"};
    Rng rng(mix_seed(seed, hash_str("bias_fixture")));

    auto make_sample = [&](const std::string& cat, int cat_idx, double latent, int serial,
                           AnnotatedImage* ann_out) {
        Sample s;
        s.id = cat + "_" + std::to_string(serial);
        std::array<int, 5> scores{};
        for (auto& v : scores) {
            double raw = latent + rng.uniform(-0.8, 0.8);
            v = std::clamp(static_cast<int>(std::lround(raw)), 1, 5);
        }
        s.y = score_histogram(scores);
        s.y_mean = mean_score(scores);
        // features: category one-hot in channels 0..3, composition signal in
        // channel 4, noise elsewhere
        s.features.channels = cfg.channels;
        s.features.height = cfg.height;
        s.features.width = cfg.width;
        const int plane = cfg.height * cfg.width;
        s.features.data.resize(static_cast<std::size_t>(cfg.channels) * plane);
        for (int c = 0; c < cfg.channels; ++c) {
            for (int j = 0; j < plane; ++j) {
                double v;
                if (c < 4) v = (c == cat_idx ? 1.0 : 0.0) + rng.uniform(-0.05, 0.05);
                else if (c == 4) v = (latent - 3.0) / 2.0 + rng.uniform(-0.3, 0.3);
                else v = rng.uniform(-0.3, 0.3);
                s.features.data[static_cast<std::size_t>(c) * plane + j] = static_cast<float>(v);
            }
        }
        if (ann_out) {
            ann_out->image_id = s.id;
            ann_out->scores = scores;
            ann_out->categories = {cat};
        }
        return s;
    };

    BiasFixture fx;
    int serial = 0;
    for (int c = 0; c < 4; ++c) {
        for (int i = 0; i < 60; ++i, ++serial) {
            // neon is planted biased: its training latents sit in [4,5]
            double latent = c == 3 ? rng.uniform(4.0, 5.0) : rng.uniform(1.0, 5.0);
            AnnotatedImage ann;
            fx.train.push_back(make_sample(cats[c], c, latent, serial, &ann));
            fx.train_ann.push_back(std::move(ann));
        }
    }
    for (int i = 0; i < 40; ++i, ++serial) {
        double latent = rng.uniform(1.0, 5.0);
        fx.test.push_back(make_sample("neon", 3, latent, serial, nullptr));
    }
    return fx;
}

CriterionResult criterion_bias_mitigation() {
    ModelConfig cfg;
    cfg.channels = 8;
    cfg.height = 3;
    cfg.width = 3;
    cfg.pattern_dim = 16;
    cfg.use_saliency = false;
    cfg.use_attribute_branch = false;
    cfg.feature_source = FeatureSource::kPrecomputed;

    std::ostringstream os;
    bool all_pass = true;
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        BiasFixture fx = make_bias_fixture(cfg, seed);

        // beta weights from the bias pipeline on the training annotations
        auto split = filter_and_split(fx.train_ann, seed, 0.0);
        if (!split.removed.empty()) {
            all_pass = false;
            os << "[seed " << seed << " fixture removed images unexpectedly] ";
            continue;
        }
        std::map<std::string, double> beta;
        for (std::size_t i = 0; i < split.report.image_ids.size(); ++i)
            beta[split.report.image_ids[i]] = split.report.beta[i];
        bool neon_flagged = false;
        for (const auto& c : split.report.categories)
            if (c.name == "neon" && c.biased) neon_flagged = true;
        for (auto& s : fx.train) s.beta = beta.at(s.id);

        TrainConfig tc;
        tc.model = cfg;
        tc.batch_size = 16;
        tc.max_epochs = 60;
        tc.seed = 8000 + seed;
        tc.lr_head = 2e-3;
        tc.dropout = 0.0;
        tc.loss.lambda = 0.0;

        tc.loss.use_weighted_emd = true;
        auto weighted = train(fx.train, tc);
        tc.loss.use_weighted_emd = false;
        auto plain = train(fx.train, tc);

        // entropy of the predicted-score bin distribution over neon test images
        auto bin_entropy = [&](const ModelParams& params) {
            ModelGeometry geom = make_geometry(cfg);
            ForwardCache cache;
            std::array<std::int64_t, kBinCount> bins{};
            for (const auto& s : fx.test) {
                ModelInput in;
                in.features = &s.features;
                ModelOutput out = model_forward(params, cfg, geom, in, {}, cache);
                bins[bin_index(std::clamp(out.mean, 1.0, 5.0))] += 1;
            }
            return category_entropy(bins);
        };
        double h_weighted = bin_entropy(weighted.final_params);
        double h_plain = bin_entropy(plain.final_params);
        bool ok = h_weighted > h_plain && neon_flagged;
        all_pass = all_pass && ok;
        os << "[seed " << seed << ": weighted " << h_weighted << " vs plain " << h_plain
           << (neon_flagged ? "" : ", neon NOT flagged") << (ok ? "" : " FAIL") << "] ";
    }
    CriterionResult r;
    r.pass = all_pass;
    r.detail = os.str();
    return r;
}

// ---------------------------------------------------------------- criterion 9
CriterionResult criterion_ablation_structure() {
    ModelConfig cfg;
    cfg.channels = 8;
    cfg.height = 7;
    cfg.width = 7;
    cfg.pattern_dim = 16;

    bool ok = true;
    std::ostringstream os;

    ModelConfig no_sal = cfg;
    no_sal.use_saliency = false;
    auto on = tensor_specs(cfg);
    auto off = tensor_specs(no_sal);
    for (std::size_t i = 0; i < on.size(); ++i) {
        if (on[i].name.rfind("samp.proj.", 0) == 0 && on[i].name.back() == 'w') {
            if (on[i].shape[0] - off[i].shape[0] != 3136) ok = false;
        }
    }
    os << "saliency toggle shifts proj inputs by 3136; ";

    ModelConfig no_gate = cfg;
    no_gate.use_pattern_weights = false;
    bool gate_gone = true;
    for (const auto& t : tensor_specs(no_gate))
        if (t.name.rfind("samp.gate", 0) == 0) gate_gone = false;
    ok = ok && gate_gone;
    os << "gate tensors " << (gate_gone ? "removed" : "STILL PRESENT") << "; ";

    // attention off: e1=e2=1 in the forward pass, tensors absent
    ModelConfig no_attn = cfg;
    no_attn.use_attention_fusion = false;
    bool attn_gone = true;
    for (const auto& t : tensor_specs(no_attn))
        if (t.name.rfind("aaff.attn", 0) == 0) attn_gone = false;

    ModelGeometry geom = make_geometry(no_attn);
    ModelParams params = init_params(no_attn, 90);
    Rng rng(91);
    FeatureMap f;
    f.channels = cfg.channels;
    f.height = 7;
    f.width = 7;
    f.data.resize(static_cast<std::size_t>(cfg.channels) * 49);
    for (auto& v : f.data) v = static_cast<float>(rng.uniform(-1, 1));
    SaliencyGrid sal;
    sal.height = 56;
    sal.width = 56;
    sal.v.resize(56 * 56);
    for (auto& v : sal.v) v = static_cast<float>(rng.uniform(0.0, 1.0));
    ModelInput in;
    in.features = &f;
    in.saliency = &sal;
    ForwardCache cache;
    model_forward(params, no_attn, geom, in, {}, cache);
    bool unit_e = cache.e1 == 1.0 && cache.e2 == 1.0;
    const int half = no_attn.pattern_dim / 2;
    for (int j = 0; j < half; ++j) {
        if (cache.fused[j] != cache.f_comp[j] || cache.fused[half + j] != cache.f_atts[j]) unit_e = false;
    }
    ok = ok && attn_gone && unit_e;
    os << "attention off: tensors " << (attn_gone ? "removed" : "PRESENT") << ", e1=e2=1 "
       << (unit_e ? "verified" : "FAILED") << "; ";

    // parameter-count deltas are exactly the removed tensor sizes
    std::size_t base = param_count(cfg);
    std::size_t gate_delta = base - param_count(no_gate);
    std::size_t attn_delta = base - param_count(no_attn);
    bool counts_ok = gate_delta == static_cast<std::size_t>(8 * cfg.channels + 8) &&
                     attn_delta == static_cast<std::size_t>(2 * cfg.pattern_dim + 2);
    ok = ok && counts_ok;
    os << "param deltas gate " << gate_delta << ", attn " << attn_delta;

    CriterionResult r;
    r.pass = ok;
    r.detail = os.str();
    return r;
}

// --------------------------------------------------------------- criterion 10
CriterionResult criterion_determinism() {
    ModelConfig cfg;
    cfg.channels = 6;
    cfg.height = 3;
    cfg.width = 3;
    cfg.pattern_dim = 8;
    cfg.use_saliency = false;
    cfg.feature_source = FeatureSource::kPrecomputed;

    Rng rng(1001);
    std::vector<Sample> data;
    for (int i = 0; i < 20; ++i) {
        Sample s;
        s.id = "d" + std::to_string(i);
        std::array<int, 5> scores{};
        for (auto& v : scores) v = 1 + static_cast<int>(rng.uniform_index(5));
        s.y = score_histogram(scores);
        s.y_mean = mean_score(scores);
        for (auto& a : s.gt_attrs) a = rng.uniform(-1, 1);
        s.beta = rng.uniform(0.5, 2.0);
        s.features.channels = cfg.channels;
        s.features.height = 3;
        s.features.width = 3;
        s.features.data.resize(static_cast<std::size_t>(cfg.channels) * 9);
        for (auto& v : s.features.data) v = static_cast<float>(rng.uniform(-1, 1));
        data.push_back(std::move(s));
    }

    TrainConfig tc;
    tc.model = cfg;
    tc.batch_size = 6;
    tc.max_epochs = 8;
    tc.seed = 4242;
    tc.dropout = 0.5;
    tc.loss.use_weighted_emd = true;

    auto dir = fs::temp_directory_path() / "samp_acceptance_determinism";
    fs::create_directories(dir);
    auto run_once = [&](const std::string& tag) {
        auto result = train(data, tc);
        auto ckpt_path = (dir / (tag + ".ckpt")).string();
        write_checkpoint(ckpt_path, to_checkpoint(result.final_params, cfg));
        auto report = evaluate(result.final_params, cfg, tc.loss, data);
        std::ifstream f(ckpt_path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        return std::tuple{result.log_text(), bytes, report.machine_lines()};
    };
    auto [log1, ckpt1, rep1] = run_once("a");
    auto [log2, ckpt2, rep2] = run_once("b");
    fs::remove_all(dir);

    CriterionResult r;
    r.pass = log1 == log2 && ckpt1 == ckpt2 && rep1 == rep2;
    std::ostringstream os;
    os << "train logs " << (log1 == log2 ? "byte-identical" : "DIFFER") << "; checkpoints "
       << (ckpt1 == ckpt2 ? "byte-identical" : "DIFFER") << "; eval reports "
       << (rep1 == rep2 ? "byte-identical" : "DIFFER") << " (single-threaded execution)";
    r.detail = os.str();
    return r;
}

} // namespace

int main(int argc, char** argv) {
    struct Entry {
        int id;
        const char* name;
        CriterionResult (*fn)();
    };
    const Entry entries[] = {
        {1, "gradient suite", criterion_gradients},
        {2, "pattern-mask suite", criterion_patterns},
        {3, "emd values", criterion_emd_values},
        {4, "bias oracle", criterion_bias_oracle},
        {5, "statistics oracle", criterion_stats_oracle},
        {6, "overfit check", criterion_overfit},
        {7, "learning check", criterion_learning},
        {8, "bias-mitigation property", criterion_bias_mitigation},
        {9, "ablation structure", criterion_ablation_structure},
        {10, "determinism", criterion_determinism},
    };

    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

    bool all_pass = true;
    for (const auto& e : entries) {
        if (!wanted.empty() && !wanted.count(e.id)) continue;
        CriterionResult r;
        try {
            r = e.fn();
        } catch (const std::exception& ex) {
            r.pass = false;
            r.detail = std::string("exception: ") + ex.what();
        }
        std::printf("[%s] criterion %d (%s): %s\n", r.pass ? "PASS" : "FAIL", e.id, e.name,
                    r.detail.c_str());
        std::fflush(stdout);
        all_pass = all_pass && r.pass;
    }
    return all_pass ? 0 : 1;
}
