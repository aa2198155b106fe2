#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "samp/bias.hpp"
#include "samp/common.hpp"

#include <cmath>
#include <map>
#include <set>

using namespace samp;

namespace {

AnnotatedImage img_with(const std::string& id, std::array<int, 5> scores,
                        std::vector<std::string> cats) {
    AnnotatedImage img;
    img.image_id = id;
    img.scores = scores;
    img.categories = std::move(cats);
    return img;
}

// scores whose mean lands in the requested bin
std::array<int, 5> scores_for_bin(int bin, Rng& rng) {
    int base = bin + 1;
    std::array<int, 5> s{};
    for (auto& v : s) v = base;
    // jiggle one rater upward without leaving the bin (mean stays below base+1)
    if (base < 5 && rng.bernoulli(0.5)) s[0] = base + 1;
    return s;
}

} // namespace

TEST_CASE("bin_index boundaries") {
    CHECK(bin_index(1.0) == 0);
    CHECK(bin_index(1.999) == 0);
    CHECK(bin_index(2.0) == 1);
    CHECK(bin_index(2.999) == 1);
    CHECK(bin_index(3.5) == 2);
    CHECK(bin_index(4.2) == 3);
    CHECK(bin_index(5.0) == 3); // closed top bin
    CHECK_THROWS_AS(bin_index(0.5), ValidationError);
    CHECK_THROWS_AS(bin_index(5.4), ValidationError);
}

TEST_CASE("build_bin_table counts occurrences per category") {
    std::vector<AnnotatedImage> data;
    data.push_back(img_with("a", {4, 4, 4, 4, 5}, {"bird"})); // mean 4.2 -> bin 3
    auto table = build_bin_table(data);
    REQUIRE(table.categories == std::vector<std::string>{"bird"});
    CHECK(table.column("bird") == std::array<std::int64_t, 4>{0, 0, 0, 1});

    // an image with two categories increments both columns
    data.push_back(img_with("b", {2, 2, 2, 2, 2}, {"bird", "water"}));
    table = build_bin_table(data);
    CHECK(table.column("bird") == std::array<std::int64_t, 4>{0, 1, 0, 1});
    CHECK(table.column("water") == std::array<std::int64_t, 4>{0, 1, 0, 0});
    CHECK_THROWS_AS(table.column("sky"), ValidationError);

    // images without categories contribute to no column
    data.push_back(img_with("c", {3, 3, 3, 3, 3}, {}));
    auto t2 = build_bin_table(data);
    CHECK(t2.categories.size() == 2);
}

TEST_CASE("bin table column sums match brute-force category frequencies") {
    Rng rng(61);
    std::vector<AnnotatedImage> data;
    const std::vector<std::string> pool = {"a", "b", "c", "d", "e"};
    for (int i = 0; i < 100; ++i) {
        std::vector<std::string> cats;
        std::set<std::size_t> chosen;
        int n = 1 + static_cast<int>(rng.uniform_index(3));
        while (static_cast<int>(chosen.size()) < n) chosen.insert(rng.uniform_index(pool.size()));
        for (auto c : chosen) cats.push_back(pool[c]);
        std::array<int, 5> scores{};
        for (auto& s : scores) s = 1 + static_cast<int>(rng.uniform_index(5));
        data.push_back(img_with("img" + std::to_string(i), scores, cats));
    }
    auto table = build_bin_table(data);
    std::map<std::string, int> freq;
    for (const auto& img : data)
        for (const auto& c : img.categories) freq[c] += 1;
    for (const auto& cat : table.categories) {
        std::int64_t sum = 0;
        for (auto v : table.column(cat)) sum += v;
        CHECK(sum == freq[cat]);
    }
}

TEST_CASE("category entropy") {
    CHECK(category_entropy({7, 0, 0, 0}) == 0.0);
    CHECK(category_entropy({5, 5, 5, 5}) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(category_entropy({1, 1, 0, 0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK_THROWS_AS(category_entropy({0, 0, 0, 0}), ValidationError);
}

TEST_CASE("category ratio uses the minimum non-zero occurrence") {
    CHECK(category_ratio({10, 10, 10, 10}) == 1.0);
    CHECK(category_ratio({3, 0, 6, 9}) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(category_ratio({0, 0, 4, 0}) == 1.0);
    CHECK_THROWS_AS(category_ratio({0, 0, 0, 0}), ValidationError);
    Rng rng(67);
    for (int t = 0; t < 50; ++t) {
        std::array<std::int64_t, 4> col{};
        for (auto& c : col) c = static_cast<std::int64_t>(rng.uniform_index(20));
        std::int64_t sum = col[0] + col[1] + col[2] + col[3];
        if (sum == 0) continue;
        CHECK(category_ratio(col) >= 1.0);
    }
}

TEST_CASE("alpha weights") {
    auto uniform = alpha_weights({10, 10, 10, 10});
    for (double a : uniform) CHECK(a == doctest::Approx(1.0).epsilon(1e-12));

    auto alpha = alpha_weights({5, 10, 15, 20});
    CHECK(alpha[0] == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(alpha[1] == doctest::Approx(1.25).epsilon(1e-12));
    CHECK(alpha[2] == doctest::Approx(50.0 / 60.0).epsilon(1e-12));
    CHECK(alpha[3] == doctest::Approx(0.625).epsilon(1e-12));

    // sum_m T_m * alpha_m == sum_m T_m whenever every bin is populated
    Rng rng(71);
    for (int t = 0; t < 50; ++t) {
        std::array<std::int64_t, 4> col{};
        for (auto& c : col) c = 1 + static_cast<std::int64_t>(rng.uniform_index(30));
        auto a = alpha_weights(col);
        double lhs = 0, rhs = 0;
        for (int m = 0; m < 4; ++m) {
            lhs += static_cast<double>(col[m]) * a[m];
            rhs += static_cast<double>(col[m]);
        }
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
    }

    // empty bins are clamped to a count of one
    auto clamped = alpha_weights({4, 0, 0, 0});
    CHECK(clamped[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(clamped[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(alpha_weights({0, 0, 0, 0}), ValidationError);
}

TEST_CASE("sample beta takes the minimum over categories") {
    std::vector<AnnotatedImage> data;
    Rng rng(85);
    // category "hi": all mass in bin 3; category "lo": spread
    for (int i = 0; i < 8; ++i) data.push_back(img_with("h" + std::to_string(i), {5, 5, 5, 5, 5}, {"hi"}));
    for (int i = 0; i < 4; ++i) data.push_back(img_with("l" + std::to_string(i), scores_for_bin(i, rng), {"lo"}));
    auto table = build_bin_table(data);
    std::vector<std::array<double, 4>> alpha;
    for (const auto& cat : table.categories) alpha.push_back(alpha_weights(table.column(cat)));

    auto both = img_with("x", {5, 5, 5, 5, 5}, {"hi", "lo"});
    double b_hi = sample_beta(img_with("y", {5, 5, 5, 5, 5}, {"hi"}), table, alpha);
    double b_lo = sample_beta(img_with("z", {5, 5, 5, 5, 5}, {"lo"}), table, alpha);
    CHECK(sample_beta(both, table, alpha) == doctest::Approx(std::min(b_hi, b_lo)).epsilon(1e-12));

    // empty category list defaults to 1
    CHECK(sample_beta(img_with("e", {3, 3, 3, 3, 3}, {}), table, alpha) == 1.0);
}

TEST_CASE("beta equals brute-force minimum alpha on a randomized dataset") {
    Rng rng(73);
    const std::vector<std::string> pool = {"a", "b", "c", "d", "e", "f", "g", "h"};
    std::vector<AnnotatedImage> data;
    for (int i = 0; i < 1000; ++i) {
        std::set<std::size_t> chosen;
        int n = 1 + static_cast<int>(rng.uniform_index(3));
        while (static_cast<int>(chosen.size()) < n) chosen.insert(rng.uniform_index(pool.size()));
        std::vector<std::string> cats;
        for (auto c : chosen) cats.push_back(pool[c]);
        std::array<int, 5> scores{};
        for (auto& s : scores) s = 1 + static_cast<int>(rng.uniform_index(5));
        data.push_back(img_with("img" + std::to_string(i), scores, cats));
    }
    auto table = build_bin_table(data);
    std::vector<std::array<double, 4>> alpha;
    for (const auto& cat : table.categories) alpha.push_back(alpha_weights(table.column(cat)));

    for (const auto& img : data) {
        double beta = sample_beta(img, table, alpha);
        // brute-force recomputation from first principles
        int m = static_cast<int>(std::floor(mean_score(img.scores))) - 1;
        if (m > 3) m = 3;
        double expect = 1.0;
        bool first = true;
        for (const auto& cat : img.categories) {
            std::int64_t total = 0;
            for (auto v : table.column(cat)) total += v;
            std::int64_t t = std::max<std::int64_t>(table.column(cat)[m], 1);
            double a = static_cast<double>(total) / (4.0 * static_cast<double>(t));
            expect = first ? a : std::min(expect, a);
            first = false;
        }
        REQUIRE(beta == doctest::Approx(expect).epsilon(1e-12));
        CHECK(beta > 0.0);
    }
}

TEST_CASE("filter_and_split removes zero-entropy categories and splits the rest") {
    Rng rng(79);
    std::vector<AnnotatedImage> data;
    // "frozen": every image in bin 3 -> entropy 0 -> removed
    for (int i = 0; i < 10; ++i)
        data.push_back(img_with("f" + std::to_string(i), {5, 5, 5, 5, 5}, {"frozen"}));
    // "spread": images across all bins -> unbiased
    for (int i = 0; i < 80; ++i)
        data.push_back(img_with("s" + std::to_string(i), scores_for_bin(i % 4, rng), {"spread"}));
    // "tilted": 3:1 concentration -> r_c = 3 -> biased but kept
    for (int i = 0; i < 20; ++i) {
        int bin = i < 15 ? 3 : 2;
        data.push_back(img_with("t" + std::to_string(i), scores_for_bin(bin, rng), {"tilted"}));
    }

    auto result = filter_and_split(data, 11, 0.1);
    CHECK(result.removed.size() == 10);
    for (const auto& img : result.removed) CHECK(img.categories[0] == "frozen");

    // partition property
    CHECK(result.train.size() + result.test.size() + result.removed.size() == data.size());
    std::set<std::string> ids;
    for (const auto& img : result.train) ids.insert(img.image_id);
    for (const auto& img : result.test) ids.insert(img.image_id);
    for (const auto& img : result.removed) ids.insert(img.image_id);
    CHECK(ids.size() == data.size());

    // test size = round(0.1 * 100 kept)
    CHECK(result.test.size() == 10);

    // test set only contains unbiased images
    for (const auto& img : result.test) CHECK(img.categories[0] == "spread");

    // report rows
    bool saw_frozen = false, saw_tilted = false;
    for (const auto& c : result.report.categories) {
        if (c.name == "frozen") {
            saw_frozen = true;
            CHECK(c.highly_biased);
            CHECK(c.entropy < 0.1);
        }
        if (c.name == "tilted") {
            saw_tilted = true;
            CHECK(!c.highly_biased);
            CHECK(c.biased);
            CHECK(c.ratio == doctest::Approx(3.0).epsilon(1e-12));
        }
    }
    CHECK(saw_frozen);
    CHECK(saw_tilted);

    // beta weights strictly positive; uniform categories get beta 1
    for (double b : result.report.beta) CHECK(b > 0.0);

    // determinism
    auto again = filter_and_split(data, 11, 0.1);
    CHECK(again.report.beta == result.report.beta);
    REQUIRE(again.test.size() == result.test.size());
    for (std::size_t i = 0; i < again.test.size(); ++i)
        CHECK(again.test[i].image_id == result.test[i].image_id);

    // a different seed draws a different test set
    auto other = filter_and_split(data, 12, 0.1);
    bool any_diff = other.test.size() != result.test.size();
    for (std::size_t i = 0; !any_diff && i < other.test.size(); ++i)
        any_diff = other.test[i].image_id != result.test[i].image_id;
    CHECK(any_diff);

    // requesting more test images than the unbiased pool holds
    CHECK_THROWS_AS(filter_and_split(data, 1, 0.95), ValidationError);

    // report serializations
    auto text = bias_report_text(result.report);
    CHECK(text.find("frozen") != std::string::npos);
    auto tsv = bias_report_table(result.report);
    CHECK(tsv.find("category\tentropy") == 0);
}

TEST_CASE("beta is 1 for categories with uniform bin distributions") {
    Rng rng(83);
    std::vector<AnnotatedImage> data;
    for (int i = 0; i < 40; ++i)
        data.push_back(img_with("u" + std::to_string(i), scores_for_bin(i % 4, rng), {"uniform"}));
    auto result = filter_and_split(data, 3, 0.1);
    for (double b : result.report.beta) CHECK(b == doctest::Approx(1.0).epsilon(1e-12));
}
