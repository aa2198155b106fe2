// End-to-end checks of the command-line tool; the binary path comes from the
// SAMP_CLI environment variable set by CTest.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "samp/annotations.hpp"
#include "samp/common.hpp"
#include "samp/image.hpp"
#include "samp/io.hpp"
#include "samp/model.hpp"
#include "samp/synth.hpp"
#include "samp/types.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace samp;
namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* p = std::getenv("SAMP_CLI");
    REQUIRE(p != nullptr);
    return p;
}

int run(const std::string& args) {
    std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

fs::path work_dir() {
    static int counter = 0;
    fs::path dir =
        fs::temp_directory_path() / ("samp_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    f << text;
}

} // namespace

TEST_CASE("synth is idempotent given the seed") {
    auto dir = work_dir();
    write_file(dir / "spec.cfg", "size=64\nthirds_aligned=3\ncentered=2\n");
    std::string base = "synth --spec " + (dir / "spec.cfg").string() + " --seed 9 --out ";
    REQUIRE(run(base + (dir / "a").string()) == 0);
    REQUIRE(run(base + (dir / "b").string()) == 0);
    CHECK(slurp(dir / "a" / "annotations.tsv") == slurp(dir / "b" / "annotations.tsv"));
    CHECK(slurp(dir / "a" / "images" / "thirds_aligned_0000.png") ==
          slurp(dir / "b" / "images" / "thirds_aligned_0000.png"));

    auto recs = load_annotations((dir / "a" / "annotations.tsv").string());
    CHECK(recs.size() == 5);
    fs::remove_all(dir);
}

TEST_CASE("synth validates the spec before writing") {
    auto dir = work_dir();
    write_file(dir / "bad.cfg", "size=64\n"); // all counts zero
    CHECK(run("synth --spec " + (dir / "bad.cfg").string() + " --seed 1 --out " + (dir / "out").string()) ==
          1);
    CHECK(!fs::exists(dir / "out"));
    CHECK(run("synth --spec " + (dir / "missing.cfg").string() + " --seed 1 --out " +
              (dir / "out2").string()) == 1);
    fs::remove_all(dir);
}

TEST_CASE("prepare reports a planted biased category") {
    auto dir = work_dir();
    // fixture: "plain" spread evenly over bins, "neon" concentrated high
    std::ostringstream ann;
    Rng rng(5);
    for (int i = 0; i < 40; ++i) {
        int bin = i % 4;
        int v = bin + 1;
        ann << "p" << i << "\t" << v << "," << v << "," << v << "," << v << "," << v
            << "\t0,0,0,0,0\tplain\n";
    }
    for (int i = 0; i < 20; ++i) {
        bool high = i < 15;
        int v = high ? 5 : 4;
        // mean 5.0 -> bin 3; mean 4.0 with one 3 -> (4,4,4,4,3)=3.8 -> bin 2
        if (high) ann << "n" << i << "\t5,5,5,5,5\t0,0,0,0,0\tneon\n";
        else ann << "n" << i << "\t" << v << "," << v << "," << v << "," << v << ",3\t0,0,0,0,0\tneon\n";
    }
    write_file(dir / "ann.tsv", ann.str());
    REQUIRE(run("prepare --annotations " + (dir / "ann.tsv").string() + " --out " + (dir / "prep").string() +
                " --seed 3 --test-fraction 0.1") == 0);

    auto table = slurp(dir / "prep" / "categories.tsv");
    bool neon_biased = false;
    std::istringstream is(table);
    std::string line;
    while (std::getline(is, line)) {
        if (line.rfind("neon\t", 0) == 0) {
            std::istringstream ls(line);
            std::string name, entropy, ratio, hb, biased;
            std::getline(ls, name, '\t');
            std::getline(ls, entropy, '\t');
            std::getline(ls, ratio, '\t');
            std::getline(ls, hb, '\t');
            std::getline(ls, biased, '\t');
            CHECK(std::stod(ratio) > 1.5);
            CHECK(biased == "1");
            neon_biased = true;
        }
    }
    CHECK(neon_biased);

    // idempotence of the whole output directory
    REQUIRE(run("prepare --annotations " + (dir / "ann.tsv").string() + " --out " + (dir / "prep2").string() +
                " --seed 3 --test-fraction 0.1") == 0);
    for (const char* name : {"report.txt", "categories.tsv", "beta.tsv", "train.tsv", "test.tsv"})
        CHECK(slurp(dir / "prep" / name) == slurp(dir / "prep2" / name));

    // test set holds only unbiased (plain) images
    auto test_recs = parse_annotations(slurp(dir / "prep" / "test.tsv"), "test.tsv");
    CHECK(!test_recs.empty());
    for (const auto& r : test_recs) CHECK(r.categories == std::vector<std::string>{"plain"});
    fs::remove_all(dir);
}

TEST_CASE("train, eval and visualize round-trip through files") {
    auto dir = work_dir();
    write_file(dir / "spec.cfg", "size=224\nthirds_aligned=3\ncentered=3\noff_balance=3\nsymmetric_pair=3\n");
    REQUIRE(run("synth --spec " + (dir / "spec.cfg").string() + " --seed 4 --out " + (dir / "data").string()) ==
            0);

    write_file(dir / "train.cfg",
               "batch_size=6\nlr_head=0.001\nmax_epochs=2\nseed=11\ndropout=0.5\nlambda=0.1\n"
               "use_weighted_emd=0\nchannels=8\nheight=7\nwidth=7\npattern_dim=16\nfeature_source=toy_stem\n");
    REQUIRE(run("train --config " + (dir / "train.cfg").string() + " --data " +
                (dir / "data" / "annotations.tsv").string() + " --out " + (dir / "run").string()) == 0);
    CHECK(fs::exists(dir / "run" / "checkpoint_best.ckpt"));
    CHECK(fs::exists(dir / "run" / "train_log.tsv"));
    CHECK(!fs::exists(dir / "run" / "train_log.tsv.tmp"));

    // eval twice: byte-identical machine reports
    std::string eval_base = "eval --checkpoint " + (dir / "run" / "checkpoint_best.ckpt").string() +
                            " --data " + (dir / "data" / "annotations.tsv").string() + " --report ";
    REQUIRE(run(eval_base + (dir / "r1.txt").string()) == 0);
    REQUIRE(run(eval_base + (dir / "r2.txt").string()) == 0);
    CHECK(slurp(dir / "r1.txt") == slurp(dir / "r2.txt"));
    CHECK(slurp(dir / "r1.txt").find("config_digest=") != std::string::npos);

    // visualize writes the three artifacts
    REQUIRE(run("visualize --checkpoint " + (dir / "run" / "checkpoint_best.ckpt").string() + " --image " +
                (dir / "data" / "images" / "centered_0000.png").string() + " --out " +
                (dir / "vis").string()) == 0);
    CHECK(fs::exists(dir / "vis" / "saliency.png"));
    CHECK(fs::exists(dir / "vis" / "overlay.png"));
    auto pred = slurp(dir / "vis" / "prediction.tsv");
    CHECK(pred.find("mean_score=") != std::string::npos);
    CHECK(pred.find("dominant_pattern=") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("visualize with zero gate weights reports uniform pattern weights") {
    auto dir = work_dir();
    ModelConfig cfg;
    cfg.channels = 8;
    cfg.height = 7;
    cfg.width = 7;
    cfg.pattern_dim = 16;
    cfg.feature_source = FeatureSource::kToyStem;
    ModelParams params = init_params(cfg, 3);
    std::fill(params.gate.w.begin(), params.gate.w.end(), 0.0f);
    std::fill(params.gate.b.begin(), params.gate.b.end(), 0.0f);
    write_checkpoint((dir / "zero_gate.ckpt").string(), to_checkpoint(params, cfg));

    SynthSpec spec;
    spec.image_size = 224;
    spec.counts = {1, 0, 0, 0};
    auto samples = synth_generate(spec, 8);
    write_png((dir / "img.png").string(), samples[0].image);

    REQUIRE(run("visualize --checkpoint " + (dir / "zero_gate.ckpt").string() + " --image " +
                (dir / "img.png").string() + " --out " + (dir / "vis").string()) == 0);
    auto pred = slurp(dir / "vis" / "prediction.tsv");
    for (int p = 1; p <= 8; ++p)
        CHECK(pred.find("w" + std::to_string(p) + "=0.125\n") != std::string::npos);
    // dominant-pattern ties break to the lowest id
    CHECK(pred.find("dominant_pattern=1\n") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("visualize renders a bare pattern overlay without a checkpoint") {
    auto dir = work_dir();
    ImageU8 img = make_image(112, 112, 3, 30);
    write_png((dir / "img.png").string(), img);
    REQUIRE(run("visualize --pattern 8 --image " + (dir / "img.png").string() + " --out " +
                (dir / "vis").string()) == 0);
    auto overlay = read_png((dir / "vis" / "overlay.png").string());
    CHECK(overlay.width == 112);
    // thirds gridlines leave green pixels behind
    bool any_green = false;
    for (int y = 0; y < overlay.height && !any_green; ++y)
        for (int x = 0; x < overlay.width && !any_green; ++x)
            any_green = overlay.at(y, x, 1) == 220;
    CHECK(any_green);
    CHECK(run("visualize --pattern 9 --image " + (dir / "img.png").string() + " --out " +
              (dir / "vis2").string()) == 1);
    fs::remove_all(dir);
}

TEST_CASE("saliency subcommand writes maps and float grids") {
    auto dir = work_dir();
    SynthSpec spec;
    spec.image_size = 64;
    spec.counts = {0, 2, 0, 0};
    auto samples = synth_generate(spec, 12);
    fs::create_directories(dir / "imgs");
    for (const auto& s : samples)
        write_png((dir / "imgs" / (s.annotation.image_id + ".png")).string(), s.image);

    REQUIRE(run("saliency --in " + (dir / "imgs").string() + " --out " + (dir / "sal").string() +
                " --write-float") == 0);
    CHECK(fs::exists(dir / "sal" / "centered_0000_sal.png"));
    auto feat = read_feature_file((dir / "sal" / "centered_0000.feat").string());
    CHECK(feat.channels == 1);
    CHECK(feat.height == 64);
    CHECK(feat.width == 64);

    CHECK(run("saliency --in " + (dir / "nowhere").string() + " --out " + (dir / "sal2").string()) == 1);
    CHECK(!fs::exists(dir / "sal2"));
    fs::remove_all(dir);
}

TEST_CASE("raters subcommand emits consistency statistics") {
    auto dir = work_dir();
    std::ostringstream table;
    for (int r = 0; r < 5; ++r) {
        for (int i = 0; i < 20; ++i) table << (i % 5) + 1 << (i + 1 < 20 ? " " : "");
        table << "\n";
    }
    write_file(dir / "table.tsv", table.str());
    REQUIRE(run("raters --table " + (dir / "table.tsv").string() + " --out " + (dir / "out").string() +
                " --n-perm 199 --batch-size 10 --seed 6") == 0);
    auto text = slurp(dir / "out" / "consistency.tsv");
    CHECK(text.find("kendalls_w=1\n") != std::string::npos);
    CHECK(text.find("w_p_value=0.005") != std::string::npos);
    CHECK(text.find("significant_fraction=1\n") != std::string::npos);
    CHECK(slurp(dir / "out" / "w_null.csv").rfind("w_null\n", 0) == 0);

    // malformed table: validation exit code, no outputs
    write_file(dir / "bad.tsv", "1 2 3\n1 2\n");
    CHECK(run("raters --table " + (dir / "bad.tsv").string() + " --out " + (dir / "out2").string()) == 1);
    CHECK(!fs::exists(dir / "out2"));
    fs::remove_all(dir);
}

TEST_CASE("train refuses weighted emd without a beta table") {
    auto dir = work_dir();
    write_file(dir / "spec.cfg", "size=224\ncentered=2\n");
    REQUIRE(run("synth --spec " + (dir / "spec.cfg").string() + " --seed 2 --out " + (dir / "d").string()) ==
            0);
    write_file(dir / "bad.cfg",
               "batch_size=2\nmax_epochs=1\nuse_weighted_emd=1\nchannels=8\nheight=7\nwidth=7\n"
               "pattern_dim=16\nfeature_source=toy_stem\n");
    CHECK(run("train --config " + (dir / "bad.cfg").string() + " --data " +
              (dir / "d" / "annotations.tsv").string() + " --out " + (dir / "run").string()) == 1);
    CHECK(!fs::exists(dir / "run"));
    fs::remove_all(dir);
}
