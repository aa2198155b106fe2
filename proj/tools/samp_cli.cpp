// Command-line entry points for the composition-assessment pipeline.
// Exit codes: 0 success, 1 validation error, 2 numeric failure.

#include <CLI11.hpp>

#include "samp/annotations.hpp"
#include "samp/bias.hpp"
#include "samp/common.hpp"
#include "samp/image.hpp"
#include "samp/io.hpp"
#include "samp/losses.hpp"
#include "samp/model.hpp"
#include "samp/patterns.hpp"
#include "samp/saliency.hpp"
#include "samp/stats.hpp"
#include "samp/synth.hpp"
#include "samp/trainer.hpp"
#include "samp/types.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace samp;

namespace {

void atomic_write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    atomic_write_text(path, std::string(bytes.begin(), bytes.end()));
}

void atomic_write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::string tmp = path + ".tmp";
    write_checkpoint(tmp, ckpt);
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw ValidationError("rename failed for " + path + ": " + ec.message());
}

void atomic_write_feature(const std::string& path, const FeatureMap& f) {
    std::string tmp = path + ".tmp";
    write_feature_file(tmp, f);
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw ValidationError("rename failed for " + path + ": " + ec.message());
}

int run_synth(const std::string& spec_path, std::uint64_t seed, const std::string& out_dir) {
    SynthSpec spec = SynthSpec::from_key_value_file(spec_path);
    auto samples = synth_generate(spec, seed);

    fs::create_directories(fs::path(out_dir) / "images");
    std::string annotations;
    for (const auto& s : samples) {
        atomic_write_bytes((fs::path(out_dir) / s.annotation.image_path).string(), encode_png(s.image));
        annotations += format_annotation_line(s.annotation);
        annotations += '\n';
    }
    atomic_write_text((fs::path(out_dir) / "annotations.tsv").string(), annotations);
    std::cout << "wrote " << samples.size() << " images to " << out_dir << "\n";
    return 0;
}

int run_saliency(const std::string& in_path, const std::string& out_dir, bool write_float) {
    std::vector<fs::path> inputs;
    if (fs::is_directory(in_path)) {
        for (const auto& entry : fs::directory_iterator(in_path)) {
            if (entry.path().extension() == ".png") inputs.push_back(entry.path());
        }
        std::sort(inputs.begin(), inputs.end());
        if (inputs.empty()) throw ValidationError("saliency: no .png files in " + in_path);
    } else if (fs::exists(in_path)) {
        inputs.push_back(in_path);
    } else {
        throw ValidationError("saliency: input not found: " + in_path);
    }

    fs::create_directories(out_dir);
    for (const auto& p : inputs) {
        ImageU8 img = read_png(p.string());
        SaliencyMap map = spectral_residual(img);
        std::string stem = p.stem().string();
        atomic_write_bytes((fs::path(out_dir) / (stem + "_sal.png")).string(),
                           encode_png(saliency_to_png_image(map)));
        if (write_float) {
            FeatureMap f;
            f.channels = 1;
            f.height = map.height;
            f.width = map.width;
            f.data = map.v;
            atomic_write_feature((fs::path(out_dir) / (stem + ".feat")).string(), f);
        }
    }
    std::cout << "wrote saliency for " << inputs.size() << " image(s) to " << out_dir << "\n";
    return 0;
}

int run_prepare(const std::string& annotations_path, const std::string& out_dir, double test_fraction,
                std::uint64_t seed) {
    auto records = load_annotations(annotations_path);
    // the split files land in out_dir, so relative image paths must be pinned
    // to the source dataset directory first
    fs::path base = fs::absolute(fs::path(annotations_path)).parent_path();
    for (auto& rec : records) {
        if (!rec.image_path.empty() && fs::path(rec.image_path).is_relative())
            rec.image_path = fs::weakly_canonical(base / rec.image_path).string();
    }
    auto result = filter_and_split(records, seed, test_fraction);

    fs::create_directories(out_dir);
    atomic_write_text((fs::path(out_dir) / "report.txt").string(), bias_report_text(result.report));
    atomic_write_text((fs::path(out_dir) / "categories.tsv").string(), bias_report_table(result.report));

    std::string beta_text = "image_id\tbeta\n";
    for (std::size_t i = 0; i < result.report.image_ids.size(); ++i) {
        beta_text += result.report.image_ids[i];
        beta_text += '\t';
        beta_text += format_double(result.report.beta[i]);
        beta_text += '\n';
    }
    atomic_write_text((fs::path(out_dir) / "beta.tsv").string(), beta_text);

    auto dump = [&](const char* name, const std::vector<AnnotatedImage>& list) {
        std::string text;
        for (const auto& rec : list) {
            text += format_annotation_line(rec);
            text += '\n';
        }
        atomic_write_text((fs::path(out_dir) / name).string(), text);
    };
    dump("train.tsv", result.train);
    dump("test.tsv", result.test);
    std::string removed;
    for (const auto& rec : result.removed) {
        removed += rec.image_id;
        removed += '\n';
    }
    atomic_write_text((fs::path(out_dir) / "removed.txt").string(), removed);

    std::cout << bias_report_text(result.report);
    std::cout << "train " << result.train.size() << " / test " << result.test.size() << " / removed "
              << result.removed.size() << "\n";
    return 0;
}

std::map<std::string, double> load_beta_table(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("beta table: cannot open " + path);
    std::map<std::string, double> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line == "image_id\tbeta") continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw ValidationError(path + ":" + std::to_string(line_no) + ": expected image_id TAB beta");
        out[line.substr(0, tab)] = std::stod(line.substr(tab + 1));
    }
    return out;
}

int run_train(const std::string& config_path, const std::string& data_path, const std::string& out_dir) {
    std::map<std::string, std::string> extra;
    TrainConfig tc = TrainConfig::from_key_value_file(config_path, &extra);
    for (const auto& [key, value] : extra) {
        if (key != "beta_file")
            throw ValidationError("train config: unknown key '" + key + "'");
        (void)value;
    }

    auto records = load_annotations(data_path);
    std::string base_dir = fs::path(data_path).parent_path().string();
    if (base_dir.empty()) base_dir = ".";

    std::map<std::string, double> betas;
    const std::map<std::string, double>* beta_ptr = nullptr;
    if (auto it = extra.find("beta_file"); it != extra.end()) {
        betas = load_beta_table(it->second);
        beta_ptr = &betas;
    } else if (tc.loss.use_weighted_emd) {
        throw ValidationError("train: use_weighted_emd=1 requires beta_file=<path> in the config");
    }

    auto samples = prepare_samples(records, base_dir, tc.model, beta_ptr);

    fs::create_directories(out_dir);
    auto progress = [](const EpochLog& log, void*) {
        std::cout << "epoch " << log.epoch << " total " << format_double(log.total) << " wemd "
                  << format_double(log.wemd) << " atts " << format_double(log.atts) << "\n";
    };
    TrainResult result = train(samples, tc, progress, nullptr);

    atomic_write_checkpoint((fs::path(out_dir) / "checkpoint_final.ckpt").string(),
                            to_checkpoint(result.final_params, tc.model));
    atomic_write_checkpoint((fs::path(out_dir) / "checkpoint_best.ckpt").string(),
                            to_checkpoint(result.best_params, tc.model));
    atomic_write_text((fs::path(out_dir) / "train_log.tsv").string(), result.log_text());
    std::cout << "best epoch " << result.best_epoch << " loss " << format_double(result.best_loss) << "\n";
    return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& data_path, const std::string& report_path,
             double emd_r) {
    Checkpoint ckpt = read_checkpoint(ckpt_path);
    ModelConfig cfg;
    ModelParams params = params_from_checkpoint(ckpt, cfg);

    auto records = load_annotations(data_path);
    std::string base_dir = fs::path(data_path).parent_path().string();
    if (base_dir.empty()) base_dir = ".";
    auto samples = prepare_samples(records, base_dir, cfg, nullptr);

    LossConfig loss;
    loss.emd_r = emd_r;
    MetricsReport report = evaluate(params, cfg, loss, samples);
    atomic_write_text(report_path, report.machine_lines());
    std::cout << report.human_text();
    return 0;
}

int run_raters(const std::string& table_path, const std::string& out_dir, std::uint64_t seed, int n_perm,
               int batch_size, double q) {
    RatingTable table = load_rating_table(table_path);

    double w = kendalls_w(table);
    std::vector<double> null_samples;
    double p = permutation_test_w(table, n_perm, seed, &null_samples);
    PairwiseSpearman ps = pairwise_spearman_p(table, mix_seed(seed, hash_str("pairwise")), n_perm);

    bool have_batches = table.items >= batch_size;
    BatchConsistency bc;
    if (have_batches) bc = batch_consistency(table, batch_size, q, mix_seed(seed, hash_str("batches")), n_perm);

    fs::create_directories(out_dir);
    std::ostringstream machine;
    machine << "raters=" << table.raters << "\n";
    machine << "items=" << table.items << "\n";
    machine << "kendalls_w=" << format_double(w) << "\n";
    machine << "w_p_value=" << format_double(p) << "\n";
    machine << "pairwise_mean_rho=" << format_double(ps.mean_rho) << "\n";
    machine << "pairwise_mean_p=" << format_double(ps.mean_p) << "\n";
    if (have_batches) {
        // both W readings: the global table statistic above and the mean of
        // the per-batch values
        double mean_w = 0.0;
        for (double v : bc.batch_w) mean_w += v;
        mean_w /= static_cast<double>(bc.batch_w.size());
        machine << "batch_size=" << batch_size << "\n";
        machine << "batches=" << bc.batches << "\n";
        machine << "mean_batch_w=" << format_double(mean_w) << "\n";
        machine << "significant_fraction=" << format_double(bc.fraction) << "\n";
    }
    atomic_write_text((fs::path(out_dir) / "consistency.tsv").string(), machine.str());

    std::string null_csv = "w_null\n";
    for (double v : null_samples) {
        null_csv += format_double(v);
        null_csv += '\n';
    }
    atomic_write_text((fs::path(out_dir) / "w_null.csv").string(), null_csv);

    std::cout << "Kendall's W " << format_double(w) << " (permutation p " << format_double(p) << ", "
              << n_perm << " draws)\n";
    std::cout << "pairwise Spearman mean rho " << format_double(ps.mean_rho) << ", mean p "
              << format_double(ps.mean_p) << "\n";
    if (have_batches) {
        std::cout << bc.significant << "/" << bc.batches << " batches significant at FDR " << q << "\n";
    } else {
        std::cout << "table smaller than one batch (" << batch_size << "); batch analysis skipped\n";
    }
    return 0;
}

ImageU8 draw_pattern_overlay(const ImageU8& image, const PartitionMap& map) {
    ImageU8 out = image;
    if (out.channels == 1) {
        // promote to RGB so the overlay is visible
        ImageU8 rgb = make_image(out.width, out.height, 3);
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x)
                for (int c = 0; c < 3; ++c) rgb.at(y, x, c) = out.at(y, x, 0);
        out = std::move(rgb);
    }
    auto paint = [&](int y, int x) {
        if (y < 0 || y >= out.height || x < 0 || x >= out.width) return;
        out.at(y, x, 0) = 40;
        out.at(y, x, 1) = 220;
        out.at(y, x, 2) = 60;
    };
    const double cell_h = static_cast<double>(out.height) / map.height;
    const double cell_w = static_cast<double>(out.width) / map.width;
    for (int i = 0; i < map.height; ++i) {
        for (int j = 0; j < map.width; ++j) {
            int here = map.cell_partition(i, j);
            if (j + 1 < map.width && map.cell_partition(i, j + 1) != here) {
                int x = static_cast<int>((j + 1) * cell_w);
                int y0 = static_cast<int>(i * cell_h), y1 = static_cast<int>((i + 1) * cell_h);
                for (int y = y0; y <= y1; ++y) {
                    paint(y, x - 1);
                    paint(y, x);
                }
            }
            if (i + 1 < map.height && map.cell_partition(i + 1, j) != here) {
                int y = static_cast<int>((i + 1) * cell_h);
                int x0 = static_cast<int>(j * cell_w), x1 = static_cast<int>((j + 1) * cell_w);
                for (int x = x0; x <= x1; ++x) {
                    paint(y - 1, x);
                    paint(y, x);
                }
            }
        }
    }
    return out;
}

int run_visualize(const std::string& ckpt_path, const std::string& image_path, const std::string& out_dir,
                  int pattern_override) {
    // pattern-only mode: render a partition overlay without any model
    if (pattern_override > 0 && ckpt_path.empty()) {
        ImageU8 image = read_png(image_path);
        auto map = pattern_mask(pattern_override, 7, 7);
        fs::create_directories(out_dir);
        atomic_write_bytes((fs::path(out_dir) / "overlay.png").string(),
                           encode_png(draw_pattern_overlay(image, map)));
        std::cout << "pattern " << pattern_override << " overlay written\n";
        return 0;
    }

    Checkpoint ckpt = read_checkpoint(ckpt_path);
    ModelConfig cfg;
    ModelParams params = params_from_checkpoint(ckpt, cfg);
    if (cfg.feature_source != FeatureSource::kToyStem)
        throw ValidationError("visualize: checkpoint was trained on precomputed features; an image "
                              "cannot be featurized without the toy stem");
    ImageU8 image = read_png(image_path);

    SaliencyMap sal_map = spectral_residual(image);
    SaliencyGrid grid = downsample_max(sal_map, cfg.saliency_height(), cfg.saliency_width());

    ModelGeometry geom = make_geometry(cfg);
    ModelInput input;
    input.image = &image;
    if (cfg.use_saliency) input.saliency = &grid;
    ForwardCache cache;
    ModelOutput out = model_forward(params, cfg, geom, input, {}, cache);

    // dominant pattern, ties resolved to the lowest pattern id
    int dominant = 1;
    for (int p = 1; p < kPatternCount; ++p) {
        if (cache.pattern_w[p] > cache.pattern_w[dominant - 1]) dominant = p + 1;
    }

    fs::create_directories(out_dir);
    atomic_write_bytes((fs::path(out_dir) / "saliency.png").string(),
                       encode_png(saliency_to_png_image(sal_map)));
    atomic_write_bytes((fs::path(out_dir) / "overlay.png").string(),
                       encode_png(draw_pattern_overlay(image, geom.feat_patterns.map(dominant))));

    std::ostringstream machine;
    machine << "mean_score=" << format_double(out.mean) << "\n";
    for (int i = 0; i < kScoreBins; ++i)
        machine << "p" << (i + 1) << "=" << format_double(out.dist.probs[i]) << "\n";
    for (int p = 0; p < kPatternCount; ++p)
        machine << "w" << (p + 1) << "=" << format_double(cache.pattern_w[p]) << "\n";
    machine << "dominant_pattern=" << dominant << "\n";
    atomic_write_text((fs::path(out_dir) / "prediction.tsv").string(), machine.str());

    std::cout << "predicted mean score " << format_double(out.mean) << ", dominant pattern " << dominant
              << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"saliency-augmented multi-pattern composition assessment"};
    app.require_subcommand(1);

    std::string spec_path, out_dir, in_path, annotations_path, config_path, data_path, ckpt_path,
        image_path, report_path, table_path;
    std::uint64_t seed = 0;
    double test_fraction = 0.1;
    bool write_float = false;
    double emd_r = 2.0;
    int n_perm = 999;
    int batch_size = 100;
    double q = 0.05;
    int pattern_override = 0;

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--spec", spec_path, "synth spec file (key=value)")->required();
    synth->add_option("--seed", seed, "generator seed");
    synth->add_option("--out", out_dir, "output dataset directory")->required();

    auto* saliency = app.add_subcommand("saliency", "spectral-residual saliency maps");
    saliency->add_option("--in", in_path, "input PNG file or directory")->required();
    saliency->add_option("--out", out_dir, "output directory")->required();
    saliency->add_flag("--write-float", write_float, "also write C=1 float feature files");

    auto* prepare = app.add_subcommand("prepare", "content-bias analysis and train/test split");
    prepare->add_option("--annotations", annotations_path, "annotation file")->required();
    prepare->add_option("--out", out_dir, "output directory")->required();
    prepare->add_option("--test-fraction", test_fraction, "test fraction of the kept images");
    prepare->add_option("--seed", seed, "split seed");

    auto* train_cmd = app.add_subcommand("train", "train a model");
    train_cmd->add_option("--config", config_path, "train config file")->required();
    train_cmd->add_option("--data", data_path, "annotation file of the training set")->required();
    train_cmd->add_option("--out", out_dir, "output directory")->required();

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    eval_cmd->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
    eval_cmd->add_option("--data", data_path, "annotation file of the evaluation set")->required();
    eval_cmd->add_option("--report", report_path, "machine-readable report path")->required();
    eval_cmd->add_option("--emd-r", emd_r, "EMD exponent for the report");

    auto* raters = app.add_subcommand("raters", "rater-consistency statistics");
    raters->add_option("--table", table_path, "rating table (TSV, one row per rater)")->required();
    raters->add_option("--out", out_dir, "output directory")->required();
    raters->add_option("--seed", seed, "permutation seed");
    raters->add_option("--n-perm", n_perm, "permutation count");
    raters->add_option("--batch-size", batch_size, "batch size for the per-batch analysis");
    raters->add_option("--q", q, "FDR level");

    auto* visualize = app.add_subcommand("visualize", "per-image prediction and pattern overlay");
    visualize->add_option("--checkpoint", ckpt_path, "toy-stem checkpoint");
    visualize->add_option("--image", image_path, "input PNG")->required();
    visualize->add_option("--out", out_dir, "output directory")->required();
    visualize->add_option("--pattern", pattern_override, "render this pattern's overlay without a model");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return run_synth(spec_path, seed, out_dir);
        if (saliency->parsed()) return run_saliency(in_path, out_dir, write_float);
        if (prepare->parsed()) return run_prepare(annotations_path, out_dir, test_fraction, seed);
        if (train_cmd->parsed()) return run_train(config_path, data_path, out_dir);
        if (eval_cmd->parsed()) return run_eval(ckpt_path, data_path, report_path, emd_r);
        if (raters->parsed()) return run_raters(table_path, out_dir, seed, n_perm, batch_size, q);
        if (visualize->parsed()) return run_visualize(ckpt_path, image_path, out_dir, pattern_override);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
