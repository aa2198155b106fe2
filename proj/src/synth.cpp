#include "samp/synth.hpp"
#include "samp/annotations.hpp"
#include "samp/common.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace samp {

const std::array<std::array<double, kScoreBins>, 4> kFamilyScoreLaw = {{
    {0.00, 0.00, 0.05, 0.45, 0.50}, // thirds_aligned, mean 4.45
    {0.05, 0.40, 0.50, 0.05, 0.00}, // centered, mean 2.55
    {0.50, 0.45, 0.05, 0.00, 0.00}, // off_balance, mean 1.55
    {0.00, 0.05, 0.50, 0.40, 0.05}, // symmetric_pair, mean 3.45
}};

namespace {

// per family: rule_of_thirds, balancing_elements, object_emphasis, symmetry, repetition
constexpr std::array<std::array<double, kAttributeCount>, 4> kFamilyAttributes = {{
    {0.80, 0.20, 0.70, -0.20, -0.40},  // thirds_aligned
    {-0.30, 0.30, 0.80, 0.40, -0.40},  // centered
    {-0.60, -0.80, 0.40, -0.70, -0.5}, // off_balance
    {0.00, 0.70, 0.20, 0.85, 0.60},    // symmetric_pair
}};

struct Blob {
    double cx, cy; // center in pixels
    double rx, ry; // radii
};

void draw_blob(ImageU8& img, const Blob& blob, const std::array<int, 3>& color) {
    int y0 = std::max(0, static_cast<int>(std::floor(blob.cy - blob.ry)));
    int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(blob.cy + blob.ry)));
    int x0 = std::max(0, static_cast<int>(std::floor(blob.cx - blob.rx)));
    int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(blob.cx + blob.rx)));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            double dx = (x - blob.cx) / blob.rx;
            double dy = (y - blob.cy) / blob.ry;
            if (dx * dx + dy * dy <= 1.0) {
                for (int c = 0; c < 3; ++c)
                    img.at(y, x, c) = static_cast<std::uint8_t>(color[c]);
            }
        }
    }
}

} // namespace

SceneFamily family_from_name(const std::string& name) {
    for (std::size_t i = 0; i < kFamilyNames.size(); ++i) {
        if (name == kFamilyNames[i]) return static_cast<SceneFamily>(i);
    }
    throw ValidationError("unknown scene family '" + name + "'");
}

void SynthSpec::validate() const {
    if (image_size <= 0) throw ValidationError("synth spec: image size must be positive");
    int total = 0;
    for (int c : counts) {
        if (c < 0) throw ValidationError("synth spec: negative family count");
        total += c;
    }
    if (total == 0) throw ValidationError("synth spec: all family counts are zero");
}

SynthSpec SynthSpec::from_key_value_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("synth spec: cannot open " + path);
    SynthSpec spec;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError(path + ":" + std::to_string(line_no) + ": expected key=value");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        if (key == "size") {
            spec.image_size = std::stoi(val);
        } else {
            spec.counts[static_cast<std::size_t>(family_from_name(key))] = std::stoi(val);
        }
    }
    spec.validate();
    return spec;
}

std::vector<SynthSample> synth_generate(const SynthSpec& spec, std::uint64_t seed) {
    spec.validate();
    const int size = spec.image_size;
    std::vector<SynthSample> out;

    int serial = 0;
    for (int fam = 0; fam < 4; ++fam) {
        for (int k = 0; k < spec.counts[fam]; ++k, ++serial) {
            Rng rng(mix_seed(seed, (static_cast<std::uint64_t>(fam) << 32) + static_cast<std::uint64_t>(k)));
            SynthSample s;
            s.image = make_image(size, size, 3);

            // background: muted gradient plus pixel noise
            int base = 40 + static_cast<int>(rng.uniform_index(40));
            for (int y = 0; y < size; ++y) {
                for (int x = 0; x < size; ++x) {
                    int shade = base + (x + y) * 20 / (2 * size) +
                                static_cast<int>(rng.uniform_index(11)) - 5;
                    shade = std::clamp(shade, 0, 255);
                    for (int c = 0; c < 3; ++c) s.image.at(y, x, c) = static_cast<std::uint8_t>(shade);
                }
            }

            std::array<int, 3> color = {200 + static_cast<int>(rng.uniform_index(56)),
                                        180 + static_cast<int>(rng.uniform_index(60)),
                                        60 + static_cast<int>(rng.uniform_index(60))};
            const double unit = size / 224.0;
            double r_base = (28.0 + rng.uniform(0.0, 14.0)) * unit;
            double aspect = rng.uniform(0.8, 1.25);
            double jitter = 6.0 * unit;

            switch (static_cast<SceneFamily>(fam)) {
                case SceneFamily::kThirdsAligned: {
                    double tx = (rng.uniform_index(2) == 0 ? 1.0 : 2.0) * size / 3.0;
                    double ty = (rng.uniform_index(2) == 0 ? 1.0 : 2.0) * size / 3.0;
                    Blob b{tx + rng.uniform(-jitter, jitter), ty + rng.uniform(-jitter, jitter),
                           r_base * aspect, r_base / aspect};
                    draw_blob(s.image, b, color);
                    break;
                }
                case SceneFamily::kCentered: {
                    Blob b{size / 2.0 + rng.uniform(-jitter, jitter), size / 2.0 + rng.uniform(-jitter, jitter),
                           r_base * aspect, r_base / aspect};
                    draw_blob(s.image, b, color);
                    break;
                }
                case SceneFamily::kOffBalance: {
                    // hug one corner, away from the thirds points
                    double margin = (22.0 + rng.uniform(0.0, 16.0)) * unit;
                    double cx = rng.uniform_index(2) == 0 ? margin : size - margin;
                    double cy = rng.uniform_index(2) == 0 ? margin : size - margin;
                    Blob b{cx, cy, r_base * 0.8 * aspect, r_base * 0.8 / aspect};
                    draw_blob(s.image, b, color);
                    break;
                }
                case SceneFamily::kSymmetricPair: {
                    double d = rng.uniform(45.0, 75.0) * unit;
                    double cy = rng.uniform(60.0, 164.0) * unit;
                    double r = r_base * 0.85;
                    draw_blob(s.image, Blob{size / 2.0 - d, cy, r * aspect, r / aspect}, color);
                    draw_blob(s.image, Blob{size / 2.0 + d, cy, r * aspect, r / aspect}, color);
                    break;
                }
            }

            auto& ann = s.annotation;
            char id[32];
            std::snprintf(id, sizeof(id), "%s_%04d", kFamilyNames[fam], k);
            ann.image_id = id;
            ann.image_path = "images/" + std::string(id) + ".png";
            ann.categories = {kFamilyNames[fam]};

            const auto& law = kFamilyScoreLaw[fam];
            std::vector<double> w(law.begin(), law.end());
            for (int r = 0; r < kScoreBins; ++r)
                ann.scores[r] = static_cast<int>(rng.categorical(w)) + 1;

            for (int a = 0; a < kAttributeCount; ++a) {
                double v = kFamilyAttributes[fam][a] + rng.uniform(-0.1, 0.1);
                ann.attributes[a] = std::clamp(v, -1.0, 1.0);
            }
            validate_annotation(ann);
            out.push_back(std::move(s));
        }
    }
    return out;
}

void write_synth_dataset(const std::string& out_dir, const std::vector<SynthSample>& samples) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "images");
    std::vector<AnnotatedImage> annotations;
    annotations.reserve(samples.size());
    for (const auto& s : samples) {
        write_png((fs::path(out_dir) / s.annotation.image_path).string(), s.image);
        annotations.push_back(s.annotation);
    }
    save_annotations((fs::path(out_dir) / "annotations.tsv").string(), annotations);
}

} // namespace samp
