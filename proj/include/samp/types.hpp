#ifndef SAMP_TYPES_HPP
#define SAMP_TYPES_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace samp {

inline constexpr int kScoreBins = 5;     // composition rating scale 1..5
inline constexpr int kAttributeCount = 5;
inline constexpr int kPatternCount = 8;
inline constexpr int kSaliencyFactor = 8; // saliency grid is 8x the feature grid

extern const std::array<const char*, kAttributeCount> kAttributeNames;

// One annotated image: five rater scores, five attribute values, content
// category labels, and an optional image path (relative paths are resolved
// against the annotation file's directory).
struct AnnotatedImage {
    std::string image_id;
    std::string image_path; // may be empty when features are precomputed
    std::array<int, kScoreBins> scores{};
    std::array<double, kAttributeCount> attributes{};
    std::vector<std::string> categories;
};

// Probability vector over the five score bins.
struct ScoreDistribution {
    std::array<double, kScoreBins> probs{};
};

// C x H x W activation grid, channel-major.
struct FeatureMap {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;

    float& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    float at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
};

// Max-pooled saliency at 8x the feature-grid resolution, values in [0,1].
struct SaliencyGrid {
    int height = 0;
    int width = 0;
    std::vector<float> v;

    float at(int y, int x) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

enum class FeatureSource { kPrecomputed, kToyStem };

struct ModelConfig {
    int channels = 64;      // C
    int height = 7;         // H
    int width = 7;          // W
    int pattern_dim = 256;  // C', split into two halves by AAFF
    bool use_saliency = true;
    bool use_pattern_weights = true;
    bool use_attribute_branch = true;
    bool use_attention_fusion = true;
    FeatureSource feature_source = FeatureSource::kPrecomputed;

    int saliency_height() const { return kSaliencyFactor * height; }
    int saliency_width() const { return kSaliencyFactor * width; }

    void validate() const;
    // Canonical key=value form; identical configs produce identical strings.
    std::string canonical_string() const;
    std::string digest() const;

    static ModelConfig from_canonical_string(const std::string& s);
};

void validate_annotation(const AnnotatedImage& img);
void validate_distribution(const ScoreDistribution& d);
void validate_feature_map(const FeatureMap& f);
void validate_saliency_grid(const SaliencyGrid& g, int feat_h, int feat_w);

double mean_score(const std::array<int, kScoreBins>& scores);
ScoreDistribution score_histogram(const std::array<int, kScoreBins>& scores);

} // namespace samp

#endif
