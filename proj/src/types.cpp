#include "samp/types.hpp"
#include "samp/common.hpp"

#include <cmath>
#include <sstream>

namespace samp {

const std::array<const char*, kAttributeCount> kAttributeNames = {
    "rule_of_thirds", "balancing_elements", "object_emphasis", "symmetry", "repetition"};

void validate_annotation(const AnnotatedImage& img) {
    if (img.image_id.empty()) throw ValidationError("annotation: empty image_id");
    for (int s : img.scores) {
        if (s < 1 || s > kScoreBins)
            throw ValidationError("annotation " + img.image_id + ": score " + std::to_string(s) +
                                  " outside [1,5]");
    }
    for (int a = 0; a < kAttributeCount; ++a) {
        double v = img.attributes[a];
        if (!std::isfinite(v) || v < -1.0 || v > 1.0)
            throw ValidationError("annotation " + img.image_id + ": attribute " +
                                  kAttributeNames[a] + " outside [-1,1]");
    }
    for (const auto& c : img.categories) {
        if (c.empty()) throw ValidationError("annotation " + img.image_id + ": empty category name");
    }
}

void validate_distribution(const ScoreDistribution& d) {
    double sum = 0.0;
    for (double p : d.probs) {
        if (!std::isfinite(p) || p < 0.0)
            throw ValidationError("score distribution: negative or non-finite entry");
        sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
        throw ValidationError("score distribution: probabilities sum to " + format_double(sum));
}

void validate_feature_map(const FeatureMap& f) {
    if (f.channels <= 0 || f.height < 3 || f.width < 3)
        throw ValidationError("feature map: requires C >= 1 and H,W >= 3");
    if (f.data.size() != static_cast<std::size_t>(f.channels) * f.height * f.width)
        throw ValidationError("feature map: data length does not match C*H*W");
    for (float v : f.data) {
        if (!std::isfinite(v)) throw ValidationError("feature map: non-finite entry");
    }
}

void validate_saliency_grid(const SaliencyGrid& g, int feat_h, int feat_w) {
    if (g.height != kSaliencyFactor * feat_h || g.width != kSaliencyFactor * feat_w)
        throw ValidationError("saliency grid: expected " + std::to_string(kSaliencyFactor * feat_h) +
                              "x" + std::to_string(kSaliencyFactor * feat_w) + ", got " +
                              std::to_string(g.height) + "x" + std::to_string(g.width));
    if (g.v.size() != static_cast<std::size_t>(g.height) * g.width)
        throw ValidationError("saliency grid: data length mismatch");
    for (float v : g.v) {
        if (!(v >= 0.0f && v <= 1.0f))
            throw ValidationError("saliency grid: value outside [0,1]");
    }
}

double mean_score(const std::array<int, kScoreBins>& scores) {
    long sum = 0;
    for (int s : scores) {
        if (s < 1 || s > kScoreBins)
            throw ValidationError("mean_score: score " + std::to_string(s) + " outside [1,5]");
        sum += s;
    }
    return static_cast<double>(sum) / kScoreBins;
}

ScoreDistribution score_histogram(const std::array<int, kScoreBins>& scores) {
    ScoreDistribution d;
    for (int s : scores) {
        if (s < 1 || s > kScoreBins)
            throw ValidationError("score_histogram: score " + std::to_string(s) + " outside [1,5]");
        d.probs[s - 1] += 1.0 / kScoreBins;
    }
    return d;
}

void ModelConfig::validate() const {
    if (channels <= 0) throw ValidationError("model config: channels must be positive");
    if (height < 3 || width < 3) throw ValidationError("model config: H,W must be >= 3");
    if (pattern_dim < 2 || pattern_dim % 2 != 0)
        throw ValidationError("model config: pattern_dim must be even and >= 2");
}

std::string ModelConfig::canonical_string() const {
    std::ostringstream os;
    os << "C=" << channels << ";H=" << height << ";W=" << width << ";Cp=" << pattern_dim
       << ";saliency=" << (use_saliency ? 1 : 0)
       << ";pattern_weights=" << (use_pattern_weights ? 1 : 0)
       << ";attribute_branch=" << (use_attribute_branch ? 1 : 0)
       << ";attention_fusion=" << (use_attention_fusion ? 1 : 0)
       << ";feature_source=" << (feature_source == FeatureSource::kToyStem ? "toy_stem" : "precomputed");
    return os.str();
}

std::string ModelConfig::digest() const {
    std::uint64_t h = hash_str(canonical_string());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

ModelConfig ModelConfig::from_canonical_string(const std::string& s) {
    ModelConfig cfg;
    std::istringstream is(s);
    std::string item;
    while (std::getline(is, item, ';')) {
        auto eq = item.find('=');
        if (eq == std::string::npos) throw ValidationError("model config string: bad item '" + item + "'");
        std::string key = item.substr(0, eq);
        std::string val = item.substr(eq + 1);
        try {
            if (key == "C") cfg.channels = std::stoi(val);
            else if (key == "H") cfg.height = std::stoi(val);
            else if (key == "W") cfg.width = std::stoi(val);
            else if (key == "Cp") cfg.pattern_dim = std::stoi(val);
            else if (key == "saliency") cfg.use_saliency = val == "1";
            else if (key == "pattern_weights") cfg.use_pattern_weights = val == "1";
            else if (key == "attribute_branch") cfg.use_attribute_branch = val == "1";
            else if (key == "attention_fusion") cfg.use_attention_fusion = val == "1";
            else if (key == "feature_source") {
                if (val == "toy_stem") cfg.feature_source = FeatureSource::kToyStem;
                else if (val == "precomputed") cfg.feature_source = FeatureSource::kPrecomputed;
                else throw ValidationError("model config string: unknown feature_source '" + val + "'");
            } else {
                throw ValidationError("model config string: unknown key '" + key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw ValidationError("model config string: bad value for '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

} // namespace samp
