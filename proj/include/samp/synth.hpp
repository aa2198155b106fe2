#ifndef SAMP_SYNTH_HPP
#define SAMP_SYNTH_HPP

#include "samp/image.hpp"
#include "samp/types.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace samp {

// The four scene families. Each renders a simple object layout on a noisy
// background and ties scores/attributes to the layout; the exact score laws
// are documented in the README and frozen in kFamilyScoreLaw.
enum class SceneFamily { kThirdsAligned, kCentered, kOffBalance, kSymmetricPair };

inline constexpr std::array<const char*, 4> kFamilyNames = {"thirds_aligned", "centered", "off_balance",
                                                            "symmetric_pair"};

// Per-family categorical law for a single rater score (bins 1..5).
extern const std::array<std::array<double, kScoreBins>, 4> kFamilyScoreLaw;

SceneFamily family_from_name(const std::string& name);

struct SynthSpec {
    int image_size = 224;
    std::array<int, 4> counts{}; // per family

    void validate() const;
    static SynthSpec from_key_value_file(const std::string& path);
};

struct SynthSample {
    AnnotatedImage annotation;
    ImageU8 image;
};

// Deterministic given (spec, seed); annotations carry the family name as the
// category and image_path "images/<id>.png".
std::vector<SynthSample> synth_generate(const SynthSpec& spec, std::uint64_t seed);

// Writes out_dir/annotations.tsv and out_dir/images/*.png.
void write_synth_dataset(const std::string& out_dir, const std::vector<SynthSample>& samples);

} // namespace samp

#endif
