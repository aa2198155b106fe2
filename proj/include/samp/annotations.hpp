#ifndef SAMP_ANNOTATIONS_HPP
#define SAMP_ANNOTATIONS_HPP

#include "samp/types.hpp"

#include <string>
#include <vector>

namespace samp {

// Annotation file format, one record per line:
//   image_id TAB s1,s2,s3,s4,s5 TAB a1,a2,a3,a4,a5 TAB cat1,cat2,... TAB [image path]
// The category field may be empty; the trailing path field is optional.
// Validation failures carry the 1-based line number.
std::vector<AnnotatedImage> load_annotations(const std::string& path);
std::vector<AnnotatedImage> parse_annotations(const std::string& text, const std::string& origin);

std::string format_annotation_line(const AnnotatedImage& img);
void save_annotations(const std::string& path, const std::vector<AnnotatedImage>& records);

} // namespace samp

#endif
