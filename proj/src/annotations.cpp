#include "samp/annotations.hpp"
#include "samp/common.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace samp {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t p = s.find(sep, start);
        if (p == std::string::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, p - start));
        start = p + 1;
    }
    return out;
}

[[noreturn]] void fail(const std::string& origin, std::size_t line_no, const std::string& what) {
    throw ValidationError(origin + ":" + std::to_string(line_no) + ": " + what);
}

int parse_int(const std::string& s, const std::string& origin, std::size_t line_no, const char* field) {
    int v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        fail(origin, line_no, std::string("bad integer in field '") + field + "': '" + s + "'");
    return v;
}

double parse_real(const std::string& s, const std::string& origin, std::size_t line_no, const char* field) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        fail(origin, line_no, std::string("bad real in field '") + field + "': '" + s + "'");
    return v;
}

} // namespace

std::vector<AnnotatedImage> parse_annotations(const std::string& text, const std::string& origin) {
    std::vector<AnnotatedImage> records;
    std::unordered_set<std::string> seen;
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        auto fields = split(line, '\t');
        if (fields.size() != 4 && fields.size() != 5)
            fail(origin, line_no, "expected 4 or 5 tab-separated fields, got " + std::to_string(fields.size()));

        AnnotatedImage rec;
        rec.image_id = fields[0];
        if (rec.image_id.empty()) fail(origin, line_no, "empty image_id");
        if (!seen.insert(rec.image_id).second) fail(origin, line_no, "duplicate image_id '" + rec.image_id + "'");

        auto score_strs = split(fields[1], ',');
        if (score_strs.size() != kScoreBins)
            fail(origin, line_no, "expected 5 scores, got " + std::to_string(score_strs.size()));
        for (int i = 0; i < kScoreBins; ++i) {
            int s = parse_int(score_strs[i], origin, line_no, "scores");
            if (s < 1 || s > 5) fail(origin, line_no, "score " + std::to_string(s) + " outside [1,5]");
            rec.scores[i] = s;
        }

        auto attr_strs = split(fields[2], ',');
        if (attr_strs.size() != kAttributeCount)
            fail(origin, line_no, "expected 5 attributes, got " + std::to_string(attr_strs.size()));
        for (int i = 0; i < kAttributeCount; ++i) {
            double a = parse_real(attr_strs[i], origin, line_no, "attributes");
            if (!(a >= -1.0 && a <= 1.0))
                fail(origin, line_no, std::string("attribute ") + kAttributeNames[i] + " outside [-1,1]");
            rec.attributes[i] = a;
        }

        if (!fields[3].empty()) {
            for (auto& c : split(fields[3], ',')) {
                if (c.empty()) fail(origin, line_no, "empty category name");
                rec.categories.push_back(std::move(c));
            }
        }

        if (fields.size() == 5) rec.image_path = fields[4];
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<AnnotatedImage> load_annotations(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("load_annotations: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_annotations(ss.str(), path);
}

std::string format_annotation_line(const AnnotatedImage& img) {
    validate_annotation(img);
    std::string out = img.image_id;
    out += '\t';
    for (int i = 0; i < kScoreBins; ++i) {
        if (i) out += ',';
        out += std::to_string(img.scores[i]);
    }
    out += '\t';
    for (int i = 0; i < kAttributeCount; ++i) {
        if (i) out += ',';
        out += format_double(img.attributes[i]);
    }
    out += '\t';
    for (std::size_t i = 0; i < img.categories.size(); ++i) {
        if (i) out += ',';
        out += img.categories[i];
    }
    if (!img.image_path.empty()) {
        out += '\t';
        out += img.image_path;
    }
    return out;
}

void save_annotations(const std::string& path, const std::vector<AnnotatedImage>& records) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ValidationError("save_annotations: cannot open " + path);
    for (const auto& rec : records) {
        f << format_annotation_line(rec) << '\n';
    }
    if (!f) throw ValidationError("save_annotations: write failed for " + path);
}

} // namespace samp
