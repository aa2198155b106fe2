#include "samp/io.hpp"
#include "samp/common.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace samp {

namespace {

constexpr char kFeatMagic[8] = {'S', 'A', 'M', 'P', 'F', 'E', 'A', 'T'};
constexpr char kCkptMagic[8] = {'S', 'A', 'M', 'P', 'C', 'K', 'P', 'T'};

void write_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32_le(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw ValidationError("truncated file: " + path);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f32_le(std::ostream& os, const float* data, std::size_t n) {
    // x86-64 is little-endian; byte order handled explicitly anyway so the
    // format stays pinned on any host.
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, &data[i], 4);
        unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                              static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
        os.write(reinterpret_cast<const char*>(b), 4);
    }
}

void read_f32_le(std::istream& is, float* data, std::size_t n, const std::string& path) {
    std::vector<unsigned char> buf(n * 4);
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
        throw ValidationError("truncated payload in " + path);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t bits = static_cast<std::uint32_t>(buf[4 * i]) |
                             (static_cast<std::uint32_t>(buf[4 * i + 1]) << 8) |
                             (static_cast<std::uint32_t>(buf[4 * i + 2]) << 16) |
                             (static_cast<std::uint32_t>(buf[4 * i + 3]) << 24);
        std::memcpy(&data[i], &bits, 4);
    }
}

} // namespace

void write_feature_file(const std::string& path, const FeatureMap& f) {
    if (f.channels <= 0 || f.height <= 0 || f.width <= 0 ||
        f.data.size() != static_cast<std::size_t>(f.channels) * f.height * f.width)
        throw ValidationError("write_feature_file: inconsistent feature map");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ValidationError("write_feature_file: cannot open " + path);
    os.write(kFeatMagic, 8);
    write_u32_le(os, static_cast<std::uint32_t>(f.channels));
    write_u32_le(os, static_cast<std::uint32_t>(f.height));
    write_u32_le(os, static_cast<std::uint32_t>(f.width));
    write_f32_le(os, f.data.data(), f.data.size());
    if (!os) throw ValidationError("write_feature_file: write failed for " + path);
}

FeatureMap read_feature_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("read_feature_file: cannot open " + path);
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kFeatMagic, 8) != 0)
        throw ValidationError("read_feature_file: bad magic in " + path);
    FeatureMap f;
    f.channels = static_cast<int>(read_u32_le(is, path));
    f.height = static_cast<int>(read_u32_le(is, path));
    f.width = static_cast<int>(read_u32_le(is, path));
    if (f.channels <= 0 || f.height <= 0 || f.width <= 0 ||
        static_cast<std::uint64_t>(f.channels) * f.height * f.width > (1ull << 31))
        throw ValidationError("read_feature_file: implausible dimensions in " + path);
    f.data.resize(static_cast<std::size_t>(f.channels) * f.height * f.width);
    read_f32_le(is, f.data.data(), f.data.size(), path);
    return f;
}

const CheckpointTensor* Checkpoint::find(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ostringstream header;
    header << "samp-checkpoint v1\n";
    header << "config " << ckpt.config << "\n";
    std::uint64_t offset = 0;
    for (const auto& t : ckpt.tensors) {
        std::size_t numel = 1;
        header << "tensor " << t.name << " f32 ";
        for (std::size_t i = 0; i < t.shape.size(); ++i) {
            if (i) header << 'x';
            header << t.shape[i];
            numel *= static_cast<std::size_t>(t.shape[i]);
        }
        if (numel != t.values.size())
            throw ValidationError("write_checkpoint: tensor " + t.name + " shape/value mismatch");
        header << ' ' << offset << "\n";
        offset += numel * 4;
    }
    std::string head = header.str();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ValidationError("write_checkpoint: cannot open " + path);
    os.write(kCkptMagic, 8);
    write_u32_le(os, static_cast<std::uint32_t>(head.size()));
    os.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (const auto& t : ckpt.tensors) write_f32_le(os, t.values.data(), t.values.size());
    if (!os) throw ValidationError("write_checkpoint: write failed for " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("read_checkpoint: cannot open " + path);
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kCkptMagic, 8) != 0)
        throw ValidationError("read_checkpoint: bad magic in " + path);
    std::uint32_t head_len = read_u32_le(is, path);
    if (head_len > (1u << 24)) throw ValidationError("read_checkpoint: implausible header length in " + path);
    std::string head(head_len, '\0');
    if (!is.read(head.data(), head_len)) throw ValidationError("read_checkpoint: truncated header in " + path);

    Checkpoint ckpt;
    struct Entry {
        std::string name;
        std::vector<int> shape;
        std::uint64_t offset;
        std::size_t numel;
    };
    std::vector<Entry> entries;
    std::istringstream hs(head);
    std::string line;
    bool version_ok = false;
    while (std::getline(hs, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "samp-checkpoint") {
            std::string ver;
            ls >> ver;
            if (ver != "v1") throw ValidationError("read_checkpoint: unsupported version '" + ver + "'");
            version_ok = true;
        } else if (kind == "config") {
            std::string rest;
            std::getline(ls, rest);
            if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
            ckpt.config = rest;
        } else if (kind == "tensor") {
            Entry e;
            std::string dtype, shape_str;
            ls >> e.name >> dtype >> shape_str >> e.offset;
            if (!ls) throw ValidationError("read_checkpoint: malformed tensor line '" + line + "'");
            if (dtype != "f32") throw ValidationError("read_checkpoint: unsupported dtype '" + dtype +
                                                      "' for tensor " + e.name);
            e.numel = 1;
            std::istringstream sh(shape_str);
            std::string dim;
            while (std::getline(sh, dim, 'x')) {
                int d = std::stoi(dim);
                if (d <= 0) throw ValidationError("read_checkpoint: bad shape for tensor " + e.name);
                e.shape.push_back(d);
                e.numel *= static_cast<std::size_t>(d);
            }
            entries.push_back(std::move(e));
        } else {
            throw ValidationError("read_checkpoint: unknown header line '" + line + "'");
        }
    }
    if (!version_ok) throw ValidationError("read_checkpoint: missing version line in " + path);

    std::uint64_t payload_start = 8 + 4 + head_len;
    for (const auto& e : entries) {
        CheckpointTensor t;
        t.name = e.name;
        t.shape = e.shape;
        t.values.resize(e.numel);
        is.seekg(static_cast<std::streamoff>(payload_start + e.offset));
        read_f32_le(is, t.values.data(), e.numel, path);
        ckpt.tensors.push_back(std::move(t));
    }
    return ckpt;
}

void atomic_write_text(const std::string& path, const std::string& contents) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw ValidationError("cannot open " + tmp);
        os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!os) throw ValidationError("write failed for " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw ValidationError("rename failed for " + path + ": " + ec.message());
}

} // namespace samp
