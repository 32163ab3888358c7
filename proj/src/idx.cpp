#include "sparce/data/idx.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace sparce {

namespace {

constexpr std::uint8_t kIdxUint8 = 0x08;

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IdxError("load_idx: cannot open " + path);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
}

bool is_gzip(const std::vector<std::uint8_t>& bytes) {
    return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& bytes) {
    z_stream zs;
    std::memset(&zs, 0, sizeof(zs));
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
        throw IdxError("load_idx: zlib init failed");
    std::vector<std::uint8_t> out;
    out.reserve(bytes.size() * 4);
    std::uint8_t buffer[1 << 16];
    zs.next_in = const_cast<std::uint8_t*>(bytes.data());
    zs.avail_in = static_cast<uInt>(bytes.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = buffer;
        zs.avail_out = sizeof(buffer);
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw IdxError("load_idx: corrupt gzip stream");
        }
        out.insert(out.end(), buffer, buffer + (sizeof(buffer) - zs.avail_out));
    }
    inflateEnd(&zs);
    return out;
}

std::uint32_t read_u32be(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void write_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v >> 24));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v));
}

}  // namespace

IdxTensor parse_idx(const std::vector<std::uint8_t>& raw) {
    const std::vector<std::uint8_t>& bytes = is_gzip(raw) ? gunzip(raw) : raw;
    if (bytes.size() < 4) throw IdxError("load_idx: truncated header");
    const std::uint32_t magic = read_u32be(bytes.data());
    if ((magic >> 16) != 0) throw IdxError("load_idx: bad magic (nonzero leading bytes)");
    const auto type = std::uint8_t((magic >> 8) & 0xff);
    const auto rank = std::uint8_t(magic & 0xff);
    if (type != kIdxUint8) throw IdxError("load_idx: unsupported element type (only uint8)");
    if (rank < 1 || rank > 4) throw IdxError("load_idx: unsupported rank");
    if (bytes.size() < 4 + 4 * std::size_t(rank)) throw IdxError("load_idx: truncated dims");

    IdxTensor t;
    std::uint64_t total = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
        const std::uint32_t dim = read_u32be(bytes.data() + 4 + 4 * d);
        total *= dim;
        if (total > (1ULL << 33)) throw IdxError("load_idx: dim overflow");
        t.dims.push_back(static_cast<Index>(dim));
    }
    const std::size_t offset = 4 + 4 * std::size_t(rank);
    if (bytes.size() - offset != total)
        throw IdxError("load_idx: payload length does not match dims");
    t.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
    return t;
}

std::vector<std::uint8_t> serialize_idx(const IdxTensor& tensor) {
    if (tensor.dims.empty() || tensor.dims.size() > 4)
        throw IdxError("write_idx: rank must be 1..4");
    if (tensor.size() != static_cast<Index>(tensor.payload.size()))
        throw IdxError("write_idx: payload length does not match dims");
    std::vector<std::uint8_t> out;
    out.reserve(4 + 4 * tensor.dims.size() + tensor.payload.size());
    write_u32be(out, (std::uint32_t(kIdxUint8) << 8) | std::uint32_t(tensor.dims.size()));
    for (Index d : tensor.dims) write_u32be(out, static_cast<std::uint32_t>(d));
    out.insert(out.end(), tensor.payload.begin(), tensor.payload.end());
    return out;
}

IdxTensor load_idx(const std::string& path) { return parse_idx(read_file(path)); }

void write_idx(const std::string& path, const IdxTensor& tensor) {
    const auto bytes = serialize_idx(tensor);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IdxError("write_idx: cannot open " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

Matrix<float> normalize_images(const IdxTensor& images) {
    if (images.dims.size() != 3) throw IdxError("normalize_images: expected rank-3 images");
    const Index m = images.dims[0];
    const Index px = images.dims[1] * images.dims[2];
    Matrix<float> out(m, px);
    for (Index r = 0; r < m; ++r)
        for (Index c = 0; c < px; ++c)
            out(r, c) = static_cast<float>(images.payload[std::size_t(r * px + c)]) / 255.0f;
    return out;
}

std::vector<int> label_vector(const IdxTensor& labels) {
    if (labels.dims.size() != 1) throw IdxError("label_vector: expected rank-1 labels");
    return std::vector<int>(labels.payload.begin(), labels.payload.end());
}

}  // namespace sparce
