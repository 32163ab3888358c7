#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparce/types.hpp"

namespace sparce {

/// An IDX container (the MNIST file format): big-endian magic + dims header
/// followed by a row-major uint8 payload.
struct IdxTensor {
    std::vector<Index> dims;
    std::vector<std::uint8_t> payload;

    Index size() const {
        Index n = 1;
        for (Index d : dims) n *= d;
        return n;
    }
};

struct IdxError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Parses an IDX file (uint8 element type, rank 1..4). Gzip-compressed
/// files are inflated transparently.
IdxTensor load_idx(const std::string& path);

/// Writes an uncompressed IDX file; load_idx(write_idx(x)) is byte-exact.
void write_idx(const std::string& path, const IdxTensor& tensor);

/// Parses IDX bytes already in memory (gzip accepted).
IdxTensor parse_idx(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> serialize_idx(const IdxTensor& tensor);

/// uint8 images scaled to [0,1]: rank-3 IDX -> M x (rows*cols) float matrix.
Matrix<float> normalize_images(const IdxTensor& images);

std::vector<int> label_vector(const IdxTensor& labels);

}  // namespace sparce
