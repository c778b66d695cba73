#pragma once

#include "sgm/sgm.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgm {

// ---------------------------------------------------------------------------
// Errors

class IdxError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IdxBadMagic : public IdxError {
 public:
  using IdxError::IdxError;
};

class IdxTruncated : public IdxError {
 public:
  using IdxError::IdxError;
};

class IdxDimensionMismatch : public IdxError {
 public:
  using IdxError::IdxError;
};

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ModelIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shortest round-trippable decimal rendering used for all numeric text output.
inline std::string format_g17(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

// ---------------------------------------------------------------------------
// Raw file helpers

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_file_bytes(const std::string& path,
                             const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace detail {

inline std::uint32_t read_be_u32(const std::vector<std::uint8_t>& b,
                                 std::size_t offset, const char* what) {
  if (offset + 4 > b.size()) {
    throw IdxTruncated(std::string(what) + ": header ends before offset " +
                       std::to_string(offset + 4));
  }
  return (std::uint32_t(b[offset]) << 24) | (std::uint32_t(b[offset + 1]) << 16) |
         (std::uint32_t(b[offset + 2]) << 8) | std::uint32_t(b[offset + 3]);
}

inline void append_be_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  b.push_back(std::uint8_t(v >> 24));
  b.push_back(std::uint8_t(v >> 16));
  b.push_back(std::uint8_t(v >> 8));
  b.push_back(std::uint8_t(v));
}

inline void append_le_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(std::uint8_t(v >> (8 * i)));
}

inline void append_le_f64(std::vector<std::uint8_t>& b, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) b.push_back(std::uint8_t(bits >> (8 * i)));
}

inline std::uint32_t read_le_u32(const std::vector<std::uint8_t>& b,
                                 std::size_t& offset) {
  if (offset + 4 > b.size()) throw ModelIoError("model file is truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[offset + i]) << (8 * i);
  offset += 4;
  return v;
}

inline double read_le_f64(const std::vector<std::uint8_t>& b,
                          std::size_t& offset) {
  if (offset + 8 > b.size()) throw ModelIoError("model file is truncated");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t(b[offset + i]) << (8 * i);
  offset += 8;
  return std::bit_cast<double>(bits);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// IDX image/label containers (the classic big-endian ubyte format)

constexpr std::uint32_t kIdxImagesMagic = 0x00000803u;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801u;

struct ImageSet {
  Index count = 0;
  Index rows = 0;
  Index cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major per image
  std::vector<int> labels;           // empty until paired with a label file

  std::uint8_t pixel(Index image, Index r, Index c) const {
    return pixels[static_cast<std::size_t>((image * rows + r) * cols + c)];
  }
};

inline ImageSet parse_idx_images(const std::vector<std::uint8_t>& bytes) {
  const std::uint32_t magic = detail::read_be_u32(bytes, 0, "idx images");
  if (magic != kIdxImagesMagic) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "0x%08x", magic);
    throw IdxBadMagic(std::string("idx images: bad magic ") + buf +
                      ", expected 0x00000803");
  }
  ImageSet set;
  set.count = detail::read_be_u32(bytes, 4, "idx images");
  set.rows = detail::read_be_u32(bytes, 8, "idx images");
  set.cols = detail::read_be_u32(bytes, 12, "idx images");
  if (set.rows != 28 || set.cols != 28) {
    throw IdxDimensionMismatch("idx images: expected 28x28 images, found " +
                               std::to_string(set.rows) + "x" +
                               std::to_string(set.cols));
  }
  const std::size_t expected =
      16 + static_cast<std::size_t>(set.count) * 28 * 28;
  if (bytes.size() != expected) {
    throw IdxTruncated("idx images: expected " + std::to_string(expected) +
                       " bytes for " + std::to_string(set.count) +
                       " images, found " + std::to_string(bytes.size()));
  }
  set.pixels.assign(bytes.begin() + 16, bytes.end());
  return set;
}

inline std::vector<int> parse_idx_labels(const std::vector<std::uint8_t>& bytes) {
  const std::uint32_t magic = detail::read_be_u32(bytes, 0, "idx labels");
  if (magic != kIdxLabelsMagic) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "0x%08x", magic);
    throw IdxBadMagic(std::string("idx labels: bad magic ") + buf +
                      ", expected 0x00000801");
  }
  const std::uint32_t count = detail::read_be_u32(bytes, 4, "idx labels");
  const std::size_t expected = 8 + static_cast<std::size_t>(count);
  if (bytes.size() != expected) {
    throw IdxTruncated("idx labels: expected " + std::to_string(expected) +
                       " bytes for " + std::to_string(count) +
                       " labels, found " + std::to_string(bytes.size()));
  }
  std::vector<int> labels(count);
  for (std::size_t i = 0; i < count; ++i) labels[i] = bytes[8 + i];
  return labels;
}

inline std::vector<std::uint8_t> serialize_idx_images(const ImageSet& set) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(16 + set.pixels.size());
  detail::append_be_u32(bytes, kIdxImagesMagic);
  detail::append_be_u32(bytes, static_cast<std::uint32_t>(set.count));
  detail::append_be_u32(bytes, static_cast<std::uint32_t>(set.rows));
  detail::append_be_u32(bytes, static_cast<std::uint32_t>(set.cols));
  bytes.insert(bytes.end(), set.pixels.begin(), set.pixels.end());
  return bytes;
}

inline std::vector<std::uint8_t> serialize_idx_labels(
    const std::vector<int>& labels) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(8 + labels.size());
  detail::append_be_u32(bytes, kIdxLabelsMagic);
  detail::append_be_u32(bytes, static_cast<std::uint32_t>(labels.size()));
  for (int v : labels) bytes.push_back(static_cast<std::uint8_t>(v));
  return bytes;
}

// Loads an image file and its label file and checks that they agree.
inline ImageSet load_image_set(const std::string& images_path,
                               const std::string& labels_path) {
  ImageSet set = parse_idx_images(read_file_bytes(images_path));
  set.labels = parse_idx_labels(read_file_bytes(labels_path));
  if (static_cast<Index>(set.labels.size()) != set.count) {
    throw IdxDimensionMismatch(
        "image/label count mismatch: " + std::to_string(set.count) +
        " images vs " + std::to_string(set.labels.size()) + " labels");
  }
  return set;
}

// ---------------------------------------------------------------------------
// Pooling and tiling into three overlapping 7x7 views
//
// Each 28x28 image is 2x2 mean-pooled to 14x14 and scaled to [0, 1]. Three
// 7x7 tiles are cut from the top half: the side views split it left/right
// (columns 0-6 and 7-13), and the central view straddles the seam
// (columns 3-9), sharing four columns with the left view and three with the
// right. Tiles are flattened row-major into 49-vectors, one per column.

struct TiledModalities {
  MatrixX<double> x0;  // central view, 49 x n
  MatrixX<double> x1;  // left view,    49 x n
  MatrixX<double> x2;  // right view,   49 x n
  std::vector<int> labels;
};

inline TiledModalities tile_modalities(const ImageSet& set) {
  detail::require(set.rows == 28 && set.cols == 28,
                  "tile_modalities: need 28x28 images");
  detail::require(set.count >= 1, "tile_modalities: need at least one image");
  detail::require(static_cast<Index>(set.labels.size()) == set.count,
                  "tile_modalities: labels missing or mismatched");

  TiledModalities out;
  out.labels = set.labels;
  out.x0.resize(49, set.count);
  out.x1.resize(49, set.count);
  out.x2.resize(49, set.count);

  for (Index t = 0; t < set.count; ++t) {
    double pooled[14][14];
    for (Index r = 0; r < 14; ++r) {
      for (Index c = 0; c < 14; ++c) {
        const double sum = double(set.pixel(t, 2 * r, 2 * c)) +
                           double(set.pixel(t, 2 * r, 2 * c + 1)) +
                           double(set.pixel(t, 2 * r + 1, 2 * c)) +
                           double(set.pixel(t, 2 * r + 1, 2 * c + 1));
        pooled[r][c] = sum / 4.0 / 255.0;
      }
    }
    for (Index r = 0; r < 7; ++r) {
      for (Index c = 0; c < 7; ++c) {
        out.x0(r * 7 + c, t) = pooled[r][c + 3];
        out.x1(r * 7 + c, t) = pooled[r][c];
        out.x2(r * 7 + c, t) = pooled[r][c + 7];
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV matrices: one sample per row, comma-separated, no header

inline MatrixX<double> parse_csv_matrix(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;

    std::vector<double> row;
    std::size_t field_start = 0;
    std::size_t col_no = 0;
    while (true) {
      std::size_t comma = line.find(',', field_start);
      const std::string cell =
          line.substr(field_start, (comma == std::string::npos
                                        ? line.size()
                                        : comma) - field_start);
      ++col_no;
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        while (used < cell.size() &&
               (cell[used] == ' ' || cell[used] == '\t')) {
          ++used;
        }
        if (used != cell.size()) throw std::invalid_argument("trailing text");
        row.push_back(v);
      } catch (const std::exception&) {
        throw CsvError("row " + std::to_string(line_no) + ", column " +
                       std::to_string(col_no) + ": cannot parse '" + cell +
                       "' as a number");
      }
      if (comma == std::string::npos) break;
      field_start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw CsvError("row " + std::to_string(line_no) + " has " +
                     std::to_string(row.size()) + " fields, expected " +
                     std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw CsvError("csv input contains no data rows");

  MatrixX<double> out(static_cast<Index>(rows.size()),
                      static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < out.rows(); ++i) {
    for (Index j = 0; j < out.cols(); ++j) {
      out(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return out;
}

inline MatrixX<double> load_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  try {
    return parse_csv_matrix(text);
  } catch (const CsvError& e) {
    throw CsvError(path + ": " + e.what());
  }
}

inline std::string render_csv_matrix(const MatrixX<double>& m) {
  std::string out;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_g17(m(i, j));
    }
    out += '\n';
  }
  return out;
}

inline void save_csv_matrix(const std::string& path, const MatrixX<double>& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out << render_csv_matrix(m);
  if (!out) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Binary model container
//
// Little-endian layout (documented in the README):
//   bytes 0-3   magic "SGM1"
//   u32         m            (non-central modality count)
//   u32         k
//   u32 x (m+1) dims         (input dimension per modality)
//   f64 x m     weights
//   f64         trace_ratio
//   u32 x (m+1) ranks
//   u32         refine_iterations
//   per modality i = 0..m:  A_i as k*dims[i] f64 row-major, then b_i as k f64

constexpr char kModelMagic[4] = {'S', 'G', 'M', '1'};

inline std::vector<std::uint8_t> serialize_model(const SgmModel<double>& model) {
  if (model.maps.size() < 2 ||
      model.weights.size() != model.maps.size() - 1 ||
      model.ranks.size() != model.maps.size()) {
    throw ModelIoError("serialize_model: inconsistent model");
  }
  for (const auto& map : model.maps) {
    if (map.a.rows() != model.k || map.b.size() != model.k) {
      throw ModelIoError("serialize_model: map shape does not match k");
    }
  }

  std::vector<std::uint8_t> bytes;
  bytes.insert(bytes.end(), kModelMagic, kModelMagic + 4);
  detail::append_le_u32(bytes, static_cast<std::uint32_t>(model.maps.size() - 1));
  detail::append_le_u32(bytes, static_cast<std::uint32_t>(model.k));
  for (const auto& map : model.maps) {
    detail::append_le_u32(bytes, static_cast<std::uint32_t>(map.a.cols()));
  }
  for (double w : model.weights) detail::append_le_f64(bytes, w);
  detail::append_le_f64(bytes, model.trace_ratio);
  for (Index r : model.ranks) {
    detail::append_le_u32(bytes, static_cast<std::uint32_t>(r));
  }
  detail::append_le_u32(bytes,
                        static_cast<std::uint32_t>(model.refine_iterations));
  for (const auto& map : model.maps) {
    for (Index i = 0; i < map.a.rows(); ++i) {
      for (Index j = 0; j < map.a.cols(); ++j) {
        detail::append_le_f64(bytes, map.a(i, j));
      }
    }
    for (Index i = 0; i < map.b.size(); ++i) {
      detail::append_le_f64(bytes, map.b[i]);
    }
  }
  return bytes;
}

inline SgmModel<double> deserialize_model(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || bytes[0] != 'S' || bytes[1] != 'G' ||
      bytes[2] != 'M' || bytes[3] != '1') {
    throw ModelIoError("model file: bad magic, expected 'SGM1'");
  }
  std::size_t off = 4;
  const std::uint32_t m = detail::read_le_u32(bytes, off);
  if (m < 1 || m > 1u << 20) {
    throw ModelIoError("model file: implausible modality count");
  }
  SgmModel<double> model;
  model.k = detail::read_le_u32(bytes, off);
  std::vector<Index> dims(m + 1);
  for (auto& d : dims) d = detail::read_le_u32(bytes, off);
  model.weights.resize(m);
  for (auto& w : model.weights) w = detail::read_le_f64(bytes, off);
  model.trace_ratio = detail::read_le_f64(bytes, off);
  model.ranks.resize(m + 1);
  for (auto& r : model.ranks) r = detail::read_le_u32(bytes, off);
  model.refine_iterations =
      static_cast<int>(detail::read_le_u32(bytes, off));
  model.maps.resize(m + 1);
  for (std::uint32_t i = 0; i <= m; ++i) {
    auto& map = model.maps[i];
    map.a.resize(model.k, dims[i]);
    for (Index r = 0; r < map.a.rows(); ++r) {
      for (Index c = 0; c < map.a.cols(); ++c) {
        map.a(r, c) = detail::read_le_f64(bytes, off);
      }
    }
    map.b.resize(model.k);
    for (Index r = 0; r < model.k; ++r) map.b[r] = detail::read_le_f64(bytes, off);
  }
  if (off != bytes.size()) {
    throw ModelIoError("model file: " + std::to_string(bytes.size() - off) +
                       " unexpected trailing bytes");
  }
  return model;
}

inline void save_model(const std::string& path, const SgmModel<double>& model) {
  write_file_bytes(path, serialize_model(model));
}

inline SgmModel<double> load_model(const std::string& path) {
  return deserialize_model(read_file_bytes(path));
}

}  // namespace sgm
