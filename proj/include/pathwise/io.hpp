#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pathwise/core.hpp"
#include "pathwise/errors.hpp"

namespace pathwise::io {

using nlohmann::json;

/// Input-file problems carry the file and (when known) line for exit-code-2
/// reporting.
class InputError : public Error {
 public:
  InputError(const std::string& path, int line, const std::string& what)
      : Error(path + (line > 0 ? ":" + std::to_string(line) : "") + ": " + what) {}
};

// ---------------------------------------------------------------------------
// CSV (RFC-4180 subset: comma separator, '.' decimal point, no quoting needed
// for numeric data)

inline Matrix read_csv_matrix(const std::string& path, bool header = false) {
  std::ifstream in(path);
  if (!in) throw InputError(path, 0, "cannot open file");
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && header) continue;
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = line.find(',', pos);
      const std::string cell =
          line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used])))
          ++used;
        if (used != cell.size()) throw std::invalid_argument(cell);
        row.push_back(v);
      } catch (const std::exception&) {
        throw InputError(path, lineno, "cannot parse value '" + cell + "'");
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw InputError(path, lineno, "inconsistent column count");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError(path, 0, "empty file");
  Matrix out(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.front().size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return out;
}

inline Vector read_csv_vector(const std::string& path, bool header = false) {
  const Matrix m = read_csv_matrix(path, header);
  if (m.cols() != 1) throw InputError(path, 0, "expected a single column");
  return m.col(0);
}

inline void write_csv_matrix(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw InputError(path, 0, "cannot open file for writing");
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      out << buf;
      if (j + 1 < m.cols()) out << ',';
    }
    out << '\n';
  }
}

inline void write_csv_vector(const std::string& path, const Vector& v) {
  write_csv_matrix(path, v);
}

// ---------------------------------------------------------------------------
// PGM (P2 ASCII and P5 binary, maxval up to 65535)

struct PgmImage {
  int width = 0;
  int height = 0;
  int maxval = 255;
  bool binary = true;  // P5 vs P2
  std::vector<std::uint16_t> pixels;  // row-major

  std::uint16_t at(int r, int c) const {
    return pixels[static_cast<std::size_t>(r) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(c)];
  }
};

namespace detail {

inline int next_pgm_token(std::istream& in, const std::string& path) {
  // Whitespace- and comment-tolerant integer read.
  while (true) {
    const int ch = in.peek();
    if (ch == EOF) throw InputError(path, 0, "unexpected end of PGM header");
    if (ch == '#') {
      std::string comment;
      std::getline(in, comment);
      continue;
    }
    if (std::isspace(ch)) {
      in.get();
      continue;
    }
    break;
  }
  int value = 0;
  if (!(in >> value)) throw InputError(path, 0, "malformed PGM header");
  return value;
}

}  // namespace detail

inline PgmImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path, 0, "cannot open file");
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P5" && magic != "P2") throw InputError(path, 0, "not a PGM file (P2/P5)");
  PgmImage img;
  img.binary = magic == "P5";
  img.width = detail::next_pgm_token(in, path);
  img.height = detail::next_pgm_token(in, path);
  img.maxval = detail::next_pgm_token(in, path);
  if (img.width < 1 || img.height < 1) throw InputError(path, 0, "bad PGM dimensions");
  if (img.maxval < 1 || img.maxval > 65535) throw InputError(path, 0, "bad PGM maxval");
  const std::size_t count =
      static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  img.pixels.resize(count);
  if (img.binary) {
    in.get();  // single whitespace after maxval
    if (img.maxval > 255) {
      std::vector<unsigned char> raw(count * 2);
      in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
      if (static_cast<std::size_t>(in.gcount()) != raw.size())
        throw InputError(path, 0, "truncated PGM pixel data");
      for (std::size_t i = 0; i < count; ++i)
        img.pixels[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    } else {
      std::vector<unsigned char> raw(count);
      in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
      if (static_cast<std::size_t>(in.gcount()) != raw.size())
        throw InputError(path, 0, "truncated PGM pixel data");
      for (std::size_t i = 0; i < count; ++i) img.pixels[i] = raw[i];
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const int v = detail::next_pgm_token(in, path);
      if (v < 0 || v > img.maxval) throw InputError(path, 0, "PGM sample out of range");
      img.pixels[i] = static_cast<std::uint16_t>(v);
    }
  }
  for (const auto v : img.pixels)
    if (v > img.maxval) throw InputError(path, 0, "PGM sample out of range");
  return img;
}

inline void write_pgm(const std::string& path, const PgmImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(path, 0, "cannot open file for writing");
  out << (img.binary ? "P5" : "P2") << "\n"
      << img.width << " " << img.height << "\n"
      << img.maxval << "\n";
  if (img.binary) {
    if (img.maxval > 255) {
      std::vector<unsigned char> raw(img.pixels.size() * 2);
      for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        raw[2 * i] = static_cast<unsigned char>(img.pixels[i] >> 8);
        raw[2 * i + 1] = static_cast<unsigned char>(img.pixels[i] & 0xff);
      }
      out.write(reinterpret_cast<const char*>(raw.data()),
                static_cast<std::streamsize>(raw.size()));
    } else {
      std::vector<unsigned char> raw(img.pixels.size());
      for (std::size_t i = 0; i < img.pixels.size(); ++i)
        raw[i] = static_cast<unsigned char>(img.pixels[i]);
      out.write(reinterpret_cast<const char*>(raw.data()),
                static_cast<std::streamsize>(raw.size()));
    }
  } else {
    for (int r = 0; r < img.height; ++r) {
      for (int c = 0; c < img.width; ++c) {
        out << img.at(r, c);
        out << (c + 1 < img.width ? ' ' : '\n');
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Affine float <-> integer image mapping, recorded in a sidecar JSON file:
// float_value = scale * pixel + offset.

struct ImageMeta {
  double scale = 1.0;
  double offset = 0.0;
  int maxval = 65535;
  json extra;
};

inline PgmImage quantize(const Matrix& values, ImageMeta& meta) {
  PgmImage img;
  img.height = static_cast<int>(values.rows());
  img.width = static_cast<int>(values.cols());
  img.maxval = meta.maxval;
  img.binary = true;
  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  meta.offset = lo;
  meta.scale = hi > lo ? (hi - lo) / meta.maxval : 1.0;
  img.pixels.resize(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height));
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      const double scaled = (values(r, c) - meta.offset) / meta.scale;
      const long q = std::lround(std::min(std::max(scaled, 0.0), double(meta.maxval)));
      img.pixels[static_cast<std::size_t>(r) * img.width + c] =
          static_cast<std::uint16_t>(q);
    }
  return img;
}

inline Matrix to_float(const PgmImage& img, const ImageMeta& meta) {
  Matrix out(img.height, img.width);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) out(r, c) = meta.scale * img.at(r, c) + meta.offset;
  return out;
}

inline void write_meta(const std::string& path, const ImageMeta& meta) {
  json j = meta.extra.is_object() ? meta.extra : json::object();
  j["scale"] = meta.scale;
  j["offset"] = meta.offset;
  j["maxval"] = meta.maxval;
  std::ofstream out(path);
  if (!out) throw InputError(path, 0, "cannot open file for writing");
  out << j.dump(2) << "\n";
}

inline ImageMeta read_meta(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path, 0, "cannot open file");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw InputError(path, 0, std::string("bad JSON: ") + e.what());
  }
  ImageMeta meta;
  meta.scale = j.value("scale", 1.0);
  meta.offset = j.value("offset", 0.0);
  meta.maxval = j.value("maxval", 65535);
  meta.extra = j;
  return meta;
}

// ---------------------------------------------------------------------------
// Path files: line-delimited JSON, one self-describing record per line. The
// first line is a header record.

struct PathRecord {
  int index = 0;
  double lambda = 0.0;   // primary penalty at this grid point
  double lambda2 = 0.0;  // fusion penalty (fused method only)
  Vector coefficients;
  double intercept = 0.0;
  double objective = 0.0;
  int sweeps = 0;
  bool converged = false;
  bool certified = false;
};

struct PathFile {
  json header;
  std::vector<PathRecord> records;
};

inline void write_path_file(const std::string& path, const PathFile& file) {
  std::ofstream out(path);
  if (!out) throw InputError(path, 0, "cannot open file for writing");
  json header = file.header;
  header["record"] = "header";
  out << header.dump() << "\n";
  for (const auto& rec : file.records) {
    json j;
    j["record"] = "fit";
    j["index"] = rec.index;
    j["lambda"] = rec.lambda;
    if (rec.lambda2 != 0.0) j["lambda2"] = rec.lambda2;
    j["coefficients"] = std::vector<double>(rec.coefficients.data(),
                                            rec.coefficients.data() + rec.coefficients.size());
    if (rec.intercept != 0.0) j["intercept"] = rec.intercept;
    j["objective"] = rec.objective;
    j["sweeps"] = rec.sweeps;
    j["converged"] = rec.converged;
    j["certified"] = rec.certified;
    out << j.dump() << "\n";
  }
}

inline PathFile read_path_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path, 0, "cannot open file");
  PathFile file;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw InputError(path, lineno, std::string("bad JSON: ") + e.what());
    }
    const std::string kind = j.value("record", "");
    if (kind == "header") {
      file.header = j;
    } else if (kind == "fit") {
      PathRecord rec;
      rec.index = j.value("index", 0);
      rec.lambda = j.value("lambda", 0.0);
      rec.lambda2 = j.value("lambda2", 0.0);
      const auto coeffs = j.at("coefficients").get<std::vector<double>>();
      rec.coefficients = Eigen::Map<const Vector>(coeffs.data(),
                                                  static_cast<Eigen::Index>(coeffs.size()));
      rec.intercept = j.value("intercept", 0.0);
      rec.objective = j.value("objective", 0.0);
      rec.sweeps = j.value("sweeps", 0);
      rec.converged = j.value("converged", false);
      rec.certified = j.value("certified", false);
      file.records.push_back(std::move(rec));
    } else {
      throw InputError(path, lineno, "unknown record type '" + kind + "'");
    }
  }
  if (file.header.is_null() || file.records.empty())
    throw InputError(path, 0, "path file needs a header and at least one fit record");
  return file;
}

}  // namespace pathwise::io
