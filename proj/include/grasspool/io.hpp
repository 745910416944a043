#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "grasspool/errors.hpp"
#include "grasspool/grassmann.hpp"
#include "grasspool/sequence.hpp"

namespace grasspool {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian");

enum class FileFormat { Csv, Binary };

inline FileFormat parse_format(const std::string& name) {
  if (name == "csv") return FileFormat::Csv;
  if (name == "bin") return FileFormat::Binary;
  throw ParseError("unknown format '" + name + "' (expected csv or bin)");
}

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to '" + path + "'");
}

inline void append_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

inline void append_f64(std::string& out, double v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

inline std::uint32_t take_u32(const std::string& bytes, std::size_t& off) {
  if (off + 4 > bytes.size()) {
    throw ParseError("truncated header at byte " + std::to_string(off));
  }
  std::uint32_t v;
  std::memcpy(&v, bytes.data() + off, 4);
  off += 4;
  return v;
}

inline double take_f64(const std::string& bytes, std::size_t& off) {
  if (off + 8 > bytes.size()) {
    throw ParseError("truncated payload at byte " + std::to_string(off));
  }
  double v;
  std::memcpy(&v, bytes.data() + off, 8);
  off += 8;
  return v;
}

// shortest exact decimal form of a double (17 significant digits always
// round-trips; fewer when they already do)
inline std::string format_double(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  return buf;
}

}  // namespace detail

// Csv layout: first line "n,d", then n lines of d comma-separated decimals.
inline void save_sequence_csv(const FeatureSequence& x,
                              const std::string& path) {
  std::string out;
  out += std::to_string(x.length()) + "," + std::to_string(x.dim()) + "\n";
  for (Eigen::Index i = 0; i < x.length(); ++i) {
    for (Eigen::Index j = 0; j < x.dim(); ++j) {
      if (j) out += ",";
      out += detail::format_double(x.frames(i, j));
    }
    out += "\n";
  }
  detail::write_file(path, out);
}

inline FeatureSequence load_sequence_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ":1: missing header");

  const auto parse_header_count = [&](const std::string& field,
                                      const char* what) {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(field, &pos);
      if (pos != field.size() || v < 1) throw std::invalid_argument(field);
      return static_cast<Eigen::Index>(v);
    } catch (const std::exception&) {
      throw ParseError(path + ":1: bad " + std::string(what) + " '" + field +
                       "'");
    }
  };
  const auto comma = line.find(',');
  if (comma == std::string::npos) {
    throw ParseError(path + ":1: header must be 'n,d'");
  }
  const Eigen::Index n = parse_header_count(line.substr(0, comma), "n");
  const Eigen::Index d = parse_header_count(line.substr(comma + 1), "d");

  Eigen::MatrixXd frames(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::getline(in, line)) {
      throw ParseError(path + ":" + std::to_string(i + 2) +
                       ": unexpected end of file (expected " +
                       std::to_string(n) + " rows)");
    }
    std::stringstream row(line);
    std::string field;
    Eigen::Index j = 0;
    while (std::getline(row, field, ',')) {
      if (j >= d) break;
      try {
        std::size_t pos = 0;
        frames(i, j) = std::stod(field, &pos);
        if (pos != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(i + 2) + ": bad value '" +
                         field + "' in column " + std::to_string(j + 1));
      }
      ++j;
    }
    if (j != d || std::getline(row, field, ',')) {
      throw DimensionMismatch(path + ":" + std::to_string(i + 2) + ": row has " +
                              std::to_string(j) + " values, expected " +
                              std::to_string(d));
    }
  }
  return FeatureSequence(std::move(frames));
}

// Binary layout: magic "GRP1", u32 n, u32 d, then n*d little-endian IEEE
// doubles in row-major order.
inline void save_sequence_binary(const FeatureSequence& x,
                                 const std::string& path) {
  std::string out = "GRP1";
  detail::append_u32(out, static_cast<std::uint32_t>(x.length()));
  detail::append_u32(out, static_cast<std::uint32_t>(x.dim()));
  for (Eigen::Index i = 0; i < x.length(); ++i) {
    for (Eigen::Index j = 0; j < x.dim(); ++j) {
      detail::append_f64(out, x.frames(i, j));
    }
  }
  detail::write_file(path, out);
}

inline FeatureSequence load_sequence_binary(const std::string& path) {
  const std::string bytes = detail::read_file(path);
  if (bytes.size() < 4 || bytes.compare(0, 4, "GRP1") != 0) {
    throw ParseError(path + ": bad magic (expected GRP1)");
  }
  std::size_t off = 4;
  const std::uint32_t n = detail::take_u32(bytes, off);
  const std::uint32_t d = detail::take_u32(bytes, off);
  if (n < 1 || d < 1) {
    throw ParseError(path + ": header says n=" + std::to_string(n) +
                     " d=" + std::to_string(d));
  }
  const std::size_t expected = off + static_cast<std::size_t>(n) * d * 8;
  if (bytes.size() != expected) {
    throw ParseError(path + ": expected " + std::to_string(expected) +
                     " bytes, got " + std::to_string(bytes.size()));
  }
  Eigen::MatrixXd frames(n, d);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) {
      frames(i, j) = detail::take_f64(bytes, off);
    }
  }
  return FeatureSequence(std::move(frames));
}

inline FeatureSequence load_sequence(const std::string& path,
                                     FileFormat format) {
  return format == FileFormat::Csv ? load_sequence_csv(path)
                                   : load_sequence_binary(path);
}

inline void save_sequence(const FeatureSequence& x, const std::string& path,
                          FileFormat format) {
  if (format == FileFormat::Csv) {
    save_sequence_csv(x, path);
  } else {
    save_sequence_binary(x, path);
  }
}

// Descriptor file: magic "GRPU", u32 d, u32 p, d*p doubles column-major,
// then final objective and the satisfied-constraint fraction.
struct StoredDescriptor {
  StiefelPoint point;
  double final_objective = 0.0;
  double constraints_satisfied_fraction = 0.0;
};

inline void save_descriptor(const StiefelPoint& point, double final_objective,
                            double satisfied_fraction,
                            const std::string& path) {
  std::string out = "GRPU";
  detail::append_u32(out, static_cast<std::uint32_t>(point.ambient_dim()));
  detail::append_u32(out, static_cast<std::uint32_t>(point.subspace_dim()));
  const Eigen::MatrixXd& m = point.matrix();
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      detail::append_f64(out, m(i, j));
    }
  }
  detail::append_f64(out, final_objective);
  detail::append_f64(out, satisfied_fraction);
  detail::write_file(path, out);
}

inline StoredDescriptor load_descriptor(const std::string& path) {
  const std::string bytes = detail::read_file(path);
  if (bytes.size() < 4 || bytes.compare(0, 4, "GRPU") != 0) {
    throw ParseError(path + ": bad magic (expected GRPU)");
  }
  std::size_t off = 4;
  const std::uint32_t d = detail::take_u32(bytes, off);
  const std::uint32_t p = detail::take_u32(bytes, off);
  const std::size_t expected = off + (static_cast<std::size_t>(d) * p + 2) * 8;
  if (bytes.size() != expected) {
    throw ParseError(path + ": expected " + std::to_string(expected) +
                     " bytes, got " + std::to_string(bytes.size()));
  }
  Eigen::MatrixXd m(d, p);
  for (std::uint32_t j = 0; j < p; ++j) {
    for (std::uint32_t i = 0; i < d; ++i) {
      m(i, j) = detail::take_f64(bytes, off);
    }
  }
  StoredDescriptor out{StiefelPoint(std::move(m))};
  out.final_objective = detail::take_f64(bytes, off);
  out.constraints_satisfied_fraction = detail::take_f64(bytes, off);
  return out;
}

}  // namespace grasspool
