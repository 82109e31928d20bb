#pragma once

// Dense array files in NPY 1.0 layout: the "\x93NUMPY" magic, a version pair,
// a little-endian u16 header length, an ASCII python-dict header padded with
// spaces so the payload starts on a 64-byte boundary, then the C-order payload.
// Headers are emitted exactly as numpy.save does, so files are byte-identical
// to the reference writer and deterministic across runs.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "coreg/error.hpp"
#include "coreg/image.hpp"

namespace coreg {

static_assert(std::endian::native == std::endian::little,
              "tensor payloads are read and written as little-endian");

enum class Dtype { Float32, UInt8, Int32 };

constexpr std::string_view dtype_descr(Dtype d) {
  switch (d) {
    case Dtype::Float32: return "<f4";
    case Dtype::UInt8: return "|u1";
    case Dtype::Int32: return "<i4";
  }
  return "?";
}

template <typename T>
constexpr Dtype dtype_of() {
  if constexpr (std::is_same_v<T, float>) return Dtype::Float32;
  else if constexpr (std::is_same_v<T, std::uint8_t>) return Dtype::UInt8;
  else if constexpr (std::is_same_v<T, std::int32_t>) return Dtype::Int32;
  else static_assert(sizeof(T) == 0, "unsupported tensor element type");
}

/// An n-dimensional row-major array as stored on disk.
class DenseArray {
 public:
  using Storage = std::variant<std::vector<float>, std::vector<std::uint8_t>, std::vector<std::int32_t>>;

  DenseArray() : data_(std::vector<float>{}) {}

  template <typename T>
  DenseArray(std::vector<std::size_t> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_count();
  }

  template <typename T>
  static DenseArray from_plane(const Plane<T>& plane) {
    return DenseArray({plane.height(), plane.width()}, plane.data());
  }

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t ndim() const noexcept { return shape_.size(); }
  std::size_t element_count() const noexcept {
    return std::accumulate(shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>());
  }
  Dtype dtype() const noexcept { return static_cast<Dtype>(data_.index()); }

  template <typename T>
  bool holds() const noexcept { return std::holds_alternative<std::vector<T>>(data_); }

  template <typename T>
  const std::vector<T>& values() const {
    if (!holds<T>()) {
      throw Error(Errc::UnsupportedDtype, "array has dtype " + std::string(dtype_descr(dtype())) +
                                              ", expected " + std::string(dtype_descr(dtype_of<T>())));
    }
    return std::get<std::vector<T>>(data_);
  }

  /// Element values widened to double regardless of stored dtype.
  std::vector<double> as_doubles() const {
    return std::visit([](const auto& v) { return std::vector<double>(v.begin(), v.end()); }, data_);
  }

  /// View a 2-D array as a plane. The dtype must match exactly.
  template <typename T>
  Plane<T> to_plane() const {
    if (ndim() != 2) {
      throw Error(Errc::ShapeMismatch, "expected a 2-D array, got " + std::to_string(ndim()) + "-D");
    }
    return Plane<T>(shape_[0], shape_[1], values<T>());
  }

  const Storage& storage() const noexcept { return data_; }

  friend bool operator==(const DenseArray& a, const DenseArray& b) {
    if (a.shape_ != b.shape_ || a.data_.index() != b.data_.index()) return false;
    // Bitwise comparison so that float round-trips are checked exactly.
    return std::visit(
        [&](const auto& va) {
          using V = std::decay_t<decltype(va)>;
          const auto& vb = std::get<V>(b.data_);
          return va.size() == vb.size() &&
                 (va.empty() || std::memcmp(va.data(), vb.data(), va.size() * sizeof(va[0])) == 0);
        },
        a.data_);
  }

 private:
  void check_count() const {
    for (auto d : shape_) {
      if (d == 0) throw Error(Errc::ZeroDimension, "array dimensions must be positive");
    }
    const auto n = std::visit([](const auto& v) { return v.size(); }, data_);
    if (n != element_count()) {
      throw Error(Errc::ShapeMismatch, "payload has " + std::to_string(n) + " elements, shape implies " +
                                           std::to_string(element_count()));
    }
  }

  std::vector<std::size_t> shape_;
  Storage data_;
};

namespace detail {

inline constexpr std::string_view kNpyMagic = "\x93NUMPY";
inline constexpr std::size_t kNpyAlign = 64;

inline std::string format_shape(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  if (shape.size() == 1) s += ",";
  s += ")";
  return s;
}

// Minimal reader for the python dict literal numpy writes. Only the three
// keys numpy emits are understood; anything else is a malformed header.
class HeaderParser {
 public:
  explicit HeaderParser(std::string_view text) : text_(text) {}

  struct Result {
    std::string descr;
    bool fortran_order = false;
    std::vector<std::size_t> shape;
  };

  Result parse() {
    Result r;
    bool seen_descr = false, seen_order = false, seen_shape = false;
    expect('{');
    while (true) {
      skip_ws();
      if (peek() == '}') {
        ++pos_;
        break;
      }
      const std::string key = read_string();
      expect(':');
      if (key == "descr") {
        r.descr = read_string();
        seen_descr = true;
      } else if (key == "fortran_order") {
        r.fortran_order = read_bool();
        seen_order = true;
      } else if (key == "shape") {
        r.shape = read_tuple();
        seen_shape = true;
      } else {
        fail("unexpected key '" + key + "'");
      }
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      expect('}');
      break;
    }
    skip_ws();
    if (pos_ != text_.size()) fail("trailing characters after header dict");
    if (!seen_descr || !seen_order || !seen_shape) fail("header is missing a required key");
    return r;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw Error(Errc::BadHeader, why + " at offset " + std::to_string(pos_));
  }
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\n' || text_[pos_] == '\t')) ++pos_;
  }
  void expect(char c) {
    skip_ws();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  std::string read_string() {
    skip_ws();
    const char quote = peek();
    if (quote != '\'' && quote != '"') fail("expected a quoted string");
    const auto end = text_.find(quote, pos_ + 1);
    if (end == std::string_view::npos) fail("unterminated string");
    std::string s(text_.substr(pos_ + 1, end - pos_ - 1));
    pos_ = end + 1;
    return s;
  }
  bool read_bool() {
    skip_ws();
    if (text_.substr(pos_, 4) == "True") {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "False") {
      pos_ += 5;
      return false;
    }
    fail("expected True or False");
  }
  std::vector<std::size_t> read_tuple() {
    expect('(');
    std::vector<std::size_t> dims;
    while (true) {
      skip_ws();
      if (peek() == ')') {
        ++pos_;
        return dims;
      }
      if (peek() < '0' || peek() > '9') fail("expected a dimension");
      std::size_t v = 0;
      while (peek() >= '0' && peek() <= '9') {
        v = v * 10 + static_cast<std::size_t>(peek() - '0');
        if (v > (std::size_t{1} << 40)) fail("dimension too large");
        ++pos_;
      }
      dims.push_back(v);
      skip_ws();
      if (peek() == ',') ++pos_;
      else if (peek() != ')') fail("expected ',' or ')'");
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

template <typename T>
void append_payload(std::string& out, const std::vector<T>& v) {
  const auto* p = reinterpret_cast<const char*>(v.data());
  out.append(p, v.size() * sizeof(T));
}

template <typename T>
std::vector<T> read_payload(std::string_view bytes, std::size_t count) {
  if (bytes.size() != count * sizeof(T)) {
    throw Error(Errc::ShapeMismatch, "payload is " + std::to_string(bytes.size()) + " bytes, header implies " +
                                         std::to_string(count * sizeof(T)));
  }
  std::vector<T> v(count);
  if (count) std::memcpy(v.data(), bytes.data(), bytes.size());
  return v;
}

}  // namespace detail

/// Serialize to NPY bytes. Output depends only on shape, dtype and values.
inline std::string encode_npy(const DenseArray& arr) {
  std::string header = "{'descr': '" + std::string(dtype_descr(arr.dtype())) +
                       "', 'fortran_order': False, 'shape': " + detail::format_shape(arr.shape()) + ", }";
  const std::size_t preamble = detail::kNpyMagic.size() + 2 + 2;
  const std::size_t unpadded = preamble + header.size() + 1;
  const std::size_t total = (unpadded + detail::kNpyAlign - 1) / detail::kNpyAlign * detail::kNpyAlign;
  header.append(total - unpadded, ' ');
  header.push_back('\n');
  if (header.size() > 0xFFFF) throw Error(Errc::BadHeader, "header too long for NPY 1.0");

  std::string out;
  out.append(detail::kNpyMagic);
  out.push_back('\x01');
  out.push_back('\x00');
  out.push_back(static_cast<char>(header.size() & 0xFF));
  out.push_back(static_cast<char>((header.size() >> 8) & 0xFF));
  out += header;
  std::visit([&](const auto& v) { detail::append_payload(out, v); }, arr.storage());
  return out;
}

/// Parse NPY bytes. Float payloads are checked for NaN/Inf.
inline DenseArray decode_npy(std::string_view bytes) {
  if (bytes.size() < detail::kNpyMagic.size() || bytes.substr(0, detail::kNpyMagic.size()) != detail::kNpyMagic) {
    throw Error(Errc::BadMagic, "not an NPY tensor file");
  }
  if (bytes.size() < 10) throw Error(Errc::BadHeader, "truncated preamble");
  const auto major = static_cast<unsigned char>(bytes[6]);
  std::size_t header_len = 0;
  std::size_t header_start = 0;
  if (major == 1) {
    header_len = static_cast<unsigned char>(bytes[8]) | (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
    header_start = 10;
  } else if (major == 2 || major == 3) {
    if (bytes.size() < 12) throw Error(Errc::BadHeader, "truncated preamble");
    for (int i = 0; i < 4; ++i) {
      header_len |= static_cast<std::size_t>(static_cast<unsigned char>(bytes[8 + i])) << (8 * i);
    }
    header_start = 12;
  } else {
    throw Error(Errc::BadHeader, "unsupported NPY version " + std::to_string(major));
  }
  if (bytes.size() < header_start + header_len) throw Error(Errc::BadHeader, "header runs past end of file");

  const auto h = detail::HeaderParser(bytes.substr(header_start, header_len)).parse();
  if (h.fortran_order) throw Error(Errc::UnsupportedDtype, "fortran-ordered arrays are not supported");
  for (auto d : h.shape) {
    if (d == 0) throw Error(Errc::BadHeader, "zero-length dimension");
  }
  const std::size_t count =
      std::accumulate(h.shape.begin(), h.shape.end(), std::size_t{1}, std::multiplies<>());
  const auto payload = bytes.substr(header_start + header_len);

  if (h.descr == "<f4") {
    auto v = detail::read_payload<float>(payload, count);
    for (float x : v) {
      if (!std::isfinite(x)) throw Error(Errc::ValueOutOfRange, "non-finite value in float payload");
    }
    return DenseArray(h.shape, std::move(v));
  }
  if (h.descr == "|u1" || h.descr == "<u1") return DenseArray(h.shape, detail::read_payload<std::uint8_t>(payload, count));
  if (h.descr == "<i4") return DenseArray(h.shape, detail::read_payload<std::int32_t>(payload, count));
  throw Error(Errc::UnsupportedDtype, "dtype '" + h.descr + "'");
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::MissingFile, path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoFailure, "short write to " + path.string());
}

inline DenseArray read_dense_array(const std::filesystem::path& path) {
  try {
    return decode_npy(read_file_bytes(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

inline void write_dense_array(const std::filesystem::path& path, const DenseArray& arr) {
  write_file_bytes(path, encode_npy(arr));
}

}  // namespace coreg
