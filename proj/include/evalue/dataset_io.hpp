#pragma once

// On-disk dataset formats.
//
// EVDS (little-endian):
//   "EVDS" | u16 version=1 | u32 n | u32 d | u32 C | n*d f64 row-major
//   | n u32 labels | u8 tag length | tag bytes (UTF-8)
//
// CSV: header f0,...,f{d-1},label then one row per point.

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "evalue/dataset.hpp"
#include "evalue/error.hpp"

namespace evalue::datahub {

enum class Format { kEvds, kCsv };

inline constexpr std::array<std::uint8_t, 4> kEvdsMagic{0x45, 0x56, 0x44, 0x53};
inline constexpr std::uint16_t kEvdsVersion = 1;

namespace detail {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto bits = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(bits & 0xFF));
    bits = static_cast<U>(bits >> 8);
  }
}

template <typename T>
T get_le(const std::uint8_t* p) {
  std::make_unsigned_t<T> bits = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) bits = static_cast<decltype(bits)>((bits << 8) | p[i]);
  return static_cast<T>(bits);
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_evds(const EmbeddingDataset& data) {
  data.validate();
  if (data.domain_tag.size() > 255) {
    throw Error(ErrorCode::kInvalidArgument, "domain tag longer than 255 bytes");
  }
  std::vector<std::uint8_t> out(kEvdsMagic.begin(), kEvdsMagic.end());
  out.reserve(4 + 2 + 12 + data.features.data().size() * 8 + data.labels.size() * 4 + 1 +
              data.domain_tag.size());
  detail::put_le<std::uint16_t>(out, kEvdsVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.size()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.dim()));
  detail::put_le<std::uint32_t>(out, data.num_classes);
  for (double v : data.features.data()) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  for (Label y : data.labels) detail::put_le<std::uint32_t>(out, y);
  out.push_back(static_cast<std::uint8_t>(data.domain_tag.size()));
  out.insert(out.end(), data.domain_tag.begin(), data.domain_tag.end());
  return out;
}

inline EmbeddingDataset decode_evds(std::span<const std::uint8_t> bytes) {
  auto need = [&](std::size_t expected, const char* what) {
    if (bytes.size() < expected) {
      throw Error(ErrorCode::kTruncatedFile,
                  std::string(what) + ": expected at least " + std::to_string(expected) +
                      " bytes, got " + std::to_string(bytes.size()));
    }
  };
  if (bytes.size() < 4 || !std::equal(kEvdsMagic.begin(), kEvdsMagic.end(), bytes.begin())) {
    throw Error(ErrorCode::kBadMagic, "missing EVDS magic");
  }
  need(18, "header");
  const std::uint8_t* p = bytes.data();
  const auto version = detail::get_le<std::uint16_t>(p + 4);
  if (version != kEvdsVersion) {
    throw Error(ErrorCode::kUnsupportedVersion, "EVDS version " + std::to_string(version));
  }
  const auto n = detail::get_le<std::uint32_t>(p + 6);
  const auto d = detail::get_le<std::uint32_t>(p + 10);
  const auto c = detail::get_le<std::uint32_t>(p + 14);
  const std::size_t feature_bytes = std::size_t{n} * d * 8;
  const std::size_t label_bytes = std::size_t{n} * 4;
  std::size_t offset = 18;
  need(offset + feature_bytes + label_bytes + 1, "payload");
  EmbeddingDataset data;
  data.num_classes = c;
  data.features = Matrix(n, d);
  auto values = data.features.data();
  for (std::size_t i = 0; i < values.size(); ++i, offset += 8) {
    values[i] = std::bit_cast<double>(detail::get_le<std::uint64_t>(p + offset));
  }
  data.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i, offset += 4) {
    data.labels[i] = detail::get_le<std::uint32_t>(p + offset);
    if (data.labels[i] >= c) {
      throw Error(ErrorCode::kLabelOutOfRange,
                  "label " + std::to_string(data.labels[i]) + " at row " + std::to_string(i) +
                      " with C=" + std::to_string(c));
    }
  }
  const std::size_t tag_len = p[offset++];
  need(offset + tag_len, "domain tag");
  data.domain_tag.assign(reinterpret_cast<const char*>(p + offset), tag_len);
  return data;
}

inline std::string encode_csv(const EmbeddingDataset& data) {
  data.validate();
  std::string out;
  for (std::size_t j = 0; j < data.dim(); ++j) out += "f" + std::to_string(j) + ",";
  out += "label\n";
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.features.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g,", v);
      out += buf;
    }
    out += std::to_string(data.labels[i]);
    out += '\n';
  }
  return out;
}

inline EmbeddingDataset decode_csv(std::string_view text, std::string domain_tag = {}) {
  auto split = [](std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return cells;
  };
  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start < text.size();) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    start = end + 1;
  }
  if (lines.empty()) throw Error(ErrorCode::kParse, "CSV has no header");
  const auto header = split(lines.front());
  if (header.size() < 2 || header.back() != "label") {
    throw Error(ErrorCode::kParse, "CSV header must be f0,...,f{d-1},label");
  }
  const std::size_t d = header.size() - 1;
  const std::size_t n = lines.size() - 1;
  EmbeddingDataset data;
  data.domain_tag = std::move(domain_tag);
  data.features = Matrix(n, d);
  data.labels.resize(n);
  std::uint32_t max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto cells = split(lines[i + 1]);
    if (cells.size() != d + 1) {
      throw Error(ErrorCode::kRaggedRows,
                  "row " + std::to_string(i) + " has " + std::to_string(cells.size()) +
                      " cells, header has " + std::to_string(d + 1));
    }
    for (std::size_t j = 0; j < d; ++j) {
      const auto cell = cells[j];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw Error(ErrorCode::kParse, "bad number '" + std::string(cell) + "' at row " +
                                           std::to_string(i));
      }
      data.features(i, j) = v;
    }
    const auto cell = cells[d];
    long long label = 0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), label);
    if (ec != std::errc() || ptr != cell.data() + cell.size()) {
      throw Error(ErrorCode::kParse, "bad label '" + std::string(cell) + "' at row " +
                                         std::to_string(i));
    }
    if (label < 0 || label > 0xFFFFFFFELL) {
      throw Error(ErrorCode::kLabelOutOfRange,
                  "label " + std::to_string(label) + " at row " + std::to_string(i));
    }
    data.labels[i] = static_cast<Label>(label);
    max_label = std::max(max_label, data.labels[i]);
  }
  data.num_classes = n == 0 ? 0 : max_label + 1;
  return data;
}

// Format from the file contents: EVDS when the magic is present, CSV otherwise.
inline Format sniff_format(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 4 && std::equal(kEvdsMagic.begin(), kEvdsMagic.end(), bytes.begin())
             ? Format::kEvds
             : Format::kCsv;
}

inline Format format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? Format::kCsv : Format::kEvds;
}

inline EmbeddingDataset load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kIo, "no such file: " + path.string());
  }
  const auto bytes = detail::read_file(path);
  if (sniff_format(bytes) == Format::kEvds) return decode_evds(bytes);
  if (path.extension() == ".evds") throw Error(ErrorCode::kBadMagic, path.string());
  return decode_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                    path.stem().string());
}

inline void save(const EmbeddingDataset& data, const std::filesystem::path& path, Format format) {
  if (format == Format::kEvds) {
    const auto bytes = encode_evds(data);
    detail::write_file(path, {reinterpret_cast<const char*>(bytes.data()), bytes.size()});
  } else {
    detail::write_file(path, encode_csv(data));
  }
}

inline void save(const EmbeddingDataset& data, const std::filesystem::path& path) {
  save(data, path, format_for_path(path));
}

}  // namespace evalue::datahub
