#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "celltraffic/errors.hpp"
#include "celltraffic/io.hpp"
#include "celltraffic/linalg.hpp"

namespace celltraffic::nn {

struct NamedMatrix {
  std::string name;
  Matrix value;
};

// Layout: 8-byte magic "CTCKPT01", u64 LE header length, JSON header
// {"params":[{"name","shape":[rows,cols]}...]}, then each parameter's
// payload as row-major little-endian doubles in header order.
inline constexpr std::string_view kCheckpointMagic = "CTCKPT01";

inline std::string encode_checkpoint(const std::vector<NamedMatrix>& params) {
  nlohmann::ordered_json header;
  header["params"] = nlohmann::ordered_json::array();
  for (const auto& p : params)
    header["params"].push_back({{"name", p.name}, {"shape", {p.value.rows(), p.value.cols()}}});
  const std::string h = header.dump();

  std::string out(kCheckpointMagic);
  io::append_u64_le(out, h.size());
  out += h;
  for (const auto& p : params)
    for (Index i = 0; i < p.value.rows(); ++i)
      for (Index j = 0; j < p.value.cols(); ++j) io::append_f64_le(out, p.value(i, j));
  return out;
}

inline std::vector<NamedMatrix> decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 16 || bytes.substr(0, 8) != kCheckpointMagic) throw IoError("not a checkpoint file");
  const auto hlen = io::read_u64_le(bytes, 8);
  if (16 + hlen > bytes.size()) throw IoError("truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad checkpoint header: ") + e.what());
  }
  std::vector<NamedMatrix> out;
  std::size_t off = 16 + hlen;
  for (const auto& entry : header.at("params")) {
    const auto rows = entry.at("shape").at(0).get<Index>();
    const auto cols = entry.at("shape").at(1).get<Index>();
    if (off + static_cast<std::size_t>(rows * cols) * 8 > bytes.size()) throw IoError("truncated checkpoint payload");
    NamedMatrix nm{entry.at("name").get<std::string>(), Matrix(rows, cols)};
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j, off += 8) nm.value(i, j) = io::read_f64_le(bytes, off);
    out.push_back(std::move(nm));
  }
  if (off != bytes.size()) throw IoError("trailing bytes in checkpoint");
  return out;
}

inline void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedMatrix>& params) {
  io::write_file_atomic(path, encode_checkpoint(params));
}

inline std::vector<NamedMatrix> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path));
}

}  // namespace celltraffic::nn
