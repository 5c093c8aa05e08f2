#include "pinneig/snapshot.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace pinneig {
namespace {

static_assert(std::numeric_limits<double>::is_iec559, "snapshots assume IEEE-754 doubles");

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void append_le(std::string& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int k = 0; k < 8; ++k) {
    out.push_back(static_cast<char>(bits & 0xffu));
    bits >>= 8;
  }
}

double read_le(const char* p) {
  std::uint64_t bits = 0;
  for (int k = 7; k >= 0; --k) bits = (bits << 8) | static_cast<unsigned char>(p[k]);
  return std::bit_cast<double>(bits);
}

}  // namespace

std::string encode_snapshot(const MlpParams& params, std::uint64_t seed) {
  const auto w = params.shape().widths();
  nlohmann::json header = {{"format", "pinneig-mlp"},
                           {"version", kSnapshotVersion},
                           {"widths", {w[0], w[1], w[2], w[3]}},
                           {"seed", seed},
                           {"count", params.flat().size()}};
  std::string out = header.dump() + "\n";
  out.reserve(out.size() + 8 * static_cast<std::size_t>(params.flat().size()));
  for (Eigen::Index k = 0; k < params.flat().size(); ++k) append_le(out, params.flat()[k]);
  return out;
}

Snapshot decode_snapshot(const std::string& bytes) {
  const auto eol = bytes.find('\n');
  if (eol == std::string::npos) throw std::runtime_error("snapshot has no header line");
  const auto header = nlohmann::json::parse(bytes.substr(0, eol));
  if (header.at("format") != "pinneig-mlp" || header.at("version") != kSnapshotVersion) {
    throw std::runtime_error("unsupported snapshot format");
  }
  const auto widths = header.at("widths").get<std::vector<int>>();
  const NetShape shape = shape_from_widths(widths);
  const auto count = header.at("count").get<Eigen::Index>();
  if (count != shape.parameter_count() || bytes.size() - eol - 1 != static_cast<std::size_t>(count) * 8) {
    throw std::runtime_error("snapshot payload size does not match its header");
  }
  Eigen::VectorXd flat(count);
  const char* p = bytes.data() + eol + 1;
  for (Eigen::Index k = 0; k < count; ++k) flat[k] = read_le(p + 8 * k);
  return {MlpParams(shape, std::move(flat)), header.at("seed").get<std::uint64_t>()};
}

std::string snapshot_id(const MlpParams& params, std::uint64_t seed) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << fnv1a64(encode_snapshot(params, seed));
  return os.str();
}

std::string write_snapshot(const std::filesystem::path& dir, const MlpParams& params, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  const std::string name = snapshot_id(params, seed) + ".snap";
  const auto path = dir / name;
  if (!std::filesystem::exists(path)) write_file_atomic(path, encode_snapshot(params, seed));
  return name;
}

Snapshot read_snapshot(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("snapshot not found: " + path.string());
  try {
    return decode_snapshot(read_file(path));
  } catch (const std::exception& e) {
    throw std::runtime_error("cannot read snapshot " + path.string() + ": " + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace pinneig
