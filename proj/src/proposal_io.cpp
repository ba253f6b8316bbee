#include "wsod/proposal_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "wsod/error.hpp"

namespace wsod {

namespace {

constexpr std::array<char, 8> kMagic{'W', 'S', 'O', 'D', 'P', 'R', 'P', '1'};

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

template <class T>
void put(std::ofstream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError(path.string() + ": truncated proposal file");
  return to_little(v);
}

}  // namespace

void write_proposal_file(const std::filesystem::path& path, const ProposalSet& p) {
  if (p.features.rows != p.boxes.size()) throw ShapeMismatch("write_proposal_file: feature rows != boxes");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kProposalFileVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(p.boxes.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(p.features.cols));
  put<std::uint32_t>(out, 4);
  for (const auto& b : p.boxes)
    for (const double v : {b.x1, b.y1, b.x2, b.y2}) put<double>(out, v);
  for (const double v : p.features.data) put<double>(out, v);
}

ProposalSet read_proposal_file(const std::filesystem::path& path, std::string image_id) {
  if (!std::filesystem::exists(path)) throw MissingProposalFile("proposal file not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingProposalFile("cannot open proposal file " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ParseError(path.string() + ": bad magic bytes");
  const auto version = get<std::uint32_t>(in, path);
  if (version != kProposalFileVersion)
    throw ParseError(path.string() + ": unsupported version " + std::to_string(version));
  const auto m = get<std::uint32_t>(in, path);
  const auto d = get<std::uint32_t>(in, path);
  const auto ncoord = get<std::uint32_t>(in, path);
  if (ncoord != 4) throw ParseError(path.string() + ": expected 4 box columns");
  ProposalSet p;
  p.image_id = std::move(image_id);
  p.boxes.resize(m);
  for (auto& b : p.boxes) {
    b.x1 = get<double>(in, path);
    b.y1 = get<double>(in, path);
    b.x2 = get<double>(in, path);
    b.y2 = get<double>(in, path);
  }
  p.features = Matrix(m, d);
  for (double& v : p.features.data) v = get<double>(in, path);
  return p;
}

}  // namespace wsod
