#pragma once

// Per-image proposal/feature file, little-endian:
//
//   magic   8 bytes  "WSODPRP1"
//   version u32      1
//   m       u32      number of proposals
//   d       u32      feature dimension
//   ncoord  u32      4 (x1, y1, x2, y2)
//   boxes   m * 4 f64
//   feats   m * d f64, row-major

#include <filesystem>

#include "wsod/mil.hpp"

namespace wsod {

inline constexpr std::uint32_t kProposalFileVersion = 1;

void write_proposal_file(const std::filesystem::path& path, const ProposalSet& proposals);
// Throws MissingProposalFile when absent, ParseError when malformed.
ProposalSet read_proposal_file(const std::filesystem::path& path, std::string image_id = {});

}  // namespace wsod
