#pragma once

#include <array>
#include <string>
#include <vector>

#include "reentry/corpus.hpp"

namespace reentry {

// Per-turn metadata scaled into [0, 1]:
//   [ index / |c|, reply_to / |c|, participant_rank / participants, is_target ]
// participant_rank is 1-based in order of first appearance within the context.
using AuxEncoding = std::array<double, 4>;

std::vector<AuxEncoding> encode_aux(const std::vector<Turn>& context, const std::string& target_user);

}  // namespace reentry
