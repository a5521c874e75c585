#include "reentry/aux_encoding.hpp"

#include <map>

namespace reentry {

std::vector<AuxEncoding> encode_aux(const std::vector<Turn>& context, const std::string& target_user) {
  std::map<std::string, int> rank;
  for (const auto& t : context) rank.try_emplace(t.author, static_cast<int>(rank.size()) + 1);
  const double n = static_cast<double>(context.size());
  const double participants = static_cast<double>(rank.size());
  std::vector<AuxEncoding> out;
  out.reserve(context.size());
  for (const auto& t : context) {
    out.push_back({static_cast<double>(t.index) / n, static_cast<double>(t.reply_to) / n,
                   static_cast<double>(rank.at(t.author)) / participants,
                   t.author == target_user ? 1.0 : 0.0});
  }
  return out;
}

}  // namespace reentry
