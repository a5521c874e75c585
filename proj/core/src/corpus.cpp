#include "reentry/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <cctype>
#include <tuple>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "reentry/errors.hpp"
#include "reentry/random.hpp"

namespace reentry {

using nlohmann::json;

void validate(const Conversation& c) {
  auto fail = [&](const std::string& why) {
    throw ValidationError("conversation '" + c.id + "': " + why);
  };
  if (c.id.empty()) throw ValidationError("conversation with empty id");
  if (c.turns.size() < 2) fail("needs at least 2 turns");
  for (std::size_t i = 0; i < c.turns.size(); ++i) {
    const Turn& t = c.turns[i];
    const std::string where = "turn " + std::to_string(i + 1);
    if (t.index != static_cast<int>(i + 1)) fail(where + ": index must be " + std::to_string(i + 1));
    if (t.reply_to < 0 || t.reply_to >= t.index) fail(where + ": reply_to must be in [0, index)");
    if (t.tokens.empty()) fail(where + ": empty token list");
    if (t.author.empty()) fail(where + ": empty author");
    if (i > 0 && t.time < c.turns[i - 1].time) fail(where + ": time decreases");
  }
}

Corpus make_corpus(std::vector<Conversation> conversations) {
  Corpus corpus;
  for (const auto& c : conversations) {
    for (const auto& t : c.turns) corpus.messages.push_back({t.author, t.tokens, t.time, c.id});
  }
  std::stable_sort(corpus.messages.begin(), corpus.messages.end(),
                   [](const Message& a, const Message& b) {
                     return std::tie(a.author, a.time) < std::tie(b.author, b.time);
                   });
  corpus.conversations = std::move(conversations);
  return corpus;
}

std::vector<Message> Corpus::history_of(const std::string& author, std::int64_t cutoff,
                                        const std::string& exclude_conversation) const {
  auto lo = std::lower_bound(messages.begin(), messages.end(), author,
                             [](const Message& m, const std::string& a) { return m.author < a; });
  std::vector<Message> out;
  for (auto it = lo; it != messages.end() && it->author == author && it->time < cutoff; ++it) {
    if (it->conversation_id != exclude_conversation) out.push_back(*it);
  }
  return out;
}

namespace {

template <typename T>
T field(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(std::string("missing field '") + key + "'", line);
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("field '") + key + "' has the wrong type", line);
  }
}

}  // namespace

Conversation conversation_from_json(const json& obj, std::size_t line) {
  Conversation c;
  c.id = field<std::string>(obj, "id", line);
  auto turns = obj.find("turns");
  if (turns == obj.end() || !turns->is_array()) throw ParseError("missing array 'turns'", line);
  for (const auto& t : *turns) {
    if (!t.is_object()) throw ParseError("turn is not an object", line);
    Turn turn;
    turn.index = field<int>(t, "index", line);
    turn.reply_to = field<int>(t, "reply_to", line);
    turn.author = field<std::string>(t, "author", line);
    turn.time = field<std::int64_t>(t, "time", line);
    turn.tokens = field<std::vector<std::string>>(t, "tokens", line);
    c.turns.push_back(std::move(turn));
  }
  return c;
}

Corpus parse_corpus(std::istream& in) {
  std::vector<Conversation> conversations;
  std::set<std::string> seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (std::all_of(text.begin(), text.end(), [](unsigned char ch) { return std::isspace(ch); }))
      continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line);
    }
    if (!obj.is_object()) throw ParseError("expected a JSON object", line);
    if (auto f = obj.find("format"); f != obj.end()) {
      if (!f->is_number_integer() || f->get<int>() != kCorpusFormat)
        throw ParseError("unsupported format version", line);
      if (!obj.contains("id")) continue;  // header line
    }
    Conversation c = conversation_from_json(obj, line);
    validate(c);
    if (!seen.insert(c.id).second) throw ValidationError("conversation '" + c.id + "': duplicate id");
    conversations.push_back(std::move(c));
  }
  return make_corpus(std::move(conversations));
}

Corpus parse_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file " + path.string());
  return parse_corpus(in);
}

void write_corpus(std::ostream& out, const std::vector<Conversation>& conversations) {
  for (const auto& c : conversations) {
    json turns = json::array();
    for (const auto& t : c.turns) {
      turns.push_back({{"index", t.index},
                       {"reply_to", t.reply_to},
                       {"author", t.author},
                       {"time", t.time},
                       {"tokens", t.tokens}});
    }
    json obj = {{"format", kCorpusFormat}, {"id", c.id}, {"turns", std::move(turns)}};
    out << obj.dump() << '\n';
  }
}

namespace {

Instance make_instance(const Corpus& corpus, const Conversation& conv, const std::string& user,
                       const std::vector<std::size_t>& positions, int k) {
  const std::size_t last = positions[static_cast<std::size_t>(k - 1)];
  Instance inst;
  inst.conversation_id = conv.id;
  inst.target_user = user;
  inst.entry_order = k;
  inst.context.assign(conv.turns.begin(), conv.turns.begin() + static_cast<std::ptrdiff_t>(last + 1));
  inst.label = positions.size() > static_cast<std::size_t>(k) ? 1 : 0;
  inst.history = corpus.history_of(user, inst.context.back().time, conv.id);
  return inst;
}

}  // namespace

std::vector<Instance> build_instances(const Corpus& corpus, int k) {
  if (k < 1) throw std::invalid_argument("entry order k must be >= 1");
  std::vector<Instance> out;
  for (const auto& conv : corpus.conversations) {
    std::vector<std::string> users;
    std::map<std::string, std::vector<std::size_t>> entries;
    for (std::size_t i = 0; i < conv.turns.size(); ++i) {
      auto& pos = entries[conv.turns[i].author];
      if (pos.empty()) users.push_back(conv.turns[i].author);
      pos.push_back(i);
    }
    for (const auto& user : users) {
      const auto& pos = entries[user];
      if (pos.size() < static_cast<std::size_t>(k)) continue;
      out.push_back(make_instance(corpus, conv, user, pos, k));
    }
  }
  return out;
}

std::optional<Instance> instance_for(const Corpus& corpus, const std::string& conversation_id,
                                     const std::string& user, int k) {
  if (k < 1) throw std::invalid_argument("entry order k must be >= 1");
  auto conv = std::find_if(corpus.conversations.begin(), corpus.conversations.end(),
                           [&](const Conversation& c) { return c.id == conversation_id; });
  if (conv == corpus.conversations.end()) return std::nullopt;
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < conv->turns.size(); ++i) {
    if (conv->turns[i].author == user) pos.push_back(i);
  }
  if (pos.size() < static_cast<std::size_t>(k)) return std::nullopt;
  return make_instance(corpus, *conv, user, pos, k);
}

std::vector<std::string> conversation_ids(const Corpus& corpus) {
  std::vector<std::string> ids;
  ids.reserve(corpus.conversations.size());
  for (const auto& c : corpus.conversations) ids.push_back(c.id);
  return ids;
}

std::map<std::string, std::string> Split::assignment() const {
  std::map<std::string, std::string> out;
  for (const auto& id : train) out[id] = "train";
  for (const auto& id : dev) out[id] = "dev";
  for (const auto& id : test) out[id] = "test";
  return out;
}

std::uint64_t Split::hash() const {
  std::string buffer;
  for (const auto& [id, part] : assignment()) {
    buffer += id;
    buffer += '\t';
    buffer += part;
    buffer += '\n';
  }
  return fnv1a(buffer);
}

Split split_conversations(const std::vector<std::string>& ids, std::array<double, 3> ratios,
                          std::uint64_t seed) {
  for (double r : ratios) {
    if (r < 0.0) throw std::invalid_argument("split ratios must be non-negative");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must sum to 1");
  }
  std::vector<std::string> order = ids;
  Rng rng(seed);
  rng.shuffle(order);

  const std::size_t n = order.size();
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double quota = ratios[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(quota));
    frac[i] = quota - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::array<std::size_t, 3> rank = {0, 1, 2};
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t r = 0; assigned < n; r = (r + 1) % 3, ++assigned) ++counts[rank[r]];

  Split split;
  auto it = order.begin();
  split.train.assign(it, it + static_cast<std::ptrdiff_t>(counts[0]));
  it += static_cast<std::ptrdiff_t>(counts[0]);
  split.dev.assign(it, it + static_cast<std::ptrdiff_t>(counts[1]));
  it += static_cast<std::ptrdiff_t>(counts[1]);
  split.test.assign(it, order.end());
  return split;
}

InstanceSplit partition(const std::vector<Instance>& instances, const Split& split) {
  const auto where = split.assignment();
  InstanceSplit out;
  for (const auto& inst : instances) {
    auto it = where.find(inst.conversation_id);
    if (it == where.end()) continue;
    if (it->second == "train") out.train.push_back(inst);
    else if (it->second == "dev") out.dev.push_back(inst);
    else out.test.push_back(inst);
  }
  return out;
}

void write_instances(std::ostream& out, const std::vector<Instance>& instances,
                     const std::map<std::string, std::string>& split_of) {
  for (const auto& inst : instances) {
    json obj = {{"format", kCorpusFormat},
                {"conversation_id", inst.conversation_id},
                {"target_user", inst.target_user},
                {"k", inst.entry_order},
                {"label", inst.label}};
    if (auto it = split_of.find(inst.conversation_id); it != split_of.end()) obj["split"] = it->second;
    out << obj.dump() << '\n';
  }
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return fnv1a(buffer.str());
}

std::string hex64(std::uint64_t value) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << value;
  return out.str();
}

}  // namespace reentry
