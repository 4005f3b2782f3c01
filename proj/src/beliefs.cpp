#include "beliefcast/beliefs.hpp"

#include <cctype>
#include <string>

namespace beliefcast {

namespace {

constexpr std::array<std::string_view, kBeliefCount> kNames = {
    "conformity", "tradition",   "security", "power",    "achievement",
    "hedonism",   "stimulation", "self_direction", "universalism", "benevolence",
    "care",       "harm",        "fairness", "cheating", "loyalty",
    "betrayal",   "authority",   "subversion", "purity", "degradation",
};

constexpr std::array<Belief, kBeliefCount> make_all() {
  std::array<Belief, kBeliefCount> out{};
  for (int i = 0; i < kBeliefCount; ++i) out[i] = static_cast<Belief>(i);
  return out;
}

constexpr std::array<Belief, kBeliefCount> kAll = make_all();

}  // namespace

std::string_view to_string(Belief b) { return kNames[static_cast<int>(b)]; }

BeliefFamily family(Belief b) {
  return static_cast<int>(b) < 10 ? BeliefFamily::HumanValue : BeliefFamily::MoralValue;
}

const std::array<Belief, kBeliefCount>& all_beliefs() { return kAll; }

std::optional<Belief> parse_belief(std::string_view token) {
  std::string norm;
  bool pending_sep = false;
  for (char c : token) {
    const auto uc = static_cast<unsigned char>(c);
    if (c == '-' || c == '_' || std::isspace(uc)) {
      pending_sep = !norm.empty();
      continue;
    }
    if (pending_sep) norm.push_back('_');
    pending_sep = false;
    norm.push_back(static_cast<char>(std::tolower(uc)));
  }
  if (norm == "selfdirection") norm = "self_direction";
  for (int i = 0; i < kBeliefCount; ++i)
    if (kNames[i] == norm) return static_cast<Belief>(i);
  return std::nullopt;
}

std::string keyword(Belief b) {
  std::string out;
  for (char c : to_string(b))
    if (c != '_') out.push_back(c);
  return out;
}

std::optional<std::string> stance_token(Belief b, double stance) {
  const double mag = stance < 0 ? -stance : stance;
  if (mag < 0.2) return std::nullopt;
  return std::string(stance < 0 ? "anti" : "pro") + keyword(b) + (mag < 0.6 ? "1" : "2");
}

std::optional<std::pair<Belief, double>> parse_stance_token(std::string_view token) {
  double sign;
  if (token.rfind("pro", 0) == 0) {
    sign = 1.0;
    token.remove_prefix(3);
  } else if (token.rfind("anti", 0) == 0) {
    sign = -1.0;
    token.remove_prefix(4);
  } else {
    return std::nullopt;
  }
  if (token.size() < 2) return std::nullopt;
  const char level = token.back();
  if (level != '1' && level != '2') return std::nullopt;
  token.remove_suffix(1);
  for (Belief b : all_beliefs())
    if (keyword(b) == token) return std::pair{b, sign * (level == '1' ? 0.4 : 0.8)};
  return std::nullopt;
}

}  // namespace beliefcast
