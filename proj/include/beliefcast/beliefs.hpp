#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace beliefcast {

/// The closed belief vocabulary: ten basic human values followed by the ten
/// moral-foundation poles. The enumerator value is the belief's index.
enum class Belief : std::uint8_t {
  Conformity,
  Tradition,
  Security,
  Power,
  Achievement,
  Hedonism,
  Stimulation,
  SelfDirection,
  Universalism,
  Benevolence,
  Care,
  Harm,
  Fairness,
  Cheating,
  Loyalty,
  Betrayal,
  Authority,
  Subversion,
  Purity,
  Degradation,
};

inline constexpr int kBeliefCount = 20;

enum class BeliefFamily : std::uint8_t { HumanValue, MoralValue };

std::string_view to_string(Belief b);
BeliefFamily family(Belief b);
const std::array<Belief, kBeliefCount>& all_beliefs();

/// Case-insensitive lookup that treats '-', ' ' and '_' alike, so
/// "Self-Direction" and "self_direction" both resolve.
std::optional<Belief> parse_belief(std::string_view token);

/// Single-word spelling used in generated text ("self_direction" becomes
/// "selfdirection").
std::string keyword(Belief b);

/// Headline stance tokens such as "procare2" or "antipower1". Stances with
/// magnitude below 0.2 have no token; 0.2-0.6 is level 1, above is level 2.
std::optional<std::string> stance_token(Belief b, double stance);
/// Inverse of stance_token, decoding level 1 as 0.4 and level 2 as 0.8.
std::optional<std::pair<Belief, double>> parse_stance_token(std::string_view token);

}  // namespace beliefcast
