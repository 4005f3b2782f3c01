#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace beliefcast::prompts {

// Every rendered prompt starts with a "Task: <name>" line followed by
// "## <Section>" blocks. The mock client dispatches on these markers.
inline constexpr std::string_view kTaskPrefix = "Task: ";
inline constexpr std::string_view kPersonaTask = "latent-persona";
inline constexpr std::string_view kSocialTask = "social-context";
inline constexpr std::string_view kPredictionTask = "response-prediction";

inline constexpr std::string_view kProfileSection = "Profile";
inline constexpr std::string_view kPostsSection = "Recent posts";
inline constexpr std::string_view kPersonaSection = "Latent persona";
inline constexpr std::string_view kSocialSection = "Social context";
inline constexpr std::string_view kNeighborsSection = "Neighbor personas";
inline constexpr std::string_view kHeadlineSection = "Headline";
inline constexpr std::string_view kFormatSection = "Output format";

inline constexpr std::string_view kNoProfile = "(no profile available)";
inline constexpr std::string_view kNoPosts = "(no posts available)";

/// Task name of a rendered prompt, or empty.
std::string_view task_of(std::string_view prompt);

/// Body of section `name` (text between its header and the next header),
/// or empty when the section is absent.
std::string_view section(std::string_view prompt, std::string_view name);

}  // namespace beliefcast::prompts
