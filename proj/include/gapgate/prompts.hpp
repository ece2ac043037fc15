#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace gapgate::prompts {

// Bumped whenever an asset under assets/prompts changes meaning.
inline constexpr int kAssetVersion = 1;

// Prompt text assets compiled into the library, keyed by file stem
// ("baseline_system", "agent_verify", ...). Throws for unknown names.
std::string_view asset(std::string_view name);
std::vector<std::string> asset_names();
// sha256 of every asset, recorded in each trace.
std::map<std::string, std::string> asset_hashes();

using Slots = std::map<std::string, std::string>;

// Replaces every "{{name}}" with slots[name]. Unknown slot names are left
// untouched so a missing value is visible in the rendered prompt.
std::string render(std::string_view tmpl, const Slots& slots);

}  // namespace gapgate::prompts
