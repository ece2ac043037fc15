#include "gapgate/prompts.hpp"

#include "gapgate/error.hpp"
#include "gapgate/text.hpp"

namespace gapgate::prompts {
namespace detail {
const std::map<std::string, std::string_view, std::less<>>& embedded_assets();
}

std::string_view asset(std::string_view name) {
  const auto& assets = detail::embedded_assets();
  const auto it = assets.find(name);
  if (it == assets.end()) {
    throw Error(ErrorCode::InvalidConfig, "unknown prompt asset '" + std::string(name) + "'");
  }
  return it->second;
}

std::vector<std::string> asset_names() {
  std::vector<std::string> out;
  for (const auto& [name, _] : detail::embedded_assets()) out.push_back(name);
  return out;
}

std::map<std::string, std::string> asset_hashes() {
  std::map<std::string, std::string> out;
  for (const auto& [name, content] : detail::embedded_assets()) out[name] = text::sha256_hex(content);
  return out;
}

std::string render(std::string_view tmpl, const Slots& slots) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    out.append(tmpl.substr(pos, open - pos));
    const std::string key(tmpl.substr(open + 2, close - open - 2));
    if (const auto it = slots.find(key); it != slots.end()) {
      out += it->second;
    } else {
      out.append(tmpl.substr(open, close + 2 - open));
    }
    pos = close + 2;
  }
  out.append(tmpl.substr(pos));
  return out;
}

}  // namespace gapgate::prompts
