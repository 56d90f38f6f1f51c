#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ganblend {

std::string base64_encode(std::span<const std::uint8_t> bytes);

// Accepts an optional "data:...;base64," prefix and ignores whitespace.
// Throws Error(Format) on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace ganblend
