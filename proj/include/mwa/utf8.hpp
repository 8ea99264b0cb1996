#pragma once

#include <string>
#include <string_view>

namespace mwa::utf8 {

/// Strict decoder: rejects overlong forms, surrogates and truncated
/// sequences with InputError naming the byte offset.
std::u32string decode(std::string_view bytes);
std::string encode(std::u32string_view chars);
std::string encode(char32_t c);
bool valid(std::string_view bytes);

}  // namespace mwa::utf8
