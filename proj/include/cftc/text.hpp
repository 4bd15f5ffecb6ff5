#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cftc {

// Lowercase + split on anything that is not a letter, digit, or non-ASCII
// byte (UTF-8 continuation bytes stay inside their word).
std::vector<std::string> tokenize(std::string_view text);

}  // namespace cftc
