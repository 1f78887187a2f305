#ifndef ICDA_TEXT_HPP
#define ICDA_TEXT_HPP

#include <string>
#include <string_view>
#include <vector>

namespace icda {

// Lowercases ASCII letters; bytes >= 0x80 pass through untouched.
inline std::string to_lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) {
    out.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
  }
  return out;
}

inline std::string trim(std::string_view s) {
  size_t begin = 0;
  size_t end = s.size();
  auto is_space = [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  };
  while (begin < end && is_space(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && is_space(static_cast<unsigned char>(s[end - 1]))) --end;
  return std::string(s.substr(begin, end - begin));
}

// Tokens are maximal runs of alphanumerics (non-ASCII bytes count as letters);
// everything else is a boundary. Shared by the classifier and the diversity
// metrics so both sides see the same token stream.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    bool word_char = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                     (c >= '0' && c <= '9') || c >= 0x80;
    if (word_char) {
      current.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a')
                                               : static_cast<char>(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

}  // namespace icda

#endif  // ICDA_TEXT_HPP
