#pragma once

#include <cctype>
#include <string>

namespace preferthinker {

inline std::string lower_ascii(const std::string& s) {
    std::string out = s;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Whole-phrase occurrence: the characters adjacent to the match must not be
// alphanumeric, so "realism" does not count inside "surrealism". Both inputs
// are expected lowercase.
inline bool mentions_phrase(const std::string& text_lower, const std::string& phrase) {
    if (phrase.empty()) return false;
    size_t pos = 0;
    while ((pos = text_lower.find(phrase, pos)) != std::string::npos) {
        bool left_ok = pos == 0 || !is_word_char(text_lower[pos - 1]);
        size_t end = pos + phrase.size();
        bool right_ok = end >= text_lower.size() || !is_word_char(text_lower[end]);
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

}  // namespace preferthinker
