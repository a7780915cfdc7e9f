#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace veriq {

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Splits text into sentences. A sentence ends at a run of '.', '!' or '?'
// followed by whitespace or end-of-string; the terminators stay attached.
// Text with no terminator yields a single sentence; empty text yields none.
inline std::vector<std::string> segment_sentences(std::string_view text) {
    std::vector<std::string> out;
    size_t start = 0;
    size_t i = 0;
    auto is_term = [](char c) { return c == '.' || c == '!' || c == '?'; };
    while (i < text.size()) {
        if (is_term(text[i])) {
            size_t j = i;
            while (j + 1 < text.size() && is_term(text[j + 1])) ++j;
            if (j + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[j + 1]))) {
                std::string sent = trim(text.substr(start, j + 1 - start));
                if (!sent.empty()) out.push_back(std::move(sent));
                start = j + 1;
            }
            i = j + 1;
        } else {
            ++i;
        }
    }
    if (start < text.size()) {
        std::string tail = trim(text.substr(start));
        if (!tail.empty()) out.push_back(std::move(tail));
    }
    return out;
}

inline bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

// Lower-cased alphanumeric token stream; everything else is a separator.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (is_word_char(c)) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

// Case-insensitive whole-word occurrence test. A keyword may itself be a
// phrase; word boundaries are required at both ends of the match.
inline bool contains_whole_word(std::string_view text, std::string_view keyword) {
    if (keyword.empty()) return false;
    std::string hay = to_lower(text);
    std::string needle = to_lower(keyword);
    size_t pos = 0;
    while ((pos = hay.find(needle, pos)) != std::string::npos) {
        bool left_ok = pos == 0 || !is_word_char(hay[pos - 1]);
        size_t end = pos + needle.size();
        bool right_ok = end == hay.size() || !is_word_char(hay[end]);
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

inline bool contains_ci(std::string_view text, std::string_view needle) {
    if (needle.empty()) return false;
    return to_lower(text).find(to_lower(needle)) != std::string::npos;
}

}  // namespace veriq
