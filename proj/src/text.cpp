#include "ueval/text.hpp"

#include "ueval/error.hpp"

#include <algorithm>
#include <cctype>
#include <vector>

namespace ueval {

namespace {

bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string fold_case(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        if (c < 0x80) {
            out.push_back(static_cast<char>(std::tolower(c)));
            continue;
        }
        // Latin-1 supplement: 0xC3 0x80..0x9E encodes U+00C0..U+00DE; its
        // lower-case form lives 0x20 higher, except U+00D7 (multiplication).
        if (c == 0xC3 && i + 1 < s.size()) {
            unsigned char c2 = static_cast<unsigned char>(s[i + 1]);
            if (c2 >= 0x80 && c2 <= 0x9E && c2 != 0x97) {
                out.push_back(static_cast<char>(0xC3));
                out.push_back(static_cast<char>(c2 + 0x20));
                ++i;
                continue;
            }
        }
        out.push_back(static_cast<char>(c));
    }
    return out;
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_run = false;
    for (char ch : s) {
        if (is_space(static_cast<unsigned char>(ch))) {
            in_run = true;
            continue;
        }
        if (in_run && !out.empty()) out.push_back(' ');
        in_run = false;
        out.push_back(ch);
    }
    return out;
}

std::string normalize_concept(std::string_view raw) {
    std::string trimmed = trim(raw);
    if (trimmed.empty()) throw SchemaError("invalid candidate: empty after trimming");
    return fold_case(collapse_whitespace(trimmed));
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
    const std::size_t na = a.size();
    const std::size_t nb = b.size();
    if (na == 0) return nb;
    if (nb == 0) return na;
    std::vector<std::size_t> prev(nb + 1);
    std::vector<std::size_t> cur(nb + 1);
    for (std::size_t j = 0; j <= nb; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= na; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= nb; ++j) {
            const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost});
        }
        prev.swap(cur);
    }
    return prev[nb];
}

bool contains_folded(std::string_view haystack, std::string_view needle) {
    return fold_case(haystack).find(fold_case(needle)) != std::string::npos;
}

std::string render_template(std::string_view tmpl, std::string_view placeholder,
                            std::string_view value) {
    std::string out(tmpl);
    std::string what = "{" + std::string(placeholder) + "}";
    std::size_t pos = 0;
    while ((pos = out.find(what, pos)) != std::string::npos) {
        out.replace(pos, what.size(), value);
        pos += value.size();
    }
    return out;
}

}  // namespace ueval
