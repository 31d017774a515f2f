#pragma once

// ueval/text.hpp — concept-text normalization and small string helpers.

#include <cstddef>
#include <string>
#include <string_view>

namespace ueval {

// Strip leading/trailing ASCII whitespace.
std::string trim(std::string_view s);

// Lower-case a UTF-8 string. Covers ASCII plus the Latin-1 supplement
// (U+00C0..U+00DE except the multiplication sign); other code points pass
// through unchanged.
std::string fold_case(std::string_view s);

// Collapse internal runs of ASCII whitespace to single spaces.
std::string collapse_whitespace(std::string_view s);

// Canonical dedup key: trim, collapse internal whitespace, case-fold.
// "Indycar" and "Indy car" stay distinct; "  Indy car " and "INDY CAR"
// do not. Throws SchemaError if the input is empty after trimming.
std::string normalize_concept(std::string_view raw);

// Levenshtein distance over bytes.
std::size_t edit_distance(std::string_view a, std::string_view b);

// True if `needle` occurs in `haystack` after case-folding both sides.
bool contains_folded(std::string_view haystack, std::string_view needle);

// Render a "{label}"-style template ("a photo of {label}" by default).
std::string render_template(std::string_view tmpl, std::string_view placeholder,
                            std::string_view value);

}  // namespace ueval
