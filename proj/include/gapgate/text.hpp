#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gapgate::text {

// Lowercases (ASCII, Latin-1, Latin Extended-A, Greek, Cyrillic), removes
// punctuation, and splits on whitespace. Used for both indexing and queries.
std::vector<std::string> tokenize(std::string_view input);

// Collapses every run of whitespace to one ASCII space and trims both ends.
std::string normalize_whitespace(std::string_view input);

// True when `needle` occurs in `haystack` after whitespace normalization of
// both. An empty needle never matches.
bool contains_normalized(std::string_view haystack, std::string_view needle);

// Splits a narrative into sentences at '.', '!', '?' followed by whitespace,
// and at line breaks. Returned sentences are trimmed substrings of the input.
std::vector<std::string> split_sentences(std::string_view input);

// Whole-word, case-insensitive search for any of `words`.
bool contains_word(std::string_view input, std::string_view word);

std::string to_lower_ascii(std::string_view input);

std::string sha256_hex(std::string_view data);

std::string read_file(const std::filesystem::path& path);

}  // namespace gapgate::text
