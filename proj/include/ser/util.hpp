// String, URL and hashing helpers shared across the library.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ser {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string collapse_whitespace(std::string_view s);
std::string strip_punctuation(std::string_view s);

// Lowercase whitespace-separated tokens, punctuation stripped. Empty tokens dropped.
std::vector<std::string> tokenize(std::string_view text);

// Lowercase purely-alphabetic tokens of length >= min_len (topic-model tokenizer).
std::vector<std::string> tokenize_alpha(std::string_view text, std::size_t min_len);

// Decodes %XX escapes; '+' is left untouched. Invalid escapes are kept verbatim.
std::string percent_decode(std::string_view s);

// Accepts http/https URLs with a non-empty host.
bool is_valid_url(std::string_view s);

// Final path segment of a URL, percent-decoded. nullopt when the URL is
// malformed or has no usable segment.
std::optional<std::string> url_final_segment(std::string_view url);

std::string sha256_hex(std::string_view data);

// Shortest representation that round-trips a double exactly.
std::string format_double(double v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace ser
