#pragma once

#include <algorithm>
#include <array>
#include <iterator>
#include <string_view>

namespace stdgnn {

// Function words dropped by the report tokenizer.
inline constexpr std::string_view kStopWords[] = {
    "about", "above", "after", "again", "against", "all", "am", "an", "and", "any",
    "are", "as", "at", "be", "because", "been", "before", "being", "below", "between",
    "both", "but", "by", "can", "could", "did", "do", "does", "doing", "down",
    "during", "each", "few", "for", "from", "further", "had", "has", "have", "having",
    "he", "her", "here", "hers", "herself", "him", "himself", "his", "how", "if",
    "in", "into", "is", "it", "its", "itself", "just", "me", "more", "most",
    "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once",
    "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "same",
    "she", "should", "so", "some", "such", "than", "that", "the", "their", "theirs",
    "them", "themselves", "then", "there", "these", "they", "this", "those", "through", "to",
    "too", "under", "until", "up", "very", "was", "we", "were", "what", "when",
    "where", "which", "while", "who", "whom", "why", "will", "with", "would", "you",
    "your", "yours", "yourself", "yourselves", "also", "get", "got"};

inline bool is_stop_word(std::string_view w) {
  static const auto sorted = [] {
    std::array<std::string_view, std::size(kStopWords)> copy{};
    std::copy(std::begin(kStopWords), std::end(kStopWords), copy.begin());
    std::sort(copy.begin(), copy.end());
    return copy;
  }();
  return std::binary_search(sorted.begin(), sorted.end(), w);
}

}  // namespace stdgnn
