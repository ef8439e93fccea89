#pragma once

#include <string>
#include <vector>

namespace steg {

// lowercased alphabetic token runs, in order of appearance
std::vector<std::string> tokenize_alpha(const std::string& text);

// set-level Jaccard similarity over lowercased alphabetic tokens; 1.0 when
// both sides are empty
double token_jaccard(const std::string& a, const std::string& b);

// Extractive summary: sentences split at . ! ? boundaries, each scored by the
// mean frequency of its tokens over the whole input, top max_sentences kept in
// their original order.  Ties go to the earlier sentence.
std::string summarize_extractive(const std::string& text, int max_sentences);

}  // namespace steg
