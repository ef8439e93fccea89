#include "steg/summarize.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>
#include <unordered_set>

#include "steg/error.hpp"

namespace steg {

std::vector<std::string> tokenize_alpha(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        if (std::isalpha(static_cast<unsigned char>(ch))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

double token_jaccard(const std::string& a, const std::string& b) {
    const auto ta = tokenize_alpha(a);
    const auto tb = tokenize_alpha(b);
    const std::unordered_set<std::string> sa(ta.begin(), ta.end());
    const std::unordered_set<std::string> sb(tb.begin(), tb.end());
    if (sa.empty() && sb.empty()) return 1.0;
    std::size_t common = 0;
    for (const auto& t : sa)
        if (sb.count(t)) ++common;
    const std::size_t unioned = sa.size() + sb.size() - common;
    return static_cast<double>(common) / static_cast<double>(unioned);
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// sentence slices including their terminating punctuation
std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (ch == '.' || ch == '!' || ch == '?') {
            const std::string s = trim(text.substr(start, i - start + 1));
            if (!s.empty()) out.push_back(s);
            start = i + 1;
        }
    }
    const std::string tail = trim(text.substr(start));
    if (!tail.empty()) out.push_back(tail);
    return out;
}

}  // namespace

std::string summarize_extractive(const std::string& text, int max_sentences) {
    if (max_sentences < 1) throw InvalidConfig("summarize: max_sentences must be at least 1");
    if (trim(text).empty()) throw EmptyText("summarize: empty input");

    const auto sentences = split_sentences(text);
    if (sentences.empty()) throw EmptyText("summarize: no sentences found");

    std::unordered_map<std::string, double> freq;
    for (const auto& t : tokenize_alpha(text)) freq[t] += 1.0;

    std::vector<double> score(sentences.size(), 0.0);
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        const auto tokens = tokenize_alpha(sentences[i]);
        if (tokens.empty()) continue;
        double acc = 0.0;
        for (const auto& t : tokens) acc += freq[t];
        score[i] = acc / static_cast<double>(tokens.size());
    }

    std::vector<std::size_t> order(sentences.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&score](std::size_t a, std::size_t b) { return score[a] > score[b]; });

    const std::size_t keep =
        std::min(static_cast<std::size_t>(max_sentences), sentences.size());
    std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
    std::sort(chosen.begin(), chosen.end());

    std::string out;
    for (std::size_t idx : chosen) {
        if (!out.empty()) out += ' ';
        out += sentences[idx];
    }
    return out;
}

}  // namespace steg
