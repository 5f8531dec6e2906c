#include "acdn/public_suffix.hpp"

#include <algorithm>
#include <cctype>
#include <vector>

namespace acdn {
namespace detail {
extern const std::string_view kPublicSuffixData;
}

namespace {

std::string normalize(std::string_view domain) {
    while (!domain.empty() && domain.front() == '.') domain.remove_prefix(1);
    while (!domain.empty() && domain.back() == '.') domain.remove_suffix(1);
    std::string out(domain);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Start offsets of each label, left to right.
std::vector<std::size_t> label_starts(std::string_view d) {
    std::vector<std::size_t> starts{0};
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d[i] == '.') starts.push_back(i + 1);
    return starts;
}

}  // namespace

PublicSuffixList PublicSuffixList::parse(std::string_view text, bool icann_only) {
    PublicSuffixList psl;
    bool in_private = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.starts_with("//")) {
            if (line.find("===BEGIN PRIVATE DOMAINS===") != std::string_view::npos) in_private = true;
            if (line.find("===END PRIVATE DOMAINS===") != std::string_view::npos) in_private = false;
            continue;
        }
        // a rule is the first whitespace-delimited token
        line = line.substr(0, line.find_first_of(" \t\r"));
        if (line.empty() || (icann_only && in_private)) continue;
        if (line.front() == '!')
            psl.exception_.insert(normalize(line.substr(1)));
        else if (line.starts_with("*."))
            psl.wildcard_.insert(normalize(line.substr(2)));
        else
            psl.normal_.insert(normalize(line));
    }
    return psl;
}

const PublicSuffixList& PublicSuffixList::builtin() {
    static const PublicSuffixList psl = parse(detail::kPublicSuffixData, true);
    return psl;
}

std::string PublicSuffixList::public_suffix(std::string_view domain) const {
    const std::string d = normalize(domain);
    if (d.empty()) return d;
    const auto starts = label_starts(d);
    auto suffix_at = [&](std::size_t label) { return std::string_view(d).substr(starts[label]); };

    // Exception rules win; the suffix is the rule minus its leftmost label.
    for (std::size_t i = 0; i < starts.size(); ++i) {
        if (exception_.count(std::string(suffix_at(i))))
            return i + 1 < starts.size() ? std::string(suffix_at(i + 1)) : std::string();
    }
    // Otherwise the longest matching rule.
    for (std::size_t i = 0; i < starts.size(); ++i) {
        if (normal_.count(std::string(suffix_at(i)))) return std::string(suffix_at(i));
        if (i + 1 < starts.size() && wildcard_.count(std::string(suffix_at(i + 1))))
            return std::string(suffix_at(i));
    }
    return std::string(suffix_at(starts.size() - 1));
}

std::optional<std::string> PublicSuffixList::registrable_domain(std::string_view domain) const {
    const std::string d = normalize(domain);
    const std::string suffix = public_suffix(d);
    if (suffix.empty() || suffix.size() >= d.size()) return std::nullopt;
    const std::string_view head = std::string_view(d).substr(0, d.size() - suffix.size() - 1);
    const auto dot = head.rfind('.');
    const std::string_view label = dot == std::string_view::npos ? head : head.substr(dot + 1);
    if (label.empty()) return std::nullopt;
    return std::string(label) + "." + suffix;
}

std::string second_level_domain(std::string_view fqdn, const PublicSuffixList& psl) {
    auto reg = psl.registrable_domain(fqdn);
    if (!reg) return std::string(kInvalidService);
    return reg->substr(0, reg->find('.'));
}

}  // namespace acdn
